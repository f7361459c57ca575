"""Heart-rate estimators: adaptive threshold and int8 TimePPG-shaped TCNs."""

from __future__ import annotations

import enum
from collections.abc import Callable
from functools import lru_cache
from importlib import resources

from chris.predictors.at import at_predict, clamp_hr
from chris.predictors.tcn import (
    TcnSpec,
    TcnWeights,
    count_ops,
    load_model,
    model_from_dict,
    random_model,
    tcn_infer,
)
from chris.signal import SampleWindow


class ModelKind(str, enum.Enum):
    AT = "AT"
    SMALL = "TimePPG-Small"
    BIG = "TimePPG-Big"

    def __str__(self) -> str:
        return self.value


Predictor = Callable[[SampleWindow], float]

_SHIPPED = {ModelKind.SMALL: "timeppg_small.json", ModelKind.BIG: "timeppg_big.json"}


def shipped_model(kind: ModelKind) -> tuple[TcnSpec, TcnWeights | None]:
    """Architecture (and weights, if bundled) shipped for a TCN kind."""
    import json

    text = resources.files("chris.data").joinpath(_SHIPPED[ModelKind(kind)]).read_text("utf-8")
    return model_from_dict(json.loads(text))


def shipped_spec(kind: ModelKind) -> TcnSpec:
    return shipped_model(kind)[0]


def tcn_predictor(spec: TcnSpec, weights: TcnWeights | None, name: str = "tcn") -> Predictor:
    """Window -> BPM callable for a network; without weights a seeded random one is used."""
    if weights is None:
        spec, weights = random_model(spec, seed=0)

    def predict(window: SampleWindow) -> float:
        return tcn_infer(spec, weights, window)

    predict.__name__ = f"predict_{name}"
    return predict


@lru_cache(maxsize=None)
def _tcn_predictor(kind: ModelKind) -> Predictor:
    spec, weights = shipped_model(kind)
    return tcn_predictor(spec, weights, kind.name.lower())


def at_window(window: SampleWindow) -> float:
    return at_predict(window.ppg, window.fs)


def default_predictors() -> dict[ModelKind, Predictor]:
    """Window -> BPM callables for the three model kinds."""
    return {
        ModelKind.AT: at_window,
        ModelKind.SMALL: _tcn_predictor(ModelKind.SMALL),
        ModelKind.BIG: _tcn_predictor(ModelKind.BIG),
    }


__all__ = [
    "ModelKind",
    "Predictor",
    "at_predict",
    "at_window",
    "clamp_hr",
    "count_ops",
    "default_predictors",
    "load_model",
    "shipped_model",
    "shipped_spec",
    "tcn_infer",
    "tcn_predictor",
]
