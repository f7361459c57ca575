"""Configurations: enumeration, offline profiling and Pareto filtering.

A configuration pairs a cheap ``simple`` model with an accurate ``complex``
one, a difficulty threshold ``t`` in 0..9 and an execution mode. Windows
whose predicted activity is ``<= t`` go to ``simple`` on the watch; the rest
go to ``complex``, on the watch (Local) or on the phone (Hybrid).
"""

from __future__ import annotations

import csv
import enum
import itertools
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from chris.difficulty import Classifier
from chris.energy import Device, EnergyProfiles, window_energy
from chris.errors import EmptyWindowSet, MissingLabels, NoPeaks
from chris.predictors import ModelKind, Predictor, default_predictors
from chris.signal import N_ACTIVITIES, SampleWindow

THRESHOLDS = range(0, N_ACTIVITIES + 1)
TABLE_COLUMNS = (
    "simple", "complex", "threshold", "execution",
    "avg_mae_bpm", "avg_watch_mj", "offload_fraction",
)


class Execution(str, enum.Enum):
    LOCAL = "Local"
    HYBRID = "Hybrid"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Configuration:
    simple: ModelKind
    complex: ModelKind
    threshold: int
    execution: Execution
    avg_mae_bpm: float | None = None
    avg_watch_mj: float | None = None
    offload_fraction: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "simple", ModelKind(self.simple))
        object.__setattr__(self, "complex", ModelKind(self.complex))
        object.__setattr__(self, "execution", Execution(self.execution))
        if self.simple == self.complex:
            raise ValueError("a configuration needs two different models")
        if self.threshold not in THRESHOLDS:
            raise ValueError(f"threshold must be in 0..{N_ACTIVITIES}, got {self.threshold}")
        if self.offload_fraction is not None and not 0.0 <= self.offload_fraction <= 1.0:
            raise ValueError("offload_fraction must be in [0, 1]")

    @property
    def profiled(self) -> bool:
        return self.avg_mae_bpm is not None and self.avg_watch_mj is not None

    @property
    def key(self) -> tuple[str, str, int, str]:
        """Lexicographic identity used to break exact ties."""
        return (self.simple.value, self.complex.value, self.threshold, self.execution.value)

    def uses_simple(self, activity: int) -> bool:
        return activity <= self.threshold

    def label(self) -> str:
        return f"{self.simple}+{self.complex}/t{self.threshold}/{self.execution}"


def model_pairs(models: Sequence[ModelKind],
                profiles: EnergyProfiles | None = None) -> list[tuple[ModelKind, ModelKind]]:
    """Unordered pairs with roles fixed by board energy (cheaper one is ``simple``)."""
    models = [ModelKind(m) for m in models]
    if len(set(models)) != len(models):
        raise ValueError("models must be distinct")
    if profiles is None:
        from chris.energy import default_profiles

        profiles = default_profiles()
    ordered = sorted(models, key=lambda m: (profiles[m].e_board_mj, m.value))
    return list(itertools.combinations(ordered, 2))


def enumerate_configurations(models: Sequence[ModelKind] = tuple(ModelKind),
                             profiles: EnergyProfiles | None = None,
                             include_hybrid: bool = True) -> list[Configuration]:
    """Every (pair, execution, threshold) combination, unprofiled.

    Three models give 3 pairs x 2 executions x 10 thresholds = 60.
    """
    executions = (Execution.LOCAL, Execution.HYBRID) if include_hybrid else (Execution.LOCAL,)
    return [
        Configuration(simple, complex_, t, ex)
        for simple, complex_ in model_pairs(models, profiles)
        for ex in executions
        for t in THRESHOLDS
    ]


# -- profiling -----------------------------------------------------------------------


@dataclass
class ProfilingData:
    """Per-window predicted activities and per-model HR estimates, computed once.

    ``predictions[kind][i]`` is NaN where the model produced no estimate.
    """

    hr_ref: np.ndarray
    activity_true: np.ndarray
    activity_pred: np.ndarray
    predictions: dict[ModelKind, np.ndarray]
    dataset_id: str = ""

    def __len__(self) -> int:
        return len(self.hr_ref)


def predict_all(predictor: Predictor, windows: Sequence[SampleWindow]) -> np.ndarray:
    out = np.empty(len(windows))
    for i, w in enumerate(windows):
        try:
            out[i] = predictor(w)
        except NoPeaks:
            out[i] = np.nan
    return out


def prepare(windows: Sequence[SampleWindow], classifier: Classifier,
            predictors: Mapping[ModelKind, Predictor] | None = None,
            models: Iterable[ModelKind] = tuple(ModelKind),
            dataset_id: str = "") -> ProfilingData:
    if not windows:
        raise EmptyWindowSet("profiling needs at least one window")
    if any(w.hr_ref is None for w in windows):
        raise MissingLabels("every profiling window needs a reference heart rate")
    predictors = dict(predictors) if predictors is not None else default_predictors()
    return ProfilingData(
        hr_ref=np.array([w.hr_ref for w in windows], dtype=np.float64),
        activity_true=np.array([w.activity for w in windows], dtype=np.int64),
        activity_pred=np.array([classifier(w) for w in windows], dtype=np.int64),
        predictions={ModelKind(m): predict_all(predictors[ModelKind(m)], windows) for m in models},
        dataset_id=dataset_id,
    )


def profile(config: Configuration, data: ProfilingData | Sequence[SampleWindow],
            classifier: Classifier | None = None, profiles: EnergyProfiles | None = None,
            predictors: Mapping[ModelKind, Predictor] | None = None) -> Configuration:
    """Fill a configuration's average MAE, watch energy and offload fraction.

    Routing uses the *predicted* activity, so classifier mistakes show up in
    both averages. Windows where the routed model gave no estimate still pay
    its energy but are left out of the MAE. Sums use ``math.fsum`` so the
    result does not depend on window order.
    """
    if profiles is None:
        raise ValueError("energy profiles are required")
    if not isinstance(data, ProfilingData):
        if classifier is None:
            raise ValueError("a classifier is required to profile raw windows")
        data = prepare(list(data), classifier, predictors,
                       models=(config.simple, config.complex))
    if len(data) == 0:
        raise EmptyWindowSet("profiling needs at least one window")

    simple_mask = data.activity_pred <= config.threshold
    hr_pred = np.where(simple_mask, data.predictions[config.simple],
                       data.predictions[config.complex])
    complex_device = Device.PHONE if config.execution is Execution.HYBRID else Device.WATCH
    e_simple = window_energy(profiles[config.simple], profiles.link, Device.WATCH).watch_mj
    e_complex = window_energy(profiles[config.complex], profiles.link, complex_device).watch_mj
    n = len(data)
    n_simple = int(simple_mask.sum())
    watch = math.fsum([e_simple] * n_simple + [e_complex] * (n - n_simple)) / n
    err = np.abs(hr_pred - data.hr_ref)
    err = err[~np.isnan(err)]
    mae = math.fsum(err.tolist()) / len(err) if len(err) else math.nan
    offload = (n - n_simple) / n if config.execution is Execution.HYBRID else 0.0
    return replace(config, avg_mae_bpm=mae, avg_watch_mj=watch, offload_fraction=offload)


def profile_all(configs: Iterable[Configuration], data: ProfilingData,
                profiles: EnergyProfiles) -> list[Configuration]:
    return [profile(c, data, profiles=profiles) for c in configs]


# -- Pareto table ----------------------------------------------------------------------


def dominates(a: Configuration, b: Configuration) -> bool:
    return (
        a.avg_watch_mj <= b.avg_watch_mj
        and a.avg_mae_bpm <= b.avg_mae_bpm
        and (a.avg_watch_mj < b.avg_watch_mj or a.avg_mae_bpm < b.avg_mae_bpm)
    )


def _order(c: Configuration) -> tuple:
    return (c.avg_watch_mj, c.avg_mae_bpm, c.key, c.offload_fraction or 0.0)


@dataclass(frozen=True)
class ConfigTable:
    """Configurations sorted by increasing watch energy, plus provenance."""

    rows: tuple[Configuration, ...]
    dataset_id: str = ""
    fixture_id: str = ""
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        if not all(r.profiled for r in rows):
            raise ValueError("table rows must be profiled")
        object.__setattr__(
            self, "rows",
            tuple(sorted(rows, key=_order)),
        )

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i: int) -> Configuration:
        return self.rows[i]

    def is_pareto(self) -> bool:
        """Strictly increasing energy with strictly decreasing MAE."""
        return all(
            a.avg_watch_mj < b.avg_watch_mj and a.avg_mae_bpm > b.avg_mae_bpm
            for a, b in zip(self.rows, self.rows[1:])
        )

    def with_rows(self, rows: Iterable[Configuration]) -> ConfigTable:
        return replace(self, rows=tuple(rows))


def pareto_filter(configs: Iterable[Configuration], dataset_id: str = "",
                  fixture_id: str = "") -> ConfigTable:
    """Non-dominated configurations in the (watch energy, MAE) plane.

    One sweep in (energy, MAE, key) order keeps a row iff its MAE is strictly
    below every MAE seen so far; exact duplicates keep the smallest key
    (then the smallest offload fraction, then the earliest).
    """
    configs = [c for c in configs]
    if not all(c.profiled for c in configs):
        raise ValueError("pareto_filter needs profiled configurations")
    configs = [c for c in configs if not math.isnan(c.avg_mae_bpm)]
    ordered = sorted(configs, key=_order)
    front, best = [], math.inf
    for c in ordered:
        if c.avg_mae_bpm < best:
            front.append(c)
            best = c.avg_mae_bpm
    return ConfigTable(rows=tuple(front), dataset_id=dataset_id, fixture_id=fixture_id)


def local_front(configs: Iterable[Configuration], dataset_id: str = "",
                fixture_id: str = "") -> ConfigTable:
    """Pareto front of the Local configurations only (what survives a BLE outage)."""
    return pareto_filter((c for c in configs if c.execution is Execution.LOCAL),
                         dataset_id, fixture_id)


def example_table() -> ConfigTable:
    """Illustrative stored rows (not mutually non-dominated)."""
    return ConfigTable(
        rows=(
            Configuration(ModelKind.AT, ModelKind.SMALL, 9, Execution.LOCAL, 10.11, 0.92, 0.0),
            Configuration(ModelKind.AT, ModelKind.BIG, 9, Execution.HYBRID, 10.05, 0.87, 0.0),
            Configuration(ModelKind.AT, ModelKind.BIG, 1, Execution.LOCAL, 5.11, 40.05, 0.0),
        ),
        fixture_id="example",
    )


# -- CSV -------------------------------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def config_row(c: Configuration) -> list[str]:
    return [c.simple.value, c.complex.value, str(c.threshold), c.execution.value,
            _fmt(c.avg_mae_bpm), _fmt(c.avg_watch_mj), _fmt(c.offload_fraction)]


def write_configs(configs: Iterable[Configuration], path: str | Path,
                  extra: Mapping[str, Sequence[Any]] | None = None) -> None:
    """Write configurations with the table columns, plus optional extra columns."""
    configs = list(configs)
    extra = dict(extra or {})
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(TABLE_COLUMNS) + list(extra))
        for i, c in enumerate(configs):
            w.writerow(config_row(c) + [
                _fmt(v[i]) if isinstance(v[i], float) else str(v[i]) for v in extra.values()
            ])


def _opt_float(text: str) -> float | None:
    return float(text) if text.strip() else None


def read_configs(path: str | Path) -> list[Configuration]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TABLE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        return [
            Configuration(
                simple=ModelKind(r["simple"]),
                complex=ModelKind(r["complex"]),
                threshold=int(r["threshold"]),
                execution=Execution(r["execution"]),
                avg_mae_bpm=_opt_float(r["avg_mae_bpm"]),
                avg_watch_mj=_opt_float(r["avg_watch_mj"]),
                offload_fraction=_opt_float(r["offload_fraction"]),
            )
            for r in reader
        ]


def save_table(table: ConfigTable, path: str | Path) -> None:
    """CSV rows plus a ``<name>.meta.json`` sidecar with dataset/fixture ids."""
    path = Path(path)
    write_configs(table.rows, path)
    meta = {"dataset_id": table.dataset_id, "fixture_id": table.fixture_id, **table.metadata}
    path.with_name(path.name + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_table(path: str | Path) -> ConfigTable:
    path = Path(path)
    meta_path = path.with_name(path.name + ".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    dataset_id = meta.pop("dataset_id", "")
    fixture_id = meta.pop("fixture_id", "")
    return ConfigTable(rows=tuple(read_configs(path)), dataset_id=dataset_id,
                       fixture_id=fixture_id, metadata=meta)
