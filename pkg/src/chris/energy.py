"""Per-prediction energy accounting for the watch, the phone and the BLE link.

Fixtures hold the measured per-window costs of the three predictors on the
watch MCU (STM32WB55 at 64 MHz) and on a Raspberry Pi3 standing in for the
phone, plus the watch-side cost of sending one input window over BLE.
Idle energy between predictions is not modelled.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from chris.predictors import ModelKind


class Device(str, enum.Enum):
    WATCH = "Watch"
    PHONE = "Phone"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ModelProfile:
    kind: ModelKind
    mae_bpm: float
    e_board_mj: float
    e_phone_mj: float
    cycles_board: int
    time_board_ms: float
    time_phone_ms: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not (self.e_board_mj > 0 and self.e_phone_mj > 0):
            raise ValueError(f"{self.kind}: energies must be positive")
        if not self.mae_bpm > 0:
            raise ValueError(f"{self.kind}: MAE must be positive")


@dataclass(frozen=True)
class LinkProfile:
    e_ble_mj: float
    time_ms: float

    def __post_init__(self) -> None:
        if not self.e_ble_mj > 0:
            raise ValueError("BLE energy must be positive")


@dataclass(frozen=True)
class EnergyOutcome:
    watch_mj: float
    phone_mj: float
    where: Device

    @property
    def total_mj(self) -> float:
        return self.watch_mj + self.phone_mj


@dataclass(frozen=True)
class EnergyProfiles:
    """A complete fixture set: one profile per model kind plus the link."""

    models: dict[ModelKind, ModelProfile]
    link: LinkProfile
    name: str = "custom"

    def __getitem__(self, kind: ModelKind) -> ModelProfile:
        return self.models[ModelKind(kind)]

    def offload_saves_watch_energy(self, kind: ModelKind) -> bool:
        return self[kind].e_board_mj > self.link.e_ble_mj


def window_energy(model: ModelProfile, link: LinkProfile, where: Device) -> EnergyOutcome:
    """Energy of one prediction executed on ``where``.

    On the watch the model's board energy is spent; offloading costs the
    watch one BLE transmission and the phone its inference energy.
    """
    if Device(where) is Device.WATCH:
        return EnergyOutcome(watch_mj=model.e_board_mj, phone_mj=0.0, where=Device.WATCH)
    return EnergyOutcome(watch_mj=link.e_ble_mj, phone_mj=model.e_phone_mj, where=Device.PHONE)


def window_latency_ms(model: ModelProfile, link: LinkProfile, where: Device) -> float:
    if Device(where) is Device.WATCH:
        return model.time_board_ms
    return link.time_ms + model.time_phone_ms


# The text also quotes the BLE cost rounded differently; both values are kept.
BLE_MJ = 0.52
BLE_MJ_ALIAS = 0.519


def default_profiles() -> EnergyProfiles:
    """Board/phone deployment measurements (watch MCU at 64 MHz, Pi3 at 600 MHz)."""
    return EnergyProfiles(
        models={
            ModelKind.AT: ModelProfile(ModelKind.AT, 10.99, 0.234, 1.60, 100_000, 1.563, 1.00),
            ModelKind.SMALL: ModelProfile(ModelKind.SMALL, 5.60, 0.735, 5.54, 1_365_000, 21.326, 3.45),
            ModelKind.BIG: ModelProfile(ModelKind.BIG, 4.87, 41.11, 25.60, 103_160_000, 1611.88, 15.96),
        },
        link=LinkProfile(e_ble_mj=BLE_MJ, time_ms=10.240),
        name="deployment",
    )


def alternate_profiles() -> EnergyProfiles:
    """The per-model summary figures, which differ slightly from the deployment set.

    Board/phone energies and MAE come from the summary; cycles and times are
    taken from the deployment set since the summary omits them.
    """
    base = default_profiles()
    return EnergyProfiles(
        models={
            ModelKind.AT: ModelProfile(ModelKind.AT, 10.84, 0.23, 1.61, 100_000, 1.563, 1.00),
            ModelKind.SMALL: ModelProfile(ModelKind.SMALL, 5.63, 0.543, 5.54, 1_365_000, 21.326, 3.45),
            ModelKind.BIG: ModelProfile(ModelKind.BIG, 4.88, 41.11, 25.60, 103_160_000, 1611.88, 15.96),
        },
        link=base.link,
        name="summary",
    )


FIXTURES = {"deployment": default_profiles, "summary": alternate_profiles}


def profiles_to_dict(profiles: EnergyProfiles) -> dict[str, Any]:
    return {
        "name": profiles.name,
        "models": [
            {**asdict(p), "kind": p.kind.value} for p in profiles.models.values()
        ],
        "link": asdict(profiles.link),
    }


def profiles_from_dict(d: dict[str, Any]) -> EnergyProfiles:
    models = {}
    for entry in d["models"]:
        p = ModelProfile(**entry)
        models[p.kind] = p
    return EnergyProfiles(models=models, link=LinkProfile(**d["link"]),
                          name=d.get("name", "custom"))


def load_profiles(path: str | Path) -> EnergyProfiles:
    """Load a JSON fixture file, or a built-in set by name (``deployment``, ``summary``)."""
    if str(path) in FIXTURES:
        return FIXTURES[str(path)]()
    return profiles_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_profiles(profiles: EnergyProfiles, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profiles_to_dict(profiles), indent=2) + "\n",
                          encoding="utf-8")
