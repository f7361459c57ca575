"""Decision engine: feasibility by link status, constrained selection, per-window dispatch."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Union

from chris.energy import Device
from chris.errors import ConstraintUnsatisfiable, NoFeasibleConfig
from chris.predictors import ModelKind
from chris.signal import check_activity
from chris.zoo import ConfigTable, Configuration, Execution

log = logging.getLogger(__name__)


class ConnectionStatus(str, enum.Enum):
    CONNECTED = "Connected"
    DISCONNECTED = "Disconnected"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> ConnectionStatus:
        for member in cls:
            if text.strip().lower() == member.value.lower():
                return member
        raise ValueError(f"unknown connection status {text!r}")


@dataclass(frozen=True)
class MaxMae:
    th_mae: float

    def __post_init__(self) -> None:
        if not self.th_mae > 0:
            raise ValueError("MAE threshold must be positive")

    def __str__(self) -> str:
        return f"max-mae={self.th_mae!r}"


@dataclass(frozen=True)
class MaxEnergy:
    th_energy: float

    def __post_init__(self) -> None:
        if not self.th_energy > 0:
            raise ValueError("energy threshold must be positive")

    def __str__(self) -> str:
        return f"max-energy={self.th_energy!r}"


Constraint = Union[MaxMae, MaxEnergy]


def parse_constraint(text: str) -> Constraint:
    """Parse ``max-mae=<bpm>`` or ``max-energy=<mJ>`` (``inf`` allowed for energy)."""
    name, sep, value = text.partition("=")
    if not sep:
        raise ValueError(f"constraint must look like max-mae=<bpm> or max-energy=<mJ>: {text!r}")
    name = name.strip().lower()
    number = float(value)
    if math.isnan(number):
        raise ValueError("constraint threshold is NaN")
    if name == "max-mae":
        return MaxMae(number)
    if name == "max-energy":
        return MaxEnergy(number)
    raise ValueError(f"unknown constraint {name!r}")


@dataclass(frozen=True)
class Dispatch:
    model: ModelKind
    device: Device


@dataclass(frozen=True)
class Selection:
    """Chosen configuration; ``soft_violation`` marks a fallback pick."""

    config: Configuration
    constraint: Constraint
    soft_violation: bool = False


def feasible(table: ConfigTable, status: ConnectionStatus) -> ConfigTable:
    """Drop Hybrid rows when the link is down.

    A subset of a sorted antichain is still a sorted antichain, so removing
    rows keeps the table invariants without re-filtering.
    """
    if ConnectionStatus(status) is ConnectionStatus.CONNECTED:
        rows = table.rows
    else:
        rows = tuple(c for c in table.rows if c.execution is Execution.LOCAL)
    if not rows:
        raise NoFeasibleConfig(f"no configuration is feasible while {status}")
    return table if rows is table.rows else table.with_rows(rows)


def select(table: ConfigTable, constraint: Constraint, strict: bool = False) -> Selection:
    """Pick a configuration in one linear pass over the table.

    ``MaxMae``: lowest energy among rows with MAE <= threshold.
    ``MaxEnergy``: lowest MAE among rows with energy <= threshold.
    When nothing qualifies the closest row is returned with
    ``soft_violation=True`` (lowest MAE, resp. lowest energy), or
    :class:`ConstraintUnsatisfiable` is raised if ``strict``.
    """
    if len(table) == 0:
        raise NoFeasibleConfig("empty configuration table")
    best: Configuration | None = None
    fallback: Configuration | None = None
    if isinstance(constraint, MaxMae):
        for c in table.rows:
            if c.avg_mae_bpm <= constraint.th_mae:
                if best is None or (c.avg_watch_mj, c.avg_mae_bpm) < (best.avg_watch_mj, best.avg_mae_bpm):
                    best = c
            if fallback is None or (c.avg_mae_bpm, c.avg_watch_mj) < (fallback.avg_mae_bpm, fallback.avg_watch_mj):
                fallback = c
    elif isinstance(constraint, MaxEnergy):
        for c in table.rows:
            if c.avg_watch_mj <= constraint.th_energy:
                if best is None or (c.avg_mae_bpm, c.avg_watch_mj) < (best.avg_mae_bpm, best.avg_watch_mj):
                    best = c
            if fallback is None or (c.avg_watch_mj, c.avg_mae_bpm) < (fallback.avg_watch_mj, fallback.avg_mae_bpm):
                fallback = c
    else:
        raise TypeError(f"unsupported constraint {constraint!r}")
    if best is not None:
        return Selection(best, constraint)
    if strict:
        raise ConstraintUnsatisfiable(f"no configuration satisfies {constraint}")
    return Selection(fallback, constraint, soft_violation=True)


def dispatch(config: Configuration, predicted_activity: int) -> Dispatch:
    """Route one window: activities ``<= threshold`` use the simple model on the watch."""
    if config.uses_simple(check_activity(predicted_activity)):
        return Dispatch(config.simple, Device.WATCH)
    device = Device.PHONE if config.execution is Execution.HYBRID else Device.WATCH
    return Dispatch(config.complex, device)


class DecisionEngine:
    """Holds the active configuration; re-selects only on status or constraint changes.

    ``local_table`` optionally supplies the Local-only front used while
    disconnected; otherwise the Local rows of ``table`` are used.
    """

    def __init__(self, table: ConfigTable, constraint: Constraint,
                 status: ConnectionStatus = ConnectionStatus.CONNECTED,
                 local_table: ConfigTable | None = None) -> None:
        self.table = table
        self.local_table = local_table
        self.constraint = constraint
        self.status = ConnectionStatus(status)
        self.selection: Selection | None = None
        self.reselect()

    def reselect(self) -> Selection:
        source = self.table
        if self.status is ConnectionStatus.DISCONNECTED and self.local_table is not None:
            source = self.local_table
        try:
            self.selection = select(feasible(source, self.status), self.constraint)
        except NoFeasibleConfig:
            self.selection = None
            raise
        log.info("selected %s under %s (%s)%s", self.selection.config.label(), self.constraint,
                 self.status, " [soft violation]" if self.selection.soft_violation else "")
        return self.selection

    def update(self, status: ConnectionStatus | None = None,
               constraint: Constraint | None = None) -> Selection | None:
        """Apply a status/constraint change; returns the new selection if anything changed."""
        changed = False
        if status is not None and ConnectionStatus(status) is not self.status:
            self.status, changed = ConnectionStatus(status), True
        if constraint is not None and constraint != self.constraint:
            self.constraint, changed = constraint, True
        if changed or self.selection is None:
            return self.reselect()
        return None

    @property
    def config(self) -> Configuration:
        if self.selection is None:
            raise NoFeasibleConfig(f"no configuration is feasible while {self.status}")
        return self.selection.config

    def route(self, predicted_activity: int) -> Dispatch:
        return dispatch(self.config, predicted_activity)
