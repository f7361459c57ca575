"""Trace-driven simulation of the watch/phone runtime and its reports.

Each window is classified, dispatched by the active configuration, run
through the dispatched predictor and charged its energy. The configuration
is re-selected only where the link schedule changes status. Windows for
which the adaptive-threshold estimator finds no peaks reuse the previous
window's estimate and are flagged.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from chris.difficulty import Classifier
from chris.energy import Device, EnergyProfiles, window_energy, window_latency_ms
from chris.engine import (
    ConnectionStatus,
    Constraint,
    MaxEnergy,
    Selection,
    dispatch,
    feasible,
    select,
)
from chris.errors import NoFeasibleConfig, NoPeaks
from chris.predictors import ModelKind, Predictor, default_predictors
from chris.signal import SampleWindow, Trace, windows as slice_windows
from chris.zoo import ConfigTable, Configuration, Execution, enumerate_configurations

log = logging.getLogger(__name__)

LOG_COLUMNS = ("idx", "activity_true", "activity_pred", "model", "device",
               "hr_pred", "hr_ref", "watch_mj", "phone_mj")


@dataclass(frozen=True)
class LinkSchedule:
    """Half-open window-index intervals ``[start, end)`` with a link status."""

    intervals: tuple[tuple[int, int, ConnectionStatus], ...]

    def __post_init__(self) -> None:
        ivs = tuple((int(s), int(e), ConnectionStatus(st)) for s, e, st in self.intervals)
        if not ivs:
            raise ValueError("schedule needs at least one interval")
        if ivs[0][0] != 0:
            raise ValueError("schedule must start at window 0")
        for (s, e, _), nxt in zip(ivs, ivs[1:] + ((None, None, None),)):
            if e <= s:
                raise ValueError(f"empty or reversed interval [{s}, {e})")
            if nxt[0] is not None and nxt[0] != e:
                raise ValueError("intervals must be sorted, disjoint and contiguous")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def constant(cls, n_windows: int,
                 status: ConnectionStatus = ConnectionStatus.CONNECTED) -> LinkSchedule:
        return cls(((0, max(n_windows, 1), status),))

    @property
    def end(self) -> int:
        return self.intervals[-1][1]

    def covers(self, n_windows: int) -> bool:
        return self.end == n_windows

    def status_at(self, idx: int) -> ConnectionStatus:
        for s, e, st in self.intervals:
            if s <= idx < e:
                return st
        raise IndexError(f"window {idx} outside schedule [0, {self.end})")

    def to_dict(self) -> dict[str, Any]:
        return {"intervals": [{"start": s, "end": e, "status": st.value}
                              for s, e, st in self.intervals]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> LinkSchedule:
        return cls(tuple((i["start"], i["end"], ConnectionStatus.parse(i["status"]))
                         for i in d["intervals"]))

    @classmethod
    def load(cls, path: str | Path) -> LinkSchedule:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class WindowRecord:
    idx: int
    activity_true: int
    activity_pred: int | None
    model: ModelKind | None
    device: Device | None
    hr_pred: float | None
    hr_ref: float | None
    watch_mj: float
    phone_mj: float
    latency_ms: float = 0.0
    held: bool = False

    def csv_row(self) -> list[str]:
        def f(x: float | None) -> str:
            return "" if x is None or math.isnan(x) else repr(float(x))

        return [
            str(self.idx), str(self.activity_true),
            "" if self.activity_pred is None else str(self.activity_pred),
            "" if self.model is None else self.model.value,
            "" if self.device is None else self.device.value,
            f(self.hr_pred), f(self.hr_ref), f(self.watch_mj), f(self.phone_mj),
        ]


@dataclass(frozen=True)
class ActivityStats:
    count: int
    mae: float | None
    watch_mj: float


@dataclass
class SimReport:
    n_windows: int
    mae_bpm: float | None
    watch_mj_total: float
    watch_mj_mean: float
    phone_mj_total: float
    offload_fraction: float
    per_activity: dict[int, ActivityStats]
    config_switches: list[tuple[int, Configuration, bool]]
    faults: list[tuple[int, str]] = field(default_factory=list)
    held_windows: list[int] = field(default_factory=list)
    latency_ms_mean: float = 0.0
    records: list[WindowRecord] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def soft_violation(self) -> bool:
        return any(flag for _, _, flag in self.config_switches)

    def summary(self) -> dict[str, Any]:
        return {
            "n_windows": self.n_windows,
            "mae_bpm": self.mae_bpm,
            "watch_mj_total": self.watch_mj_total,
            "watch_mj_mean": self.watch_mj_mean,
            "phone_mj_total": self.phone_mj_total,
            "offload_fraction": self.offload_fraction,
            "latency_ms_mean": self.latency_ms_mean,
            "n_faults": len(self.faults),
            "n_held": len(self.held_windows),
            "soft_violation": self.soft_violation,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.summary(),
            "per_activity": {str(a): asdict(s) for a, s in sorted(self.per_activity.items())},
            "config_switches": [
                {"window": i, "soft_violation": flag,
                 **{k: (v.value if hasattr(v, "value") else v) for k, v in asdict(c).items()}}
                for i, c, flag in self.config_switches
            ],
            "faults": [{"window": i, "message": m} for i, m in self.faults],
            "held_windows": list(self.held_windows),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.records:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        s = _jsonable(self.summary())
        w.writerow(list(s))
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v)
                    for v in s.values()])
        return buf.getvalue()

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "windows.csv").write_text(self.log_csv(), encoding="utf-8")
        (out / "summary.csv").write_text(self.summary_csv(), encoding="utf-8")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class PredictionCache:
    """Memoizes predictor outputs per (model, window index); NaN marks NoPeaks."""

    def __init__(self, windows: Sequence[SampleWindow],
                 predictors: Mapping[ModelKind, Predictor]) -> None:
        self.windows = windows
        self.predictors = predictors
        self._hr: dict[tuple[ModelKind, int], float] = {}

    def __call__(self, kind: ModelKind, idx: int) -> float:
        key = (kind, idx)
        if key not in self._hr:
            try:
                self._hr[key] = float(self.predictors[kind](self.windows[idx]))
            except NoPeaks:
                self._hr[key] = math.nan
        return self._hr[key]


def _select_for(table: ConfigTable, local_table: ConfigTable | None,
                status: ConnectionStatus, constraint: Constraint | None,
                force: Configuration | None) -> Selection:
    if force is not None:
        if status is ConnectionStatus.DISCONNECTED and force.execution is Execution.HYBRID:
            raise NoFeasibleConfig(f"forced configuration {force.label()} needs the link")
        return Selection(force, constraint or MaxEnergy(math.inf))
    source = local_table if (status is ConnectionStatus.DISCONNECTED and local_table) else table
    return select(feasible(source, status), constraint)


def run_windows(wins: Sequence[SampleWindow], table: ConfigTable | None,
                classifier: Classifier, profiles: EnergyProfiles,
                constraint: Constraint | None = None,
                schedule: LinkSchedule | None = None, *,
                force: Configuration | None = None,
                local_table: ConfigTable | None = None,
                predictors: Mapping[ModelKind, Predictor] | None = None,
                cache: PredictionCache | None = None,
                activity_pred: Sequence[int] | None = None) -> SimReport:
    """Simulate a window sequence; see :func:`run`."""
    n = len(wins)
    if schedule is None:
        schedule = LinkSchedule.constant(n)
    if n and not schedule.covers(n):
        raise ValueError(f"schedule covers [0, {schedule.end}) but there are {n} windows")
    if force is None and (table is None or constraint is None):
        raise ValueError("either force a configuration or give a table and a constraint")
    if cache is None:
        cache = PredictionCache(wins, predictors if predictors is not None else default_predictors())

    records: list[WindowRecord] = []
    switches: list[tuple[int, Configuration, bool]] = []
    faults: list[tuple[int, str]] = []
    held: list[int] = []
    current: Selection | None = None
    status: ConnectionStatus | None = None
    last_hr = math.nan
    for k, w in enumerate(wins):
        st = schedule.status_at(k)
        if st is not status:
            status = st
            try:
                current = _select_for(table, local_table, st, constraint, force)
                switches.append((k, current.config, current.soft_violation))
                log.info("window %d: %s -> %s%s", k, st, current.config.label(),
                         " [soft violation]" if current.soft_violation else "")
            except NoFeasibleConfig as exc:
                current = None
                faults.append((k, str(exc)))
                log.warning("window %d: %s", k, exc)
        if current is None:
            records.append(WindowRecord(k, w.activity, None, None, None, None, w.hr_ref, 0.0, 0.0))
            continue
        a_pred = int(activity_pred[k]) if activity_pred is not None else int(classifier(w))
        d = dispatch(current.config, a_pred)
        hr = cache(d.model, k)
        is_held = math.isnan(hr)
        if is_held:
            hr = last_hr
            held.append(k)
        last_hr = hr
        e = window_energy(profiles[d.model], profiles.link, d.device)
        records.append(WindowRecord(
            k, w.activity, a_pred, d.model, d.device,
            None if math.isnan(hr) else hr, w.hr_ref, e.watch_mj, e.phone_mj,
            window_latency_ms(profiles[d.model], profiles.link, d.device), is_held,
        ))
    return summarize(records, switches, faults, held)


def summarize(records: Sequence[WindowRecord], switches, faults, held) -> SimReport:
    n = len(records)
    errors = [abs(r.hr_pred - r.hr_ref) for r in records
              if r.hr_pred is not None and r.hr_ref is not None]
    per_activity: dict[int, ActivityStats] = {}
    for a in sorted({r.activity_true for r in records}):
        rs = [r for r in records if r.activity_true == a]
        errs = [abs(r.hr_pred - r.hr_ref) for r in rs
                if r.hr_pred is not None and r.hr_ref is not None]
        per_activity[a] = ActivityStats(
            count=len(rs),
            mae=math.fsum(errs) / len(errs) if errs else None,
            watch_mj=math.fsum(r.watch_mj for r in rs),
        )
    served = [r for r in records if r.device is not None]
    watch_total = math.fsum(r.watch_mj for r in records)
    return SimReport(
        n_windows=n,
        mae_bpm=math.fsum(errors) / len(errors) if errors else None,
        watch_mj_total=watch_total,
        watch_mj_mean=watch_total / n if n else 0.0,
        phone_mj_total=math.fsum(r.phone_mj for r in records),
        offload_fraction=sum(r.device is Device.PHONE for r in records) / n if n else 0.0,
        per_activity=per_activity,
        config_switches=list(switches),
        faults=list(faults),
        held_windows=list(held),
        latency_ms_mean=math.fsum(r.latency_ms for r in served) / len(served) if served else 0.0,
        records=list(records),
    )


def run(trace: Trace, table: ConfigTable | None, classifier: Classifier,
        profiles: EnergyProfiles, constraint: Constraint | None = None,
        schedule: LinkSchedule | None = None, **kwargs: Any) -> SimReport:
    """Stream a trace through classification, dispatch, inference and accounting.

    ``classifier`` is a fitted :class:`~chris.difficulty.RandomForest` or any
    window -> activity callable. A configuration that becomes infeasible
    (e.g. only Hybrid rows during an outage) is recorded as a fault and the
    affected windows are left unserved. Keyword arguments go to
    :func:`run_windows` (``force``, ``local_table``, ``predictors``).
    """
    report = run_windows(slice_windows(trace), table, classifier, profiles, constraint,
                         schedule, **kwargs)
    if "seed" in trace.metadata:
        report.metadata["seed"] = trace.metadata["seed"]
    return report


def sweep(trace: Trace | Sequence[SampleWindow], models: Sequence[ModelKind],
          classifier: Classifier, profiles: EnergyProfiles, *,
          predictors: Mapping[ModelKind, Predictor] | None = None,
          include_hybrid: bool = True) -> list[tuple[Configuration, SimReport]]:
    """Run every enumerated configuration on an always-connected link.

    Predictions and classifier outputs are shared across runs. The returned
    configurations carry the measured MAE, mean watch energy and offload
    fraction of their run.
    """
    wins = slice_windows(trace) if isinstance(trace, Trace) else list(trace)
    cache = PredictionCache(wins, predictors if predictors is not None else default_predictors())
    act = [int(classifier(w)) for w in wins]
    out = []
    for config in enumerate_configurations(models, profiles, include_hybrid):
        report = run_windows(wins, None, classifier, profiles, force=config,
                             cache=cache, activity_pred=act)
        measured = Configuration(
            config.simple, config.complex, config.threshold, config.execution,
            avg_mae_bpm=report.mae_bpm if report.mae_bpm is not None else math.nan,
            avg_watch_mj=report.watch_mj_mean,
            offload_fraction=report.offload_fraction,
        )
        out.append((measured, report))
    return out


def sweep_rows(results: Sequence[tuple[Configuration, SimReport]]) -> dict[str, list[Any]]:
    """Measured columns appended to the configuration table schema in sweep CSVs."""
    return {
        "phone_mj_mean": [r.phone_mj_total / r.n_windows if r.n_windows else 0.0
                          for _, r in results],
        "latency_ms_mean": [r.latency_ms_mean for _, r in results],
        "n_windows": [r.n_windows for _, r in results],
        "n_held": [len(r.held_windows) for _, r in results],
    }


def closed_form_hybrid_energy(threshold: int, e_simple: float, e_ble: float,
                              n_activities: int = 9) -> float:
    """Mean watch energy of a Hybrid pair with a perfect classifier and uniform activities."""
    return (threshold / n_activities) * e_simple + ((n_activities - threshold) / n_activities) * e_ble


def activity_mix(wins: Sequence[SampleWindow]) -> np.ndarray:
    return np.bincount([w.activity for w in wins], minlength=10)[1:]
