"""Synthetic PPG/accelerometer traces, CSV ingestion and sliding windows.

Traces are sampled at 32 Hz and cut into 256-sample windows (8 s) with a
64-sample stride (2 s). Synthetic data stands in for a labelled wrist
dataset: the PPG is a unit sinusoid at the heart rate plus Gaussian
motion-artifact noise, and the accelerometer is zero-mean noise whose
power grows with the activity id.

All generators use ``numpy.random.default_rng`` (PCG64) seeded from the
caller's integer seed; the seed is stored in ``Trace.metadata``.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from chris.errors import InvalidHr, MissingColumn, ParseError, TraceTooShort

FS = 32
WINDOW = 256
STRIDE = 64
N_ACTIVITIES = 9
HR_MIN = 20.0
HR_MAX = 300.0

CSV_COLUMNS = ("t", "ppg", "ax", "ay", "az", "activity", "hr_ref")

ActivityId = int


def check_activity(activity: int) -> int:
    if isinstance(activity, bool) or int(activity) != activity:
        raise ValueError(f"activity must be an integer, got {activity!r}")
    activity = int(activity)
    if not 1 <= activity <= N_ACTIVITIES:
        raise ValueError(f"activity must be in 1..{N_ACTIVITIES}, got {activity}")
    return activity


def check_hr(hr_bpm: float) -> float:
    hr_bpm = float(hr_bpm)
    if not HR_MIN < hr_bpm < HR_MAX:
        raise InvalidHr(f"heart rate {hr_bpm} BPM outside ({HR_MIN}, {HR_MAX})")
    return hr_bpm


def ppg_noise_std(activity: int) -> float:
    """Motion-artifact noise level added to the unit-amplitude PPG."""
    return 0.05 * (activity - 1)


def accel_noise_std(activity: int) -> float:
    """Per-axis accelerometer noise level."""
    return 0.1 * activity


def _frozen(a: Any, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleWindow:
    """One 8 s slice: PPG, 3-axis accelerometer, activity and reference HR."""

    ppg: np.ndarray
    accel: np.ndarray
    activity: ActivityId
    hr_ref: float | None = None
    fs: int = FS

    def __post_init__(self) -> None:
        ppg = _frozen(self.ppg)
        accel = _frozen(self.accel)
        if ppg.shape != (WINDOW,):
            raise ValueError(f"ppg must have shape ({WINDOW},), got {ppg.shape}")
        if accel.shape != (3, WINDOW):
            raise ValueError(f"accel must have shape (3, {WINDOW}), got {accel.shape}")
        if self.fs != FS:
            raise ValueError(f"sampling rate must be {FS} Hz, got {self.fs}")
        object.__setattr__(self, "ppg", ppg)
        object.__setattr__(self, "accel", accel)
        object.__setattr__(self, "activity", check_activity(self.activity))
        if self.hr_ref is not None:
            object.__setattr__(self, "hr_ref", check_hr(self.hr_ref))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleWindow):
            return NotImplemented
        return (
            self.activity == other.activity
            and self.hr_ref == other.hr_ref
            and np.array_equal(self.ppg, other.ppg)
            and np.array_equal(self.accel, other.accel)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Trace:
    """Time-ordered rows of ``t, ppg, ax, ay, az, activity, hr_ref``.

    ``hr_ref`` holds NaN where the reference is unknown.
    """

    t: np.ndarray
    ppg: np.ndarray
    accel: np.ndarray
    activity: np.ndarray
    hr_ref: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    fs: int = FS

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", _frozen(self.t))
        object.__setattr__(self, "ppg", _frozen(self.ppg))
        object.__setattr__(self, "accel", _frozen(self.accel))
        object.__setattr__(self, "activity", _frozen(self.activity, np.int64))
        object.__setattr__(self, "hr_ref", _frozen(self.hr_ref))
        n = len(self.t)
        if self.accel.shape != (3, n):
            raise ValueError(f"accel must have shape (3, {n}), got {self.accel.shape}")
        for name in ("ppg", "activity", "hr_ref"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has a different length than t")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.t, other.t)
            and np.array_equal(self.ppg, other.ppg)
            and np.array_equal(self.accel, other.accel)
            and np.array_equal(self.activity, other.activity)
            and np.array_equal(self.hr_ref, other.hr_ref, equal_nan=True)
        )

    __hash__ = None  # type: ignore[assignment]


def synth_window(hr_bpm: float, activity: ActivityId, seed: int) -> SampleWindow:
    """Generate one deterministic synthetic window.

    The PPG is ``sin(2*pi*f*n/32) + 0.05*(a-1)*g[n]`` with ``f = hr/60`` and
    ``g`` standard normal; each accelerometer axis is ``0.1*a`` times standard
    normal noise. The PPG noise is drawn first, then the (3, 256) accel block.
    """
    hr_bpm = check_hr(hr_bpm)
    activity = check_activity(activity)
    rng = np.random.default_rng(seed)
    n = np.arange(WINDOW)
    ppg = np.sin(2.0 * np.pi * (hr_bpm / 60.0) * n / FS)
    ppg = ppg + ppg_noise_std(activity) * rng.standard_normal(WINDOW)
    accel = accel_noise_std(activity) * rng.standard_normal((3, WINDOW))
    return SampleWindow(ppg=ppg, accel=accel, activity=activity, hr_ref=hr_bpm)


def segment_lengths(n_segments: int, windows_per_segment: int) -> list[int]:
    """Row counts that give every segment exactly ``windows_per_segment`` windows.

    Windows are labelled by majority with ties going to the later segment, so a
    window belongs to the segment holding its rows 128..255 (or a 128/128 split
    resolved upward). Padding the first segment by 128 rows and the last by 64
    aligns the labels so the total window count is ``n_segments * W``.
    """
    if n_segments < 1 or windows_per_segment < 1:
        raise ValueError("need at least one segment and one window per segment")
    if n_segments > 1 and windows_per_segment < 2:
        # A 64-row segment never holds the majority of a 256-row window.
        raise ValueError("multi-segment traces need at least 2 windows per segment")
    body = STRIDE * windows_per_segment
    if n_segments == 1:
        return [body + WINDOW - STRIDE]
    lengths = [body] * n_segments
    lengths[0] += WINDOW // 2
    lengths[-1] += STRIDE
    return lengths


def synth_trace(
    activities: Sequence[int],
    windows_per_activity: int,
    hr_bpm: float | Sequence[float],
    seed: int,
) -> Trace:
    """Concatenate one synthetic segment per entry of ``activities``.

    ``hr_bpm`` is a single rate or one rate per segment. The PPG phase is
    continuous across segment boundaries.
    """
    activities = [check_activity(a) for a in activities]
    if not activities:
        raise ValueError("at least one activity segment is required")
    if np.ndim(hr_bpm) == 0:
        rates = [check_hr(hr_bpm)] * len(activities)
    else:
        rates = [check_hr(h) for h in hr_bpm]  # type: ignore[union-attr]
        if len(rates) != len(activities):
            raise ValueError("hr_bpm must be a scalar or have one value per segment")

    lengths = segment_lengths(len(activities), windows_per_activity)
    act = np.repeat(activities, lengths)
    hr = np.repeat(rates, lengths).astype(np.float64)
    n = len(act)
    rng = np.random.default_rng(seed)
    phase = 2.0 * np.pi * np.concatenate(([0.0], np.cumsum(hr[:-1] / 60.0 / FS)))
    alpha = np.array([ppg_noise_std(a) for a in act])
    beta = np.array([accel_noise_std(a) for a in act])
    ppg = np.sin(phase) + alpha * rng.standard_normal(n)
    accel = beta * rng.standard_normal((3, n))
    metadata = {
        "generator": "numpy.random.default_rng(PCG64)",
        "seed": int(seed),
        "activities": activities,
        "windows_per_activity": int(windows_per_activity),
        "hr_bpm": rates,
        "segment_rows": lengths,
    }
    return Trace(
        t=np.arange(n) / FS,
        ppg=ppg,
        accel=accel,
        activity=act,
        hr_ref=hr,
        metadata=metadata,
    )


def window_count(n_rows: int) -> int:
    if n_rows < WINDOW:
        return 0
    return (n_rows - WINDOW) // STRIDE + 1


def _majority(labels: np.ndarray) -> int:
    counts = np.bincount(labels, minlength=N_ACTIVITIES + 1)
    # Reverse scan so that ties resolve to the higher (harder) activity.
    return int(len(counts) - 1 - np.argmax(counts[::-1]))


def windows(trace: Trace) -> list[SampleWindow]:
    """Slice a trace into 256-row windows with a 64-row stride."""
    n = len(trace)
    if n < WINDOW:
        raise TraceTooShort(f"trace has {n} rows, need at least {WINDOW}")
    out = []
    for k in range(window_count(n)):
        sl = slice(STRIDE * k, STRIDE * k + WINDOW)
        ref = trace.hr_ref[sl]
        hr = float(np.mean(ref[~np.isnan(ref)])) if not np.all(np.isnan(ref)) else None
        out.append(
            SampleWindow(
                ppg=trace.ppg[sl],
                accel=trace.accel[:, sl],
                activity=_majority(trace.activity[sl]),
                hr_ref=hr,
            )
        )
    return out


def _metadata_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def save_trace(trace: Trace, path: str | Path) -> None:
    """Write a trace as CSV, plus a ``<name>.meta.json`` sidecar if it has metadata."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(trace)):
            hr = trace.hr_ref[i]
            writer.writerow(
                [
                    repr(float(trace.t[i])),
                    repr(float(trace.ppg[i])),
                    repr(float(trace.accel[0, i])),
                    repr(float(trace.accel[1, i])),
                    repr(float(trace.accel[2, i])),
                    int(trace.activity[i]),
                    "" if math.isnan(hr) else repr(float(hr)),
                ]
            )
    if trace.metadata:
        _metadata_path(path).write_text(
            json.dumps(trace.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, column, f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(row, column, f"not finite: {text!r}")
    return value


def load_trace(path: str | Path) -> Trace:
    """Read a trace CSV with header ``t,ppg,ax,ay,az,activity,hr_ref``.

    Extra columns are ignored. Raises :class:`MissingColumn` for an absent
    required column and :class:`ParseError` (0-based data row, column) for a
    malformed value, an activity outside 1..9, an ``hr_ref`` outside (20, 300),
    or timestamps that are not increasing in steps of 1/32 s.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in CSV_COLUMNS:
            if col not in header:
                raise MissingColumn(f"{path}: missing column {col!r}")
        rows = list(reader)

    n = len(rows)
    t = np.empty(n)
    ppg = np.empty(n)
    accel = np.empty((3, n))
    act = np.empty(n, dtype=np.int64)
    hr = np.full(n, np.nan)
    for i, row in enumerate(rows):
        if None in row.values():
            raise ParseError(i, "activity" if row.get("activity") is None else "hr_ref",
                             "row has too few fields")
        t[i] = _parse_float(row["t"], i, "t")
        if i and abs(t[i] - t[i - 1] - 1.0 / FS) > 1e-4:
            raise ParseError(i, "t", f"expected step 1/{FS} s")
        ppg[i] = _parse_float(row["ppg"], i, "ppg")
        for j, col in enumerate(("ax", "ay", "az")):
            accel[j, i] = _parse_float(row[col], i, col)
        try:
            act[i] = check_activity(int(row["activity"]))
        except ValueError:
            raise ParseError(i, "activity", f"invalid activity {row['activity']!r}") from None
        text = row["hr_ref"].strip()
        if text:
            value = _parse_float(text, i, "hr_ref")
            if not HR_MIN < value < HR_MAX:
                raise ParseError(i, "hr_ref", f"{value} BPM out of range")
            hr[i] = value

    meta_path = _metadata_path(path)
    metadata = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    return Trace(t=t, ppg=ppg, accel=accel, activity=act, hr_ref=hr, metadata=metadata)
