"""Adaptive-threshold (rolling mean) heart-rate estimator."""

from __future__ import annotations

import numpy as np

from chris.errors import NoPeaks
from chris.signal import FS, WINDOW

ROLLING = 24

HR_FLOOR = float(np.nextafter(20.0, np.inf))
HR_CEIL = float(np.nextafter(300.0, -np.inf))


def clamp_hr(bpm: float) -> float:
    """Clamp an estimate into the open physiological range (20, 300) BPM."""
    return float(min(max(bpm, HR_FLOOR), HR_CEIL))


def rolling_mean(x: np.ndarray, width: int = ROLLING) -> np.ndarray:
    """Centred moving average, truncated at the edges.

    Sample ``n`` averages ``x[n - width//2 : n + width - width//2]`` clipped to
    the array bounds.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(n)
    lo = np.clip(idx - width // 2, 0, n)
    hi = np.clip(idx + width - width // 2, 0, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def regions_of_interest(x: np.ndarray, width: int = ROLLING) -> list[tuple[int, int]]:
    """Maximal half-open runs ``[start, stop)`` where the signal exceeds its rolling mean."""
    above = np.asarray(x) > rolling_mean(x, width)
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def find_peaks(x: np.ndarray, width: int = ROLLING) -> np.ndarray:
    """Index of the maximum of each region of interest."""
    x = np.asarray(x, dtype=np.float64)
    return np.array(
        [start + int(np.argmax(x[start:stop])) for start, stop in regions_of_interest(x, width)],
        dtype=np.int64,
    )


def refine_peaks(x: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Sub-sample peak positions from a parabola through each peak and its neighbours.

    Peaks on the array edge, or without a strict local curvature, stay put.
    """
    x = np.asarray(x, dtype=np.float64)
    pos = peaks.astype(np.float64)
    inner = (peaks > 0) & (peaks < len(x) - 1)
    i = peaks[inner]
    left, mid, right = x[i - 1], x[i], x[i + 1]
    curv = left - 2.0 * mid + right
    ok = curv < 0
    shift = np.zeros_like(mid)
    shift[ok] = 0.5 * (left[ok] - right[ok]) / curv[ok]
    pos[inner] += np.clip(shift, -0.5, 0.5)
    return pos


def at_predict(ppg: np.ndarray, fs: int = FS) -> float:
    """Estimate heart rate (BPM) from one PPG window.

    Peaks are the maxima of each region above the 24-sample rolling mean,
    refined to sub-sample precision; the rate comes from the median spacing
    of consecutive peaks.
    """
    ppg = np.asarray(ppg, dtype=np.float64)
    if ppg.shape != (WINDOW,):
        raise ValueError(f"expected {WINDOW} PPG samples, got shape {ppg.shape}")
    peaks = find_peaks(ppg)
    if len(peaks) < 2:
        raise NoPeaks(f"found {len(peaks)} peak(s), need at least 2")
    gap = float(np.median(np.diff(refine_peaks(ppg, peaks))))
    return clamp_hr(60.0 * fs / gap)
