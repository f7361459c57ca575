from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chris.errors import NoPeaks
from chris.predictors.at import (
    HR_CEIL,
    HR_FLOOR,
    ROLLING,
    at_predict,
    clamp_hr,
    find_peaks,
    regions_of_interest,
    rolling_mean,
)
from chris.signal import FS, WINDOW, synth_window


def sinusoid(hz: float, phase: float = 0.0) -> np.ndarray:
    return np.sin(2 * np.pi * hz * np.arange(WINDOW) / FS + phase)


def scan_peaks(x: np.ndarray, width: int = ROLLING) -> list[int]:
    """Loop-based reference: per-sample truncated mean, runs above it, argmax per run."""
    n = len(x)
    mean = [sum(x[max(0, i - width // 2) : min(n, i + width - width // 2)])
            / (min(n, i + width - width // 2) - max(0, i - width // 2)) for i in range(n)]
    peaks, i = [], 0
    while i < n:
        if x[i] > mean[i]:
            j = i
            while j < n and x[j] > mean[j]:
                j += 1
            peaks.append(i + int(np.argmax(x[i:j])))
            i = j
        else:
            i += 1
    return peaks


class TestPeaks:
    def test_rolling_mean_matches_loop(self):
        x = np.random.default_rng(0).standard_normal(50)
        ref = [np.mean(x[max(0, i - 12) : min(50, i + 12)]) for i in range(50)]
        np.testing.assert_allclose(rolling_mean(x), ref, rtol=0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_find_peaks_matches_scan(self, seed):
        x = np.random.default_rng(seed).standard_normal(WINDOW).cumsum()
        assert find_peaks(x).tolist() == scan_peaks(x)

    def test_regions_are_disjoint_and_above_mean(self):
        x = sinusoid(1.5)
        mean = rolling_mean(x)
        prev = 0
        for start, stop in regions_of_interest(x):
            assert prev <= start < stop
            assert np.all(x[start:stop] > mean[start:stop])
            prev = stop

    def test_peaks_every_16_samples_at_2hz(self):
        peaks = scan_peaks(sinusoid(2.0))
        assert set(np.diff(peaks)) == {16}


class TestAtPredict:
    @pytest.mark.parametrize("hz, bpm", [(2.0, 120.0), (1.0, 60.0)])
    def test_clean_sinusoid(self, hz, bpm):
        assert at_predict(sinusoid(hz)) == pytest.approx(bpm, abs=1.0)

    def test_constant_signal(self):
        with pytest.raises(NoPeaks):
            at_predict(np.ones(WINDOW))

    def test_single_bump(self):
        x = np.zeros(WINDOW)
        x[100] = 1.0
        with pytest.raises(NoPeaks):
            at_predict(x)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            at_predict(np.zeros(100))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(40.0, 200.0), st.floats(0.0, 2 * np.pi))
    def test_clean_error_small(self, bpm, phase):
        assert abs(at_predict(sinusoid(bpm / 60.0, phase)) - bpm) <= 2.0

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=WINDOW, max_size=WINDOW))
    def test_output_in_open_range(self, values):
        try:
            hr = at_predict(np.array(values))
        except NoPeaks:
            return
        assert 20.0 < hr < 300.0

    def test_clamp(self):
        assert clamp_hr(5.0) == HR_FLOOR > 20.0
        assert clamp_hr(1e6) == HR_CEIL < 300.0
        assert clamp_hr(80.0) == 80.0

    def test_noise_raises_error(self):
        def mae(activity):
            errs = [abs(at_predict(synth_window(hr, activity, s).ppg) - hr)
                    for s, hr in enumerate(np.linspace(50, 180, 40))]
            return float(np.mean(errs))

        assert mae(9) > mae(5) > mae(1)


class TestInvariance:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.floats(-50.0, 50.0))
    def test_affine_invariance(self, seed, a, c):
        rng = np.random.default_rng(seed)
        x = sinusoid(rng.uniform(0.8, 3.0), rng.uniform(0, 6.28)) + 0.2 * rng.standard_normal(WINDOW)
        try:
            hr = at_predict(x)
        except NoPeaks:
            with pytest.raises(NoPeaks):
                at_predict(a * x + c)
            return
        assert at_predict(a * x + c) == pytest.approx(hr, rel=1e-9)
