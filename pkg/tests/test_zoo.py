from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import as_points, brute_force_front, random_configs
from chris.difficulty import oracle_classifier
from chris.energy import default_profiles
from chris.errors import EmptyWindowSet, MissingLabels
from chris.predictors import ModelKind
from chris.signal import synth_window
from chris.zoo import (
    ConfigTable,
    Configuration,
    Execution,
    enumerate_configurations,
    load_table,
    local_front,
    pareto_filter,
    prepare,
    profile,
    read_configs,
    save_table,
    example_table,
    write_configs,
)

AT, SMALL, BIG = ModelKind.AT, ModelKind.SMALL, ModelKind.BIG
PROFILES = default_profiles()


def fake_predictors(errors):
    """Each model returns the reference plus a fixed error."""
    return {kind: (lambda w, e=e: w.hr_ref + e) for kind, e in errors.items()}


def cfg(energy, mae, t=0, ex=Execution.LOCAL, pair=(AT, BIG)):
    return Configuration(pair[0], pair[1], t, ex, mae, energy, 0.0)


class TestEnumerate:
    def test_counts(self):
        assert len(enumerate_configurations()) == 60
        assert len(enumerate_configurations(include_hybrid=False)) == 30
        assert len(enumerate_configurations((AT, BIG))) == 20

    def test_unique_and_roles(self):
        configs = enumerate_configurations()
        assert len({c.key for c in configs}) == 60
        for c in configs:
            assert PROFILES[c.simple].e_board_mj < PROFILES[c.complex].e_board_mj

    def test_invalid(self):
        with pytest.raises(ValueError):
            Configuration(AT, AT, 3, Execution.LOCAL)
        with pytest.raises(ValueError):
            Configuration(AT, BIG, 10, Execution.LOCAL)


@pytest.fixture(scope="module")
def data():
    wins = [synth_window(80.0, a, seed=10 * a + k) for a in range(1, 10) for k in range(4)]
    return prepare(wins, oracle_classifier, fake_predictors({AT: 9.0, SMALL: 3.0, BIG: 1.0}))


class TestProfile:
    def test_all_simple(self, data):
        c = profile(Configuration(AT, BIG, 9, Execution.HYBRID), data, profiles=PROFILES)
        assert c.offload_fraction == 0.0
        assert c.avg_watch_mj == pytest.approx(0.234, abs=1e-12)
        assert c.avg_mae_bpm == pytest.approx(9.0)

    def test_all_offloaded(self, data):
        c = profile(Configuration(AT, BIG, 0, Execution.HYBRID), data, profiles=PROFILES)
        assert c.avg_watch_mj == pytest.approx(0.52, abs=1e-12)
        assert c.offload_fraction == 1.0
        assert c.avg_mae_bpm == pytest.approx(1.0)

    @pytest.mark.parametrize("t", range(10))
    def test_closed_form(self, data, t):
        c = profile(Configuration(AT, BIG, t, Execution.HYBRID), data, profiles=PROFILES)
        assert c.avg_watch_mj == pytest.approx((t / 9) * 0.234 + ((9 - t) / 9) * 0.52, abs=1e-12)
        assert c.avg_mae_bpm == pytest.approx((t * 9.0 + (9 - t) * 1.0) / 9)
        assert c.offload_fraction == pytest.approx((9 - t) / 9)

    def test_threshold_six(self, data):
        c = profile(Configuration(AT, BIG, 6, Execution.HYBRID), data, profiles=PROFILES)
        # 0.156 + 0.17333... = 0.32933..., which rounds to 0.329.
        assert round(c.avg_watch_mj, 3) == 0.329

    def test_local_never_offloads(self, data):
        c = profile(Configuration(SMALL, BIG, 4, Execution.LOCAL), data, profiles=PROFILES)
        assert c.offload_fraction == 0.0
        assert c.avg_watch_mj == pytest.approx((4 * 0.735 + 5 * 41.11) / 9)

    def test_raw_windows(self):
        wins = [synth_window(70.0, a, seed=a) for a in (1, 9)]
        c = profile(Configuration(AT, SMALL, 4, Execution.LOCAL), wins, oracle_classifier,
                    PROFILES, fake_predictors({AT: 2.0, SMALL: -4.0}))
        assert c.avg_mae_bpm == pytest.approx(3.0)

    def test_errors(self):
        with pytest.raises(EmptyWindowSet):
            prepare([], oracle_classifier)
        w = synth_window(70.0, 1, 0)
        unlabelled = type(w)(w.ppg, w.accel, w.activity, None)
        with pytest.raises(MissingLabels):
            prepare([unlabelled], oracle_classifier)


class TestPareto:
    def test_dominated_removed(self):
        front = pareto_filter([cfg(1, 5), cfg(2, 6, t=1)])
        assert as_points(front.rows) == as_points([cfg(1, 5)])

    def test_antichain_kept(self):
        configs = [cfg(1, 5), cfg(2, 4, t=1), cfg(3, 3, t=2)]
        assert len(pareto_filter(configs)) == 3

    def test_duplicates_keep_smallest_key(self):
        front = pareto_filter([cfg(1, 5, t=3), cfg(1, 5, t=2)])
        assert [c.threshold for c in front] == [2]

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(0, 100), st.sampled_from([None, 6, 20]))
    def test_matches_brute_force(self, seed, n, grid):
        configs = random_configs(random.Random(seed), n, grid)
        front = pareto_filter(configs)
        assert as_points(front.rows) == as_points(brute_force_front(configs))
        assert front.is_pareto()

    def test_sixty_random_profiled(self):
        rng = random.Random(5)
        configs = [Configuration(c.simple, c.complex, c.threshold, c.execution,
                                 rng.uniform(1, 40), rng.uniform(0.1, 45), 0.0)
                   for c in enumerate_configurations()]
        assert as_points(pareto_filter(configs).rows) == as_points(brute_force_front(configs))

    def test_unprofiled_rejected(self):
        with pytest.raises(ValueError):
            pareto_filter([Configuration(AT, BIG, 0, Execution.LOCAL)])

    def test_local_front(self):
        configs = [cfg(1, 5, ex=Execution.HYBRID), cfg(2, 6), cfg(3, 4)]
        front = local_front(configs)
        assert all(c.execution is Execution.LOCAL for c in front)
        assert len(front) == 2

    @given(st.integers(0, 2**32 - 1))
    def test_order_independent(self, seed):
        rng = random.Random(seed)
        configs = random_configs(rng, 40, 8)
        shuffled = configs[:]
        rng.shuffle(shuffled)
        assert pareto_filter(configs).rows == pareto_filter(shuffled).rows


class TestTableIO:
    def test_fixture(self):
        t = example_table()
        assert [c.avg_watch_mj for c in t] == [0.87, 0.92, 40.05]
        assert [c.avg_mae_bpm for c in t] == [10.05, 10.11, 5.11]

    def test_roundtrip(self, tmp_path):
        table = pareto_filter(random_configs(random.Random(1), 30), dataset_id="d")
        table.metadata["seed"] = 4
        path = tmp_path / "t.csv"
        save_table(table, path)
        back = load_table(path)
        assert back == table and back.metadata == {"seed": 4}

    def test_nan_written_blank(self, tmp_path):
        path = tmp_path / "c.csv"
        write_configs([cfg(1.0, math.nan)], path)
        assert read_configs(path)[0].avg_mae_bpm is None

    def test_table_sorted(self):
        t = ConfigTable((cfg(3, 1), cfg(1, 3, t=1), cfg(2, 2, t=2)))
        assert [c.avg_watch_mj for c in t] == [1, 2, 3]
