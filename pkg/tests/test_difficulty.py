from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chris.difficulty import (
    N_TREES,
    Leaf,
    RandomForest,
    Split,
    count_sign_changes,
    easy_hard_accuracy,
    extract_features,
    forest_to_json,
    load_forest,
    majority_vote,
    rf_predict,
    rf_train,
    save_forest,
    tree_depth,
    tree_predict,
    window_dataset,
)
from chris.errors import EmptyDataset
from chris.signal import WINDOW, synth_trace, windows


def loop_sign_changes(m):
    count = 0
    for i in range(1, len(m) - 1):
        a, b = m[i] - m[i - 1], m[i + 1] - m[i]
        if (a > 0 and b < 0) or (a < 0 and b > 0):
            count += 1
    return count


def reference_vote(labels):
    counts = Counter(labels)
    top = max(counts.values())
    return max(label for label, c in counts.items() if c == top)


class TestFeatures:
    def test_zero_accel(self):
        assert tuple(extract_features(np.zeros((3, WINDOW)))) == (0.0, 0.0, 0.0, 0)

    def test_constant_accel(self):
        accel = np.zeros((3, WINDOW))
        accel[0] = 1.0
        assert tuple(extract_features(accel)) == (1.0, 1.0, 0.0, 0)

    def test_alternating_derivative(self):
        m = np.tile([0.0, 1.0], WINDOW // 2)
        assert count_sign_changes(m) == 254 == loop_sign_changes(m)

    @given(st.lists(st.integers(-3, 3), min_size=0, max_size=60))
    def test_sign_changes_match_loop(self, values):
        m = np.array(values, dtype=float)
        assert count_sign_changes(m) == loop_sign_changes(m)

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            extract_features(np.zeros((2, WINDOW)))


class TestForest:
    def test_single_leaf_trees(self):
        forest = RandomForest(tuple(Leaf(3) for _ in range(N_TREES)))
        assert rf_predict(forest, (0.0, 0.0, 0.0, 0)) == 3

    def test_tie_goes_to_higher(self):
        forest = RandomForest(tuple(Leaf(2) for _ in range(4)) + tuple(Leaf(7) for _ in range(4)))
        assert rf_predict(forest, (0.0, 0.0, 0.0, 0)) == 7

    @given(st.lists(st.integers(1, 9), min_size=1, max_size=20))
    def test_majority_matches_counter(self, labels):
        assert majority_vote(labels) == reference_vote(labels)

    def test_tree_count_and_depth_enforced(self):
        with pytest.raises(ValueError):
            RandomForest((Leaf(1),) * 7)
        deep: Leaf | Split = Leaf(1)
        for _ in range(6):
            deep = Split(0, 0.5, deep, Leaf(2))
        with pytest.raises(ValueError):
            RandomForest((deep,) * N_TREES)

    def test_routing_is_inclusive_left(self):
        tree = Split(1, 2.0, Leaf(1), Leaf(9))
        assert tree_predict(tree, (0, 2.0, 0, 0)) == 1
        assert tree_predict(tree, (0, 2.0001, 0, 0)) == 9


class TestTraining:
    def test_single_class(self):
        rng = np.random.default_rng(0)
        data = [(tuple(rng.random(4)), 4) for _ in range(30)]
        forest = rf_train(data)
        assert all(isinstance(t, Leaf) and t.activity == 4 for t in forest.trees)

    def test_separable_two_class(self):
        rng = np.random.default_rng(1)
        data = [((0.0, float(e), 0.0, 0), 1) for e in rng.uniform(0.0, 0.99, 50)]
        data += [((0.0, float(e), 0.0, 0), 8) for e in rng.uniform(2.0, 3.0, 50)]
        forest = rf_train(data, seed=3)
        assert all(rf_predict(forest, f) == a for f, a in data)

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            rf_train([])

    def test_deterministic(self):
        data = window_dataset(windows(synth_trace(range(1, 10), 4, 80.0, seed=2)))
        assert forest_to_json(rf_train(data, seed=5)) == forest_to_json(rf_train(data, seed=5))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_shape_and_range(self, seed):
        rng = np.random.default_rng(seed)
        data = [(tuple(rng.normal(size=4)), int(rng.integers(1, 10))) for _ in range(60)]
        forest = rf_train(data, seed=seed)
        assert len(forest.trees) == 8
        assert all(tree_depth(t) <= 5 for t in forest.trees)
        for f, _ in data:
            assert 1 <= rf_predict(forest, f) <= 9

    def test_easy_hard_accuracy(self, forest):
        test = window_dataset(windows(synth_trace(range(1, 10), 30, 80.0, seed=99)))
        for t in range(1, 9):
            assert easy_hard_accuracy(forest, test, t) > 0.9

    def test_json_roundtrip(self, forest, tmp_path):
        path = tmp_path / "forest.json"
        save_forest(forest, path)
        assert load_forest(path) == forest
        assert path.read_text() == forest_to_json(forest)
