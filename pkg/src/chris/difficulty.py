"""Accelerometer features and the random-forest activity/difficulty classifier.

Four statistics are computed on the accelerometer magnitude
``m[n] = sqrt(ax^2 + ay^2 + az^2)``: mean, energy (mean of squares),
standard deviation and the number of strict sign changes of the discrete
derivative. A forest of 8 CART trees of depth <= 5 maps them to an activity
id in 1..9, which doubles as the window's difficulty level.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple, Union

import numpy as np

from chris.errors import EmptyDataset
from chris.signal import N_ACTIVITIES, SampleWindow, check_activity

N_TREES = 8
MAX_DEPTH = 5
FEATURE_NAMES = ("mean", "energy", "std", "n_peaks")
FOREST_FORMAT = "chris-forest"
FOREST_VERSION = 1


class FeatureVector(NamedTuple):
    mean: float
    energy: float
    std: float
    n_peaks: int


def count_sign_changes(m: np.ndarray) -> int:
    """Indices where the first difference flips strictly from + to - or - to +.

    Zero differences (plateaus) never count.
    """
    d = np.sign(np.diff(np.asarray(m, dtype=np.float64)))
    return int(np.count_nonzero(d[1:] * d[:-1] < 0))


def extract_features(accel: np.ndarray) -> FeatureVector:
    accel = np.asarray(accel, dtype=np.float64)
    if accel.ndim != 2 or accel.shape[0] != 3:
        raise ValueError(f"accel must have shape (3, N), got {accel.shape}")
    m = np.sqrt(np.sum(accel * accel, axis=0))
    return FeatureVector(
        mean=float(m.mean()),
        energy=float(np.mean(m * m)),
        std=float(m.std()),
        n_peaks=count_sign_changes(m),
    )


# -- forest structure -----------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    activity: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: Node
    right: Node


Node = Union[Leaf, Split]


def tree_depth(node: Node) -> int:
    """Number of internal nodes on the longest root-to-leaf path."""
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def tree_predict(node: Node, x: Sequence[float]) -> int:
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.activity


def tree_path_length(node: Node, x: Sequence[float]) -> int:
    steps = 0
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
        steps += 1
    return steps


def _check_tree(node: Node, depth: int, max_depth: int) -> None:
    if isinstance(node, Leaf):
        check_activity(node.activity)
        return
    if depth >= max_depth:
        raise ValueError(f"tree deeper than {max_depth}")
    if not 0 <= node.feature < len(FEATURE_NAMES):
        raise ValueError(f"invalid feature index {node.feature}")
    _check_tree(node.left, depth + 1, max_depth)
    _check_tree(node.right, depth + 1, max_depth)


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[Node, ...]
    max_depth: int = MAX_DEPTH

    def __post_init__(self) -> None:
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) != N_TREES:
            raise ValueError(f"a forest has exactly {N_TREES} trees, got {len(self.trees)}")
        for tree in self.trees:
            _check_tree(tree, 0, self.max_depth)

    def votes(self, f: Sequence[float]) -> list[int]:
        return [tree_predict(t, f) for t in self.trees]

    def __call__(self, window: SampleWindow) -> int:
        return rf_predict(self, extract_features(window.accel))


def majority_vote(labels: Sequence[int]) -> int:
    """Most frequent label; ties resolve to the highest label."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=N_ACTIVITIES + 1)
    return int(len(counts) - 1 - np.argmax(counts[::-1]))


def rf_predict(forest: RandomForest, f: Sequence[float]) -> int:
    return majority_vote(forest.votes(f))


Classifier = Callable[[SampleWindow], int]


def oracle_classifier(window: SampleWindow) -> int:
    """Perfect classifier returning the window's labelled activity."""
    return window.activity


# -- training -------------------------------------------------------------------


def _gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray) -> tuple[int, float, float] | None:
    """Lowest weighted Gini split over ``features``; ``None`` if nothing improves."""
    n = len(y)
    parent = float(_gini(np.bincount(y, minlength=N_ACTIVITIES + 1)[None, :])[0])
    best: tuple[int, float, float] | None = None
    best_score = parent - 1e-12
    onehot = np.eye(N_ACTIVITIES + 1, dtype=np.int64)[y]
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = left[-1] + onehot[order[-1]] - left
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        n_left = np.arange(1, n)
        score = (n_left * _gini(left) + (n - n_left) * _gini(right)) / n
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score:
            best_score = float(score[i])
            best = (int(f), float((xs[i] + xs[i + 1]) / 2.0), best_score)
    return best


def _grow(X: np.ndarray, y: np.ndarray, depth: int, max_depth: int,
          n_sub: int, rng: np.random.Generator) -> Node:
    if depth >= max_depth or len(np.unique(y)) == 1 or len(y) < 2:
        return Leaf(majority_vote(y))
    order = rng.permutation(X.shape[1])
    split = _best_split(X, y, np.sort(order[:n_sub]))
    if split is None:
        # No valid partition on the sampled features: look at the rest.
        split = _best_split(X, y, np.sort(order[n_sub:]))
    if split is None:
        return Leaf(majority_vote(y))
    f, thr, _ = split
    mask = X[:, f] <= thr
    return Split(
        feature=f,
        threshold=thr,
        left=_grow(X[mask], y[mask], depth + 1, max_depth, n_sub, rng),
        right=_grow(X[~mask], y[~mask], depth + 1, max_depth, n_sub, rng),
    )


def rf_train(dataset: Sequence[tuple[Sequence[float], int]], trees: int = N_TREES,
             max_depth: int = MAX_DEPTH, seed: int = 0,
             max_features: int = 2) -> RandomForest:
    """Bagged CART (Gini) with ``max_features`` features tried per split.

    When none of the sampled features can separate a node, the remaining
    features are searched before giving up and emitting a leaf.

    Each tree draws a bootstrap sample; tree ``i`` uses its own child
    generator spawned from ``seed`` so the result is deterministic.
    """
    if not dataset:
        raise EmptyDataset("cannot train a forest on an empty dataset")
    X = np.array([list(map(float, f)) for f, _ in dataset], dtype=np.float64)
    y = np.array([check_activity(a) for _, a in dataset], dtype=np.int64)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trees)]
    grown = []
    for rng in rngs:
        idx = rng.integers(0, len(y), size=len(y))
        grown.append(_grow(X[idx], y[idx], 0, max_depth, max_features, rng))
    return RandomForest(trees=tuple(grown), max_depth=max_depth)


def window_dataset(windows: Sequence[SampleWindow]) -> list[tuple[FeatureVector, int]]:
    return [(extract_features(w.accel), w.activity) for w in windows]


def easy_hard_accuracy(forest: RandomForest,
                       dataset: Sequence[tuple[Sequence[float], int]], threshold: int) -> float:
    """Accuracy of the binary decision ``activity <= threshold``."""
    hits = sum((rf_predict(forest, f) <= threshold) == (a <= threshold) for f, a in dataset)
    return hits / len(dataset)


# -- serialization ----------------------------------------------------------------


def _node_to_dict(node: Node) -> dict[str, Any]:
    if isinstance(node, Leaf):
        return {"leaf": node.activity}
    return {
        "feature": node.feature,
        "feature_name": FEATURE_NAMES[node.feature],
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict[str, Any]) -> Node:
    if "leaf" in d:
        return Leaf(int(d["leaf"]))
    return Split(int(d["feature"]), float(d["threshold"]),
                 _node_from_dict(d["left"]), _node_from_dict(d["right"]))


def forest_to_dict(forest: RandomForest) -> dict[str, Any]:
    """Versioned JSON document.

    Internal nodes are ``{"feature", "feature_name", "threshold", "left",
    "right"}`` and route left when ``x[feature] <= threshold``; leaves are
    ``{"leaf": activity}``. The forest output is the majority vote with ties
    going to the higher activity.
    """
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "features": list(FEATURE_NAMES),
        "max_depth": forest.max_depth,
        "trees": [_node_to_dict(t) for t in forest.trees],
    }


def forest_from_dict(d: dict[str, Any]) -> RandomForest:
    if d.get("format") != FOREST_FORMAT or d.get("version") != FOREST_VERSION:
        raise ValueError("not a supported forest document")
    return RandomForest(trees=tuple(_node_from_dict(t) for t in d["trees"]),
                        max_depth=int(d.get("max_depth", MAX_DEPTH)))


def forest_to_json(forest: RandomForest) -> str:
    return json.dumps(forest_to_dict(forest), indent=1, sort_keys=True) + "\n"


def save_forest(forest: RandomForest, path: str | Path) -> None:
    Path(path).write_text(forest_to_json(forest), encoding="utf-8")


def load_forest(path: str | Path) -> RandomForest:
    return forest_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
