"""Random forest of axis-aligned Gini trees, built from scratch.

Each tree trains on a bootstrap resample; at every node the best split is
searched over a random subset of the features. Candidate thresholds come
from per-feature quantile bins computed once per forest (64 bins), which
keeps node evaluation O(n) instead of O(n log n) at desk-scale data sizes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..seeds import substream


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    features_per_split: int = 2
    n_bins: int = 64


@dataclass
class Tree:
    """Flat array representation: node i splits on feature[i] at threshold[i]."""

    feature: np.ndarray  # int, -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_label: np.ndarray  # -1 for internal nodes

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        active = self.leaf_label[node] < 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            goes_left = x[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(goes_left, self.left[cur], self.right[cur])
            active = self.leaf_label[node] < 0
        return self.leaf_label[node]


@dataclass
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    seed: int

    def as_dict(self) -> dict:
        return {
            "kind": "forest",
            "version": 1,
            "seed": self.seed,
            "params": self.params.__dict__,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "leaf_label": t.leaf_label.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestModel":
        trees = [
            Tree(
                np.asarray(t["feature"], dtype=np.int64),
                np.asarray(t["threshold"], dtype=float),
                np.asarray(t["left"], dtype=np.int64),
                np.asarray(t["right"], dtype=np.int64),
                np.asarray(t["leaf_label"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        return cls(trees, ForestParams(**doc["params"]), int(doc["seed"]))


def _best_split_on_feature(codes: np.ndarray, y: np.ndarray, n_bins: int, min_leaf: int) -> tuple[float, int]:
    """Best Gini impurity and bin index for one feature's binned codes.

    Returns (weighted_gini, edge_bin); edge_bin < 0 when no valid split
    satisfies the min_leaf constraint on both sides.
    """
    joint = np.bincount(codes * 2 + y, minlength=2 * n_bins)
    per_bin = joint.reshape(n_bins, 2)
    left = per_bin.cumsum(axis=0)[:-1]  # counts with code <= edge, per class
    total = per_bin.sum(axis=0)
    right = total - left
    nl = left.sum(axis=1)
    nr = right.sum(axis=1)
    valid = (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return np.inf, -1
    n = nl + nr
    with np.errstate(invalid="ignore", divide="ignore"):
        gini_l = 1.0 - (left.astype(float) ** 2).sum(axis=1) / np.maximum(nl, 1) ** 2
        gini_r = 1.0 - (right.astype(float) ** 2).sum(axis=1) / np.maximum(nr, 1) ** 2
        weighted = (nl * gini_l + nr * gini_r) / n
    weighted[~valid] = np.inf
    best = int(np.argmin(weighted))
    return float(weighted[best]), best


def _majority(y: np.ndarray) -> int:
    counts = np.bincount(y, minlength=2)
    return int(counts.argmax())


def _grow_tree(
    x_codes: np.ndarray,
    edges: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
) -> Tree:
    n_features = x_codes.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_label: list[int] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_label.append(-1)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, rows, depth = stack.pop()
        labels = y[rows]
        if (
            depth >= params.max_depth
            or len(rows) < 2 * params.min_leaf
            or labels.min() == labels.max()
        ):
            leaf_label[node] = _majority(labels)
            continue
        candidates = rng.choice(n_features, size=min(params.features_per_split, n_features), replace=False)
        best_gini, best_feat, best_edge = np.inf, -1, -1
        for f in candidates:
            gini, edge = _best_split_on_feature(x_codes[rows, f], labels, params.n_bins, params.min_leaf)
            if gini < best_gini:
                best_gini, best_feat, best_edge = gini, int(f), edge
        if best_edge < 0:
            leaf_label[node] = _majority(labels)
            continue
        goes_left = x_codes[rows, best_feat] <= best_edge
        feature[node] = best_feat
        threshold[node] = float(edges[best_feat, best_edge])
        left_child = new_node()
        right_child = new_node()
        left[node] = left_child
        right[node] = right_child
        stack.append((right_child, rows[~goes_left], depth + 1))
        stack.append((left_child, rows[goes_left], depth + 1))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(leaf_label, dtype=np.int64),
    )


def forest_train(
    train_x: np.ndarray,
    train_y: np.ndarray,
    params: ForestParams = ForestParams(),
    seed: int = 0,
) -> ForestModel:
    """Train a forest on labeled feature vectors (labels 0/1)."""
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("forest training needs at least two classes")
    n, n_features = x.shape

    # shared quantile bin edges; threshold candidates are edge values
    qs = np.linspace(0.0, 1.0, params.n_bins + 1)[1:-1]
    edges = np.quantile(x, qs, axis=0).T  # (features, n_bins - 1)
    codes = np.empty_like(x, dtype=np.int32)
    for f in range(n_features):
        codes[:, f] = np.searchsorted(edges[f], x[:, f], side="left")

    rng = substream(seed, "forest")
    trees = []
    for _ in range(params.tree_count):
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(codes[boot], edges, y[boot], params, rng))
    return ForestModel(trees, params, seed)


def forest_classify_batch(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Majority vote over trees; a tie goes to the smaller class index."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    votes = np.zeros(len(x), dtype=np.int64)
    for tree in model.trees:
        votes += tree.predict(x)
    return (votes * 2 > len(model.trees)).astype(np.int64)


def forest_classify(model: ForestModel, x: np.ndarray) -> int:
    return int(forest_classify_batch(model, x)[0])
