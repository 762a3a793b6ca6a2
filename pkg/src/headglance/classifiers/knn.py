"""k-nearest-neighbor classifier on normalized rotation features.

Distances are Euclidean; z-scored inputs make that scale-fair. Neighbor
search uses a k-d tree, which at 3 dimensions is exact and much faster
than a full scan.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_K = 5


@dataclass
class KnnModel:
    train_x: np.ndarray  # (n, 3)
    train_y: np.ndarray  # (n,) small ints
    k: int = DEFAULT_K
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"k must be an odd positive integer, got {self.k}")
        if self.k > len(self.train_x):
            raise ValueError(f"k={self.k} exceeds training size {len(self.train_x)}")

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            object.__setattr__(self, "_tree", cKDTree(self.train_x))
        return self._tree

    def as_dict(self) -> dict:
        return {
            "kind": "knn",
            "version": 1,
            "k": self.k,
            "train_x": self.train_x.tolist(),
            "train_y": self.train_y.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KnnModel":
        return cls(
            np.asarray(doc["train_x"], dtype=float),
            np.asarray(doc["train_y"], dtype=np.int64),
            k=int(doc["k"]),
        )


def train_knn(train_x: np.ndarray, train_y: np.ndarray, k: int = DEFAULT_K) -> KnnModel:
    return KnnModel(np.asarray(train_x, dtype=float), np.asarray(train_y, dtype=np.int64), k=k)


def knn_classify_batch(model: KnnModel, x: np.ndarray) -> np.ndarray:
    """Majority label among the k nearest training points, per query row."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _, idx = model.tree.query(x, k=model.k)
    idx = np.atleast_2d(idx)
    neighbor_labels = model.train_y[idx]
    n_classes = int(model.train_y.max()) + 1
    counts = np.stack(
        [(neighbor_labels == c).sum(axis=1) for c in range(n_classes)], axis=1
    )
    return counts.argmax(axis=1)


def knn_classify(model: KnnModel, x: np.ndarray) -> int:
    return int(knn_classify_batch(model, x)[0])
