"""Normalization, subject-wise Monte-Carlo splitting, and class balancing.

The evaluation protocol partitions *subjects*, never samples: a held-out
driver contributes no frames to training. Normalization is a z-score per
rotation variable computed over the training pool; balancing subsamples
the majority class down to the minority count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GlanceRegion
from .seeds import substream


@dataclass(frozen=True)
class NormalizationParams:
    """Per-variable mean and population standard deviation (rot_x, rot_y, rot_z)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if np.any(self.std <= 0):
            raise ValueError("normalization requires positive variance in every rotation variable")


@dataclass(frozen=True)
class SplitPlan:
    """Monte-Carlo plan: how many iterations, what train share, which seed."""

    iteration_count: int = 50
    train_fraction: float = 0.8
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.iteration_count < 1:
            raise ValueError(f"iteration_count must be >= 1, got {self.iteration_count}")


def fit_normalizer(train: Dataset) -> NormalizationParams:
    """Compute z-score parameters over all training samples pooled across subjects."""
    if len(train) == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    mean = train.rotations.mean(axis=0)
    std = train.rotations.std(axis=0)  # population convention (divide by n)
    if np.any(std <= 0):
        raise ValueError("zero variance in a rotation variable; cannot normalize")
    return NormalizationParams(mean, std)


def apply_normalizer(ds: Dataset, params: NormalizationParams) -> Dataset:
    """Replace each rotation by its z-score; labels and timestamps untouched."""
    return ds.with_rotations((ds.rotations - params.mean) / params.std)


def train_subject_count(n_subjects: int, train_fraction: float) -> int:
    """Round-half-up of fraction * n, clamped to [1, n - 1]."""
    k = math.floor(train_fraction * n_subjects + 0.5)
    return max(1, min(n_subjects - 1, k))


def split_subjects(ds: Dataset, plan: SplitPlan, iteration: int) -> tuple[Dataset, Dataset]:
    """Deterministic subject-level train/test partition for one iteration.

    Subjects are sorted, then permuted by a substream keyed on
    (plan.rng_seed, iteration); the first k become the training subjects.
    Within each subject the original timestamp order is preserved.
    """
    subjects = sorted(ds.subjects)
    if len(subjects) < 2:
        raise ValueError("subject split needs at least 2 subjects")
    k = train_subject_count(len(subjects), plan.train_fraction)
    rng = substream(plan.rng_seed, "subject-split", iteration)
    order = rng.permutation(len(subjects))
    train_subjects = {subjects[i] for i in order[:k]}
    train_mask = ds.subject_mask(train_subjects)
    return ds.select(train_mask), ds.select(~train_mask)


def balance(
    ds: Dataset,
    class_a: GlanceRegion,
    class_b: GlanceRegion,
    seed: int | np.random.Generator = 0,
) -> Dataset:
    """Subsample the majority class down to the minority count.

    Sampling is without replacement at the sample level; the minority
    class is untouched and all surviving samples keep their original
    relative order.
    """
    rng = seed if isinstance(seed, np.random.Generator) else substream(int(seed), "balance")
    mask_a = ds.region_mask(class_a)
    mask_b = ds.region_mask(class_b)
    n_a, n_b = int(mask_a.sum()), int(mask_b.sum())
    if n_a == 0 or n_b == 0:
        raise ValueError(
            f"both classes must be present to balance "
            f"({class_a.value}: {n_a}, {class_b.value}: {n_b})"
        )
    if n_a == n_b:
        return ds
    major, minor_count = (mask_a, n_b) if n_a > n_b else (mask_b, n_a)
    major_idx = np.flatnonzero(major)
    keep = rng.choice(major_idx, size=minor_count, replace=False)
    idx = np.concatenate([np.flatnonzero(~major), keep])
    return ds.select(idx)
