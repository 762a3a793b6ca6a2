"""Principal component analysis of the three rotation variables.

The covariance matrix is only 3x3, so the eigendecomposition is done with
cyclic Jacobi rotations: dependency-free, exact to machine precision at
this size, and trivially testable against the eigen-equation.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns,
    unsorted. Converges when the off-diagonal Frobenius norm drops below
    ``tol``.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-10):
        raise ValueError("jacobi_eigh expects a symmetric square matrix")
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < tol / (n * n):
                    continue
                # rotation angle zeroing a[p, q]
                theta = 0.5 * np.arctan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class PcaModel:
    """Fitted components (rows), eigenvalues (descending), and data mean."""

    components: np.ndarray  # (3, 3), rows are unit-norm principal components
    eigenvalues: np.ndarray  # (3,), non-negative, descending
    mean: np.ndarray  # (3,)

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = float(self.eigenvalues.sum())
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total

    def as_dict(self) -> dict:
        return {
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "mean": self.mean.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def fit_pca(ds: Dataset) -> PcaModel:
    """Fit PCA on the dataset's rotation columns (population covariance).

    Sign convention: each component's largest-magnitude loading is made
    non-negative so repeated fits are bit-identical.
    """
    x = ds.rotations
    if len(x) < 4:
        raise ValueError(f"PCA needs at least 4 samples, got {len(x)}")
    if not np.isfinite(x).all():
        raise ValueError("PCA input contains non-finite values")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / len(x)
    eigvals, eigvecs = jacobi_eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    components = eigvecs[:, order].T.copy()
    eigvals = np.where(eigvals < 0, np.where(eigvals > -1e-12, 0.0, eigvals), eigvals)
    if np.any(eigvals < 0):
        raise ValueError("covariance produced eigenvalues below -1e-12")
    for i in range(components.shape[0]):
        lead = np.argmax(np.abs(components[i]))
        if components[i, lead] < 0:
            components[i] = -components[i]
    return PcaModel(components, eigvals, mean)


@dataclass
class ProjectionTable:
    """Per-sample principal coordinates, plot-ready for scatter figures."""

    subject_ids: np.ndarray
    glances: list[str]
    coords: np.ndarray  # (n, k)

    def write_csv(self, path: str | Path) -> None:
        k = self.coords.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject_id", "glance"] + [f"pc_{i + 1}" for i in range(k)])
            for i in range(len(self.subject_ids)):
                writer.writerow(
                    [self.subject_ids[i], self.glances[i]]
                    + [f"{v:.6f}" for v in self.coords[i]]
                )


def project(model: PcaModel, ds: Dataset, k: int = 2) -> ProjectionTable:
    """Project the dataset onto the first k components, keeping row order."""
    if k not in (1, 2, 3):
        raise ValueError(f"k must be 1, 2, or 3, got {k}")
    coords = (ds.rotations - model.mean) @ model.components[:k].T
    return ProjectionTable(
        ds.subject_ids.copy(),
        [ds.glance_of(i).value for i in range(len(ds))],
        coords,
    )


def averaged_components(models: list[PcaModel]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise mean and std of component matrices across runs.

    Before averaging, each run's components are sign-aligned to the first
    run: a row is flipped when its dot product with the reference row is
    negative (components are defined up to sign).
    """
    if not models:
        raise ValueError("no models to average")
    reference = models[0].components
    aligned = []
    for model in models:
        rows = model.components.copy()
        for i in range(rows.shape[0]):
            if rows[i] @ reference[i] < 0:
                rows[i] = -rows[i]
        aligned.append(rows)
    stack = np.stack(aligned)
    return stack.mean(axis=0), stack.std(axis=0)
