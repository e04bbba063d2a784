"""Principal component analysis over time-averaged PSD vectors.

Fitted by SVD of the centered data matrix (no variance scaling), which is
numerically sturdier than an explicit covariance eigensolve and gives the
same components. Rows of ``components`` are orthonormal and ordered by
explained variance; each row's largest-magnitude entry is made nonnegative
so fits are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import containers as c

PCA_MAGIC = b"SSBPCA01"


@dataclass
class PcaModel:
    mean: np.ndarray                      # (m,)
    components: np.ndarray                # (d, m), orthonormal rows
    explained_variance_ratio: np.ndarray  # (d,), nonincreasing

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def fit_pca(data: np.ndarray, n_components: int) -> PcaModel:
    """Fit the top ``n_components`` principal directions of ``data`` (N x m)."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need a 2-D data matrix with at least 2 rows")
    n, m = data.shape
    max_components = min(n - 1, m)
    if not 1 <= n_components <= max_components:
        raise ValueError(f"n_components must lie in [1, {max_components}], got {n_components}")

    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    total = float(np.sum(singular**2))
    if total <= 0.0 or not np.isfinite(total):
        raise ValueError("data has zero total variance; PCA is undefined")

    components = vt[:n_components].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    ratios = (singular[:n_components] ** 2) / total
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios)


def project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Coordinates of ``x`` (vector or N x m batch) in the component basis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {model.mean.shape[0]}")
    return (x - model.mean) @ model.components.T


def explained_variance_curve(model: PcaModel) -> np.ndarray:
    """Cumulative explained-variance ratios; reaches 1 for a full-rank fit."""
    return np.cumsum(model.explained_variance_ratio)


def bootstrap_variance_quantiles(
    data: np.ndarray,
    repeats: int = 100,
    quantiles: tuple[float, float] = (0.01, 0.99),
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Row-resampling bootstrap band around the cumulative variance curve.

    Each repeat refits a full-rank PCA on N rows drawn with replacement and
    records its cumulative curve; returns the per-component low/high
    quantiles across repeats.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    d = min(n - 1, data.shape[1])
    rng = np.random.default_rng(seed)
    curves = np.empty((repeats, d))
    for r in range(repeats):
        sample = data[rng.integers(n, size=n)]
        while True:
            try:
                curves[r] = explained_variance_curve(fit_pca(sample, d))
                break
            except ValueError:
                sample = data[rng.integers(n, size=n)]  # degenerate resample, redraw
    low = np.quantile(curves, quantiles[0], axis=0)
    high = np.quantile(curves, quantiles[1], axis=0)
    return low, high


def save_pca(model: PcaModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        c.write_magic(fh, PCA_MAGIC)
        c.write_u32(fh, model.n_components)
        c.write_u32(fh, model.mean.shape[0])
        c.write_array(fh, model.mean, "<f4")
        c.write_array(fh, model.components, "<f4")
        c.write_array(fh, model.explained_variance_ratio, "<f4")


def load_pca(path: str | Path) -> PcaModel:
    with open(path, "rb") as fh:
        c.expect_magic(fh, PCA_MAGIC)
        d = c.read_u32(fh)
        m = c.read_u32(fh)
        mean = c.read_array(fh, (m,), "<f4").astype(np.float64)
        components = c.read_array(fh, (d, m), "<f4").astype(np.float64)
        ratios = c.read_array(fh, (d,), "<f4").astype(np.float64)
    return PcaModel(mean=mean, components=components, explained_variance_ratio=ratios)
