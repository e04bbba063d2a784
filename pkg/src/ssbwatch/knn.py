"""Brute-force k-nearest-neighbor detection on PSD features.

Two feature pathways: full 1024-bin PSDs standardized per feature, or
projections of raw PSDs onto the leading principal components. Search is
exact (no trees or approximate indexes); single-sample prediction walks the
training set point by point, which is also what the latency benchmark times.

Tie rules, fixed and tested: equal distances break toward the lower training
index, and an even vote splits toward the benign label 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import containers as c
from .pca import PcaModel, fit_pca, project

KNN_MAGIC = b"SSBKNN01"

MODE_STANDARDIZED = "standardized-full"
MODE_PCA = "pca-projected"
_MODE_CODES = {MODE_STANDARDIZED: 1, MODE_PCA: 2}


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def fit_standardizer(data: np.ndarray) -> Standardizer:
    """Per-feature zero-mean/unit-variance transform fitted on training data.

    Zero-variance features get their std snapped to 1 so they map to 0
    instead of dividing by zero.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need at least 2 samples to fit a standardizer")
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std[std == 0.0] = 1.0
    return Standardizer(mean=mean, std=std)


@dataclass
class KnnModel:
    points: np.ndarray      # (N, d) float64
    labels: np.ndarray      # (N,) in {0, 1}
    k: int
    mode: str
    standardizer: Standardizer | None = None
    pca: PcaModel | None = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2 or len(self.points) != len(self.labels):
            raise ValueError("points and labels must align")
        if not 1 <= self.k <= len(self.points):
            raise ValueError(f"k must lie in [1, {len(self.points)}]")
        if self.mode not in _MODE_CODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    def preprocess(self, psd: np.ndarray) -> np.ndarray:
        """Map a raw averaged PSD (or batch) into this model's feature space."""
        if self.mode == MODE_STANDARDIZED:
            return self.standardizer.apply(psd)
        return project(self.pca, psd)


def knn_predict(model: KnnModel, x: np.ndarray) -> tuple[int, float]:
    """Classify one feature vector; returns (label, jammed-vote fraction)."""
    if len(model.points) == 0:
        raise ValueError("empty model")
    x = np.asarray(x, dtype=np.float64)
    d2 = np.empty(len(model.points))
    for i, p in enumerate(model.points):
        diff = x - p
        d2[i] = diff @ diff
    nearest = np.argsort(d2, kind="stable")[: model.k]
    votes = int(model.labels[nearest].sum())
    label = 1 if votes > model.k - votes else 0
    return label, votes / model.k


def knn_predict_batch(model: KnnModel, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch prediction; agrees exactly with knn_predict per row."""
    xs = np.asarray(xs, dtype=np.float64)
    diffs = xs[:, None, :] - model.points[None, :, :]
    d2 = np.einsum("qnd,qnd->qn", diffs, diffs)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
    votes = model.labels[nearest].sum(axis=1)
    labels = (votes > model.k - votes).astype(np.int64)
    return labels, votes / model.k


@dataclass
class KnnGridResult:
    """Accuracy (percent) per k and split for one feature mode."""

    mode: str
    k_values: list[int]
    accuracy: dict[int, dict[str, float]]
    best_k: int


def knn_grid_eval(dataset, k_values: list[int], mode: str) -> KnnGridResult:
    """Evaluate KNN over a k grid; the best k is chosen on the validation split."""
    train_psd, train_y = dataset.averaged_psds("train")
    if len(train_psd) < 2:
        raise ValueError("need at least 2 training samples")

    if mode == MODE_STANDARDIZED:
        std = fit_standardizer(train_psd)
        features = {s: std.apply(dataset.averaged_psds(s)[0]) for s in dataset.splits}
        extras = {"standardizer": std}
    elif mode == MODE_PCA:
        pca = fit_pca(train_psd, n_components=min(8, len(train_psd) - 1, train_psd.shape[1]))
        features = {s: project(pca, dataset.averaged_psds(s)[0]) for s in dataset.splits}
        extras = {"pca": pca}
    else:
        raise ValueError(f"unknown mode {mode!r}")

    accuracy: dict[int, dict[str, float]] = {}
    for k in k_values:
        model = KnnModel(points=features["train"], labels=train_y, k=k, mode=mode, **extras)
        accuracy[k] = {}
        for split in dataset.splits:
            x = features[split]
            y = dataset.averaged_psds(split)[1]
            if len(x) == 0:
                accuracy[k][split] = float("nan")
                continue
            pred, _ = knn_predict_batch(model, x)
            accuracy[k][split] = 100.0 * float(np.mean(pred == y))

    def validation_score(k: int) -> tuple[float, int]:
        score = accuracy[k].get("validation", float("nan"))
        return (score if np.isfinite(score) else -1.0, -k)

    best_k = max(k_values, key=validation_score)
    return KnnGridResult(mode=mode, k_values=list(k_values), accuracy=accuracy, best_k=best_k)


def save_knn(model: KnnModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        c.write_magic(fh, KNN_MAGIC)
        c.write_u8(fh, _MODE_CODES[model.mode])
        c.write_u32(fh, model.k)
        n, d = model.points.shape
        c.write_u32(fh, n)
        c.write_u32(fh, d)
        c.write_array(fh, model.points, "<f8")
        c.write_array(fh, model.labels, "<u1")
        if model.mode == MODE_STANDARDIZED:
            m = model.standardizer.mean.shape[0]
            c.write_u32(fh, m)
            c.write_array(fh, model.standardizer.mean, "<f8")
            c.write_array(fh, model.standardizer.std, "<f8")
        else:
            pca = model.pca
            c.write_u32(fh, pca.mean.shape[0])
            c.write_array(fh, pca.mean, "<f8")
            c.write_array(fh, pca.components, "<f8")
            c.write_array(fh, pca.explained_variance_ratio, "<f8")


def load_knn(path: str | Path) -> KnnModel:
    with open(path, "rb") as fh:
        c.expect_magic(fh, KNN_MAGIC)
        code = c.read_u8(fh)
        mode = {v: k for k, v in _MODE_CODES.items()}.get(code)
        if mode is None:
            raise c.ContainerError(f"unknown KNN mode code {code}")
        k = c.read_u32(fh)
        n = c.read_u32(fh)
        d = c.read_u32(fh)
        points = c.read_array(fh, (n, d), "<f8")
        labels = c.read_array(fh, (n,), "<u1").astype(np.int64)
        m = c.read_u32(fh)
        if mode == MODE_STANDARDIZED:
            mean = c.read_array(fh, (m,), "<f8")
            std = c.read_array(fh, (m,), "<f8")
            return KnnModel(points, labels, k, mode, standardizer=Standardizer(mean, std))
        mean = c.read_array(fh, (m,), "<f8")
        components = c.read_array(fh, (d, m), "<f8")
        ratios = c.read_array(fh, (d,), "<f8")
        pca = PcaModel(mean=mean, components=components, explained_variance_ratio=ratios)
        return KnnModel(points, labels, k, mode, pca=pca)
