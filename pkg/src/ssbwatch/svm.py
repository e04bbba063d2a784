"""Soft-margin binary SVM trained with sequential minimal optimization.

Solves the usual dual

    max  sum(a) - 1/2 * sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

with two-variable analytic updates. The working pair is the point with the
largest Karush-Kuhn-Tucker violation paired with the point maximizing the
error gap, so each step makes a large, provably nonnegative dual increase;
training stops when every violation is within ``tol``.

Labels enter as {0, 1} and are mapped to {-1, +1} internally. The kernel
matrix is precomputed, which is fine for the few-thousand-sample training
sets this package targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import containers as c
from .pca import PcaModel, fit_pca, project

SVM_MAGIC = b"SSBSVM01"

_KERNEL_CODES = {"linear": 1, "polynomial": 2, "rbf": 3}
_SV_EPS = 1e-10  # alphas at or below this are dropped from the model


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    degree: int = 3
    gamma: float | None = None  # None = 1 / (d * Var(train)) at fit time
    coef0: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KERNEL_CODES:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")


def _resolve_gamma(spec: KernelSpec, data: np.ndarray) -> float:
    if spec.gamma is not None:
        return spec.gamma
    spread = float(np.var(data))
    return 1.0 / (data.shape[1] * spread) if spread > 0 else 1.0


def kernel_eval(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> float:
    """Kernel value for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise ValueError("kernel arguments must share a dimension")
    gamma = spec.gamma if spec.gamma is not None else 1.0
    if spec.kind == "linear":
        return float(x @ z)
    if spec.kind == "polynomial":
        return float((gamma * (x @ z) + spec.coef0) ** spec.degree)
    diff = x - z
    return float(np.exp(-gamma * (diff @ diff)))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise kernel values between the rows of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    gamma = spec.gamma if spec.gamma is not None else 1.0
    if spec.kind == "linear":
        return a @ b.T
    if spec.kind == "polynomial":
        return (gamma * (a @ b.T) + spec.coef0) ** spec.degree
    d2 = (np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * (a @ b.T))
    return np.exp(-gamma * np.maximum(d2, 0.0))


class SmoConvergenceError(RuntimeError):
    """SMO ran out of its iteration budget; carries best-so-far diagnostics."""

    def __init__(self, iterations: int, max_violation: float, dual_objective: float):
        super().__init__(
            f"SMO did not converge after {iterations} iterations "
            f"(max KKT violation {max_violation:.3e}, dual objective {dual_objective:.6g})"
        )
        self.iterations = iterations
        self.max_violation = max_violation
        self.dual_objective = dual_objective


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (S, d)
    dual_coefs: np.ndarray       # (S,), alpha_i * y_i
    bias: float
    kernel: KernelSpec           # with gamma resolved to a number
    C: float
    pca: PcaModel | None = None  # bundled projection for models fit on components
    objective_history: list[float] | None = None  # populated when recording was requested

    def __post_init__(self) -> None:
        self.support_vectors = np.asarray(self.support_vectors, dtype=np.float64)
        self.dual_coefs = np.asarray(self.dual_coefs, dtype=np.float64)
        if len(self.support_vectors) == 0:
            raise ValueError("a fitted SVM must retain at least one support vector")
        if np.any(np.abs(self.dual_coefs) > self.C * (1 + 1e-9)):
            raise ValueError("|dual coefficients| must not exceed C")

    def preprocess(self, psd: np.ndarray) -> np.ndarray:
        """Map a raw averaged PSD (or batch) into this model's feature space."""
        return project(self.pca, psd) if self.pca is not None else np.asarray(psd, float)


def train_svm(
    data: np.ndarray,
    labels: np.ndarray,
    kernel: KernelSpec = KernelSpec(),
    C: float = 1.0,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    record_objective: bool = False,
) -> SvmModel:
    """Fit a binary SVM by SMO; ``labels`` are {0, 1} with 1 = jammed."""
    data = np.asarray(data, dtype=np.float64)
    labels = np.asarray(labels)
    if data.ndim != 2 or len(data) != len(labels):
        raise ValueError("data and labels must align")
    if C <= 0:
        raise ValueError("C must be positive")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("training data must contain both classes")

    kernel = KernelSpec(kernel.kind, kernel.degree, _resolve_gamma(kernel, data), kernel.coef0)
    y = np.where(labels == 1, 1.0, -1.0)
    n = len(data)
    gram = kernel_matrix(kernel, data, data)

    alpha = np.zeros(n)
    f = np.zeros(n)  # sum_j alpha_j y_j K_ij, bias excluded
    bias = 0.0
    objective_history: list[float] = []

    def dual_objective() -> float:
        ay = alpha * y
        return float(alpha.sum() - 0.5 * ay @ gram @ ay)

    iterations = 0
    while True:
        bias = _optimal_bias(alpha, y, f, C)
        margin = y * (f + bias)
        v = np.where(alpha <= _SV_EPS, np.maximum(0.0, 1.0 - margin),
                     np.where(alpha >= C - _SV_EPS, np.maximum(0.0, margin - 1.0),
                              np.abs(margin - 1.0)))
        worst = float(v.max())
        if worst <= tol:
            break
        if iterations >= max_iter:
            raise SmoConvergenceError(iterations, worst, dual_objective())

        errors = f + bias - y
        stepped = False
        # first choice: worst violator; second choice: largest error gap.
        # fall through the rankings when a pair cannot move.
        for i in np.argsort(-v, kind="stable")[:50]:
            i = int(i)
            if v[i] <= tol:
                break
            for j in np.argsort(-np.abs(errors[i] - errors), kind="stable"):
                j = int(j)
                if j == i:
                    continue
                if _smo_step(i, j, alpha, y, gram, f, C):
                    stepped = True
                    break
            if stepped:
                break
        if not stepped:
            raise SmoConvergenceError(iterations, worst, dual_objective())
        iterations += 1
        if record_objective:
            objective_history.append(dual_objective())

    keep = alpha > _SV_EPS
    return SvmModel(
        support_vectors=data[keep].copy(),
        dual_coefs=(alpha * y)[keep],
        bias=bias,
        kernel=kernel,
        C=C,
        objective_history=objective_history if record_objective else None,
    )


def _smo_step(i, j, alpha, y, gram, f, C) -> bool:
    """Analytic two-variable update; returns False if the pair cannot move."""
    if y[i] == y[j]:
        lo = max(0.0, alpha[i] + alpha[j] - C)
        hi = min(C, alpha[i] + alpha[j])
    else:
        lo = max(0.0, alpha[j] - alpha[i])
        hi = min(C, C + alpha[j] - alpha[i])
    if hi - lo < 1e-12:
        return False
    eta = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
    if eta <= 1e-12:
        return False
    e_i = f[i] - y[i]
    e_j = f[j] - y[j]
    new_aj = np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, lo, hi)
    delta_j = new_aj - alpha[j]
    if abs(delta_j) < 1e-14:
        return False
    delta_i = -y[i] * y[j] * delta_j
    alpha[i] += delta_i
    alpha[j] = new_aj
    f += delta_i * y[i] * gram[:, i] + delta_j * y[j] * gram[:, j]
    return True


def _optimal_bias(alpha, y, f, C) -> float:
    """Best bias for the current multipliers.

    Unbounded support vectors pin it exactly (y_i = f_i + b there); with all
    multipliers at the box boundary, take the midpoint of the interval the
    boundary KKT conditions allow.
    """
    unbounded = (alpha > _SV_EPS) & (alpha < C - _SV_EPS)
    if unbounded.any():
        return float(np.mean(y[unbounded] - f[unbounded]))
    pos = y > 0
    zero = alpha <= _SV_EPS
    at_c = alpha >= C - _SV_EPS
    lows = np.concatenate([(1.0 - f)[pos & zero], (-1.0 - f)[~pos & at_c]])
    highs = np.concatenate([(-1.0 - f)[~pos & zero], (1.0 - f)[pos & at_c]])
    lo = lows.max() if len(lows) else -np.inf
    hi = highs.min() if len(highs) else np.inf
    if np.isfinite(lo) and np.isfinite(hi):
        return float((lo + hi) / 2.0)
    return float(lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0))


def svm_decision(model: SvmModel, x: np.ndarray) -> float:
    """Signed distance surrogate: sum_i coef_i K(sv_i, x) + bias."""
    x = np.asarray(x, dtype=np.float64)
    total = model.bias
    for coef, sv in zip(model.dual_coefs, model.support_vectors):
        total += coef * kernel_eval(model.kernel, sv, x)
    return float(total)


def svm_decision_batch(model: SvmModel, xs: np.ndarray) -> np.ndarray:
    k = kernel_matrix(model.kernel, np.asarray(xs, dtype=np.float64), model.support_vectors)
    return k @ model.dual_coefs + model.bias


def svm_predict(model: SvmModel, x: np.ndarray) -> int:
    return 1 if svm_decision(model, x) >= 0.0 else 0


@dataclass
class SvmGridResult:
    """Accuracy (percent) per (kernel, dimension) cell and split."""

    rows: list[dict] = field(default_factory=list)  # kernel, dim, train/validation/test


def svm_grid_eval(
    dataset,
    kernels: list[str] = ("linear", "polynomial", "rbf"),
    dims: list = (8, 13, 85, "full"),
    C: float = 1.0,
    tol: float = 1e-3,
) -> SvmGridResult:
    """Train one SVM per (kernel, dimension) pair on the training split.

    Integer dimensions project onto that many principal components fitted on
    the training split; "full" uses the raw averaged PSDs.
    """
    train_psd, train_y = dataset.averaged_psds("train")
    result = SvmGridResult()
    for dim in dims:
        if dim == "full":
            features = {s: dataset.averaged_psds(s)[0] for s in dataset.splits}
        else:
            pca = fit_pca(train_psd, n_components=int(dim))
            features = {s: project(pca, dataset.averaged_psds(s)[0]) for s in dataset.splits}
        for kind in kernels:
            model = train_svm(features["train"], train_y, KernelSpec(kind=kind), C=C, tol=tol)
            row = {"kernel": kind, "dim": dim}
            for split in dataset.splits:
                x = features[split]
                y = dataset.averaged_psds(split)[1]
                if len(x) == 0:
                    row[split] = float("nan")
                    continue
                pred = (svm_decision_batch(model, x) >= 0.0).astype(np.int64)
                row[split] = 100.0 * float(np.mean(pred == y))
            result.rows.append(row)
    return result


def save_svm(model: SvmModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        c.write_magic(fh, SVM_MAGIC)
        c.write_u8(fh, _KERNEL_CODES[model.kernel.kind])
        c.write_u32(fh, model.kernel.degree)
        c.write_f64(fh, model.kernel.gamma if model.kernel.gamma is not None else -1.0)
        c.write_f64(fh, model.kernel.coef0)
        c.write_f64(fh, model.C)
        c.write_f64(fh, model.bias)
        s, d = model.support_vectors.shape
        c.write_u32(fh, s)
        c.write_u32(fh, d)
        c.write_array(fh, model.support_vectors, "<f8")
        c.write_array(fh, model.dual_coefs, "<f8")
        if model.pca is None:
            c.write_u8(fh, 0)
        else:
            c.write_u8(fh, 1)
            c.write_u32(fh, model.pca.mean.shape[0])
            c.write_array(fh, model.pca.mean, "<f8")
            c.write_array(fh, model.pca.components, "<f8")
            c.write_array(fh, model.pca.explained_variance_ratio, "<f8")


def load_svm(path: str | Path) -> SvmModel:
    with open(path, "rb") as fh:
        c.expect_magic(fh, SVM_MAGIC)
        code = c.read_u8(fh)
        kind = {v: k for k, v in _KERNEL_CODES.items()}[code]
        degree = c.read_u32(fh)
        gamma = c.read_f64(fh)
        coef0 = c.read_f64(fh)
        spec = KernelSpec(kind=kind, degree=degree, gamma=gamma if gamma > 0 else None, coef0=coef0)
        C = c.read_f64(fh)
        bias = c.read_f64(fh)
        s = c.read_u32(fh)
        d = c.read_u32(fh)
        svs = c.read_array(fh, (s, d), "<f8")
        coefs = c.read_array(fh, (s,), "<f8")
        pca = None
        if c.read_u8(fh):
            m = c.read_u32(fh)
            mean = c.read_array(fh, (m,), "<f8")
            components = c.read_array(fh, (d, m), "<f8")
            ratios = c.read_array(fh, (d,), "<f8")
            pca = PcaModel(mean=mean, components=components, explained_variance_ratio=ratios)
    return SvmModel(support_vectors=svs, dual_coefs=coefs, bias=bias, kernel=spec, C=C, pca=pca)
