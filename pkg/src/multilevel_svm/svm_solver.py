"""Weighted soft-margin RBF-kernel SVM trained by sequential minimal
optimization on the dual, with per-instance penalty caps derived from point
volumes.

Each class receives the same total penalty budget C, split across its points
in proportion to volume; on balanced unit-volume data this reduces to the
usual per-instance cap C/n_class. The two-variable subproblem is solved in a
canonical parametrization keyed on the unordered index pair, which makes the
solve exactly mirror-symmetric under a global label flip.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .data_io import LabeledDataset

if TYPE_CHECKING:
    from .model_eval import QualityMetrics

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000_000
DEFAULT_CACHE_BYTES = 256 * 1024 * 1024
SV_EPS = 1e-12          # alpha above this counts as a support vector
_QUAD_FLOOR = 1e-12     # curvature floor for degenerate pairs


class TrainingError(RuntimeError):
    """Training cannot proceed (single-class data, infeasible inputs, ...)."""


@dataclass
class SvmParams:
    c: float
    gamma: float

    def __post_init__(self):
        if self.c <= 0 or self.gamma <= 0:
            raise ValueError("C and gamma must be positive")


@dataclass(eq=False)
class SvmModel:
    """Trained decision function plus bookkeeping used by model selection.

    sv_indices are rows of the training set this model was fitted on;
    quality is attached after evaluation on the validation sample.
    """

    sv_points: np.ndarray       # (m, d)
    sv_coef: np.ndarray         # (m,) alpha_i * y_i
    bias: float
    params: SvmParams
    n_sv: int
    sv_indices: np.ndarray      # (m,) rows into the training set
    sv_alpha: np.ndarray        # (m,) raw alpha values
    converged: bool = True
    dual_objective: float = 0.0
    iterations: int = 0
    quality: "QualityMetrics | None" = None
    level: int | None = None

    @property
    def dim(self) -> int:
        return self.sv_points.shape[1]


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0, out=sq)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * squared_distances(a, b))


def instance_box(volumes: np.ndarray, labels: np.ndarray, c: float) -> np.ndarray:
    """Per-instance upper bounds U_i = C * v_i / (class volume).

    Each class's bounds sum to C, so the classes carry equal total penalty
    budgets regardless of imbalance, and scaling all volumes by a constant
    leaves the bounds unchanged.
    """
    volumes = np.asarray(volumes, dtype=np.float64)
    labels = np.asarray(labels)
    if np.any(volumes <= 0):
        raise ValueError("volumes must be positive")
    bounds = np.empty(volumes.size, dtype=np.float64)
    for label in (1, -1):
        rows = np.flatnonzero(labels == label)
        if rows.size == 0:
            raise TrainingError("training set is missing a class")
        bounds[rows] = c * volumes[rows] / volumes[rows].sum()
    return bounds


class _KernelRows:
    """RBF kernel rows served on demand with an LRU byte budget.

    When a precomputed squared-distance matrix is supplied (shared across a
    parameter search on one training set), rows are exponentiated from it
    directly and the cache only stores the result.
    """

    def __init__(self, points: np.ndarray, gamma: float,
                 cache_bytes: int = DEFAULT_CACHE_BYTES,
                 sqdist: np.ndarray | None = None):
        self.points = points
        self.gamma = gamma
        self.sqdist = sqdist
        self._sqnorms = (points * points).sum(axis=1)
        row_bytes = max(points.shape[0] * 8, 1)
        self.max_rows = max(2, int(cache_bytes // row_bytes))
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        hit = self._cache.get(i)
        if hit is not None:
            self._cache.move_to_end(i)
            return hit
        if self.sqdist is not None:
            d2 = self.sqdist[i]
        else:
            d2 = self._sqnorms[i] + self._sqnorms - 2.0 * (self.points @ self.points[i])
            np.maximum(d2, 0.0, out=d2)
        row = np.exp(-self.gamma * d2)
        self._cache[i] = row
        while len(self._cache) > self.max_rows:
            self._cache.popitem(last=False)
        return row


def _solve_pair(alpha, y, bounds, grad, p, q, k_pp, k_qq, k_pq):
    """Exact minimizer of the two-variable subproblem along the feasible line.

    The step t moves alpha_p by +y_p*t and alpha_q by -y_q*t, preserving the
    equality constraint; the quadratic along t has curvature
    K_pp + K_qq - 2 K_pq >= 0.
    """
    quad = k_pp + k_qq - 2.0 * k_pq
    if quad <= 0.0:
        quad = _QUAD_FLOOR
    t = (y[q] * grad[q] - y[p] * grad[p]) / quad
    if y[p] > 0:
        lo, hi = -alpha[p], bounds[p] - alpha[p]
    else:
        lo, hi = alpha[p] - bounds[p], alpha[p]
    if y[q] > 0:
        lo = max(lo, alpha[q] - bounds[q])
        hi = min(hi, alpha[q])
    else:
        lo = max(lo, -alpha[q])
        hi = min(hi, bounds[q] - alpha[q])
    t = min(max(t, lo), hi)
    new_p = min(max(alpha[p] + y[p] * t, 0.0), bounds[p])
    new_q = min(max(alpha[q] - y[q] * t, 0.0), bounds[q])
    return new_p, new_q


def train_wsvm(train: LabeledDataset, params: SvmParams, *,
               tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               cache_bytes: int = DEFAULT_CACHE_BYTES,
               sqdist: np.ndarray | None = None,
               level: int | None = None) -> SvmModel:
    """Solve the weighted dual by maximal-violating-pair SMO.

    Stops when the maximum KKT violation drops to ``tol``; hitting the
    iteration cap returns the best iterate with ``converged=False``. Raises
    TrainingError on single-class input.
    """
    x = train.points
    y = train.labels.astype(np.float64)
    n = x.shape[0]
    if n < 2:
        raise TrainingError("need at least two training points")
    bounds = instance_box(train.volumes, train.labels, params.c)

    kernel = _KernelRows(x, params.gamma, cache_bytes, sqdist)
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # gradient of 1/2 a^T Q a - e^T a at a = 0
    pos = y > 0

    iterations = 0
    converged = False
    while iterations < max_iter:
        movable_up = np.where(pos, alpha < bounds, alpha > 0.0)
        movable_dn = np.where(pos, alpha > 0.0, alpha < bounds)
        minus_yg = -y * grad
        up_vals = np.where(movable_up, minus_yg, -np.inf)
        dn_vals = np.where(movable_dn, minus_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(dn_vals))
        gap = up_vals[i] - dn_vals[j]
        if not np.isfinite(gap) or gap <= tol:
            converged = True
            break
        p, q = (i, j) if i < j else (j, i)
        row_p = kernel.row(p)
        row_q = kernel.row(q)
        new_p, new_q = _solve_pair(alpha, y, bounds, grad, p, q,
                                   row_p[p], row_q[q], row_p[q])
        delta_p = new_p - alpha[p]
        delta_q = new_q - alpha[q]
        # single fused update keeps the gradient exactly mirror-symmetric
        grad += y * ((y[p] * delta_p) * row_p + (y[q] * delta_q) * row_q)
        alpha[p] = new_p
        alpha[q] = new_q
        iterations += 1

    balance = float(np.dot(alpha, y))
    if abs(balance) > 1e-8:
        raise TrainingError(f"dual equality constraint violated: sum(alpha*y) = {balance:g}")
    if np.any(alpha < -1e-12) or np.any(alpha - bounds > 1e-12 * np.maximum(bounds, 1.0)):
        raise TrainingError("dual box constraint violated")

    minus_yg = -y * grad
    lower_free = alpha > SV_EPS
    upper_free = bounds - alpha > SV_EPS * np.maximum(bounds, 1.0)
    free = lower_free & upper_free
    if free.any():
        bias = float(minus_yg[free].mean())
    else:
        movable_up = np.where(pos, upper_free, lower_free)
        movable_dn = np.where(pos, lower_free, upper_free)
        lo = float(minus_yg[movable_up].max()) if movable_up.any() else None
        hi = float(minus_yg[movable_dn].min()) if movable_dn.any() else None
        if lo is None:
            bias = hi if hi is not None else 0.0
        elif hi is None:
            bias = lo
        else:
            bias = 0.5 * (lo + hi)

    sv = alpha > SV_EPS
    dual_objective = 0.5 * (float(alpha @ grad) - float(alpha.sum()))
    return SvmModel(
        sv_points=x[sv].copy(),
        sv_coef=(alpha * y)[sv],
        bias=bias,
        params=params,
        n_sv=int(sv.sum()),
        sv_indices=np.flatnonzero(sv),
        sv_alpha=alpha[sv],
        converged=converged,
        dual_objective=dual_objective,
        iterations=iterations,
        level=level,
    )


def decision_values(model: SvmModel, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.dim:
        raise ValueError(f"query points must have {model.dim} features, got shape {points.shape}")
    out = np.empty(points.shape[0])
    if model.n_sv == 0:
        out.fill(model.bias)
        return out
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        k = rbf_kernel(block, model.sv_points, model.params.gamma)
        # multiply-then-sum (no FMA) so symmetric configurations cancel exactly
        out[start:start + chunk] = (k * model.sv_coef).sum(axis=1) + model.bias
    return out


def predict(model: SvmModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and decision values for a batch of points; sign(0) maps to +1."""
    values = decision_values(model, points)
    labels = np.where(values >= 0.0, 1, -1).astype(np.int64)
    return labels, values
