"""Gromov DTW: objective, Frank-Wolfe style solver and gradients.

The loss between intra-series distances is the squared error. For a
(possibly soft) alignment ``A`` of shape ``(m, n)`` the linearized cost

    (L (x) A)[i, j] = sum_kl (Dx[i, k] - Dy[j, l])**2 * A[k, l]

is formed in ``O(m**2 n + m n**2)`` and each solver iteration solves a DTW
problem on it.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .dtw import AlignmentPath, SoftAlignment, dtw, path_from_matrix, soft_argmin
from .series import Euclidean, SquaredEuclidean, TimeSeries, normalize, pairwise_distances

__all__ = [
    "DiagonalBand",
    "RandomMonotone",
    "Given",
    "FwOptions",
    "Status",
    "GdtwResult",
    "squared_loss",
    "tensor_apply",
    "gdtw_objective",
    "gdtw",
    "soft_gdtw",
    "gdtw_grad",
    "distance_grad",
    "round_to_path",
    "prepare_distances",
]


@dataclass(frozen=True)
class DiagonalBand:
    pass


@dataclass(frozen=True)
class RandomMonotone:
    seed: int = 0


@dataclass(frozen=True)
class Given:
    alignment: Union[AlignmentPath, SoftAlignment, np.ndarray]


Init = Union[DiagonalBand, RandomMonotone, Given]


@dataclass(frozen=True)
class FwOptions:
    """Solver options.

    ``restarts`` counts extra runs from random monotone paths on top of the
    run from ``init``; the best final objective wins.
    """

    gamma: float = 0.0
    max_iter: int = 25
    init: Init = field(default_factory=DiagonalBand)
    restarts: int = 5
    tol: float = 1e-6
    normalize_inputs: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


class Status(enum.Enum):
    CONVERGED = "converged"
    LIMIT_CYCLE = "limit_cycle"
    MAX_ITER = "max_iter"


@dataclass
class GdtwResult:
    """Solver output.

    ``objective_trace`` holds the best objective seen after each iterate (so
    ``value == objective_trace[-1]``); ``raw_trace`` holds the objective of
    each iterate as visited.
    """

    value: float
    alignment: Union[AlignmentPath, SoftAlignment]
    objective_trace: list
    raw_trace: list
    status: Status
    period: int = 0
    restart_index: int = 0
    iterations: int = 0


def squared_loss(a, b):
    return (a - b) ** 2


def _as_matrix(A):
    if isinstance(A, (AlignmentPath, SoftAlignment)):
        return A.matrix()
    return np.asarray(A, dtype=np.float64)


def tensor_apply(Dx, Dy, A) -> np.ndarray:
    """Linearized cost ``L (x) A`` for the squared-error loss.

    Uses ``(Dx**2) r 1^T + 1 c^T (Dy**2)^T - 2 Dx A Dy^T`` with ``r = A 1`` and
    ``c = A^T 1``.
    """
    Dx = np.asarray(Dx, dtype=np.float64)
    Dy = np.asarray(Dy, dtype=np.float64)
    A = _as_matrix(A)
    m, n = A.shape
    if Dx.shape != (m, m) or Dy.shape != (n, n):
        raise ValueError(f"shape mismatch: Dx {Dx.shape}, Dy {Dy.shape}, A {A.shape}")
    rows = A.sum(axis=1)
    cols = A.sum(axis=0)
    out = ((Dx * Dx) @ rows)[:, None] + ((Dy * Dy) @ cols)[None, :]
    out -= 2.0 * (Dx @ A @ Dy.T)
    return out


def gdtw_objective(Dx, Dy, A) -> float:
    """``<L (x) A, A>`` for a hard or soft alignment.

    For a path the double sum over its cells is evaluated directly, which
    costs ``O(K**2)`` for a path of ``K`` cells and has no cancellation.
    """
    if isinstance(A, AlignmentPath):
        Dx = np.asarray(Dx, dtype=np.float64)
        Dy = np.asarray(Dy, dtype=np.float64)
        m, n = A.shape
        if Dx.shape != (m, m) or Dy.shape != (n, n):
            raise ValueError(f"shape mismatch: Dx {Dx.shape}, Dy {Dy.shape}, A {A.shape}")
        i, j = A.steps[:, 0], A.steps[:, 1]
        diff = Dx[np.ix_(i, i)] - Dy[np.ix_(j, j)]
        return float(np.sum(diff * diff))
    M = _as_matrix(A)
    # nonnegative in exact arithmetic; clip cancellation error
    return max(float(np.sum(tensor_apply(Dx, Dy, M) * M)), 0.0)


def prepare_distances(x, normalize_inputs=True, n_jobs=None) -> np.ndarray:
    """Distance matrix of a series (or a given square matrix), optionally normalized."""
    if isinstance(x, TimeSeries):
        D = pairwise_distances(x, n_jobs=n_jobs)
    else:
        D = np.asarray(x, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
            raise ValueError("expected a TimeSeries or a non-empty square distance matrix")
    return normalize(D) if normalize_inputs else D


def _init_alignment(init, m, n):
    if isinstance(init, DiagonalBand):
        return AlignmentPath.diagonal(m, n)
    if isinstance(init, RandomMonotone):
        return AlignmentPath.random(m, n, np.random.default_rng(init.seed))
    if isinstance(init, Given):
        A = init.alignment
        if isinstance(A, np.ndarray):
            A = SoftAlignment(A, 0.0)
        if A.shape != (m, n):
            raise ValueError(f"initial alignment has shape {A.shape}, expected {(m, n)}")
        return A
    raise TypeError(f"unknown init {init!r}")


def _restart_inits(opts):
    inits = [opts.init]
    if opts.restarts:
        seeds = np.random.SeedSequence(opts.seed).generate_state(opts.restarts, np.uint64)
        inits += [RandomMonotone(int(s)) for s in seeds]
    return inits


def _fw_hard(Dx, Dy, A0, max_iter):
    if isinstance(A0, SoftAlignment):
        A0 = dtw(-A0.weights)[1]
    A = A0
    val = gdtw_objective(Dx, Dy, A)
    best, best_A = val, A
    raw, trace = [val], [val]
    seen = {A: 0}
    status, period = Status.MAX_ITER, 0
    it = 0
    for it in range(1, max_iter + 1):
        A = dtw(tensor_apply(Dx, Dy, A))[1]
        val = gdtw_objective(Dx, Dy, A)
        raw.append(val)
        if val < best:
            best, best_A = val, A
        trace.append(best)
        if A in seen:
            period = it - seen[A]
            status = Status.CONVERGED if period == 1 else Status.LIMIT_CYCLE
            break
        seen[A] = it
    return GdtwResult(best, best_A, trace, raw, status, period, 0, it)


def _fw_soft(Dx, Dy, A0, gamma, max_iter, tol):
    A = A0.matrix() if isinstance(A0, (AlignmentPath, SoftAlignment)) else A0
    raw = []
    status = Status.MAX_ITER
    it = 0
    soft = None
    for it in range(1, max_iter + 1):
        soft = soft_argmin(tensor_apply(Dx, Dy, A), gamma)
        raw.append(gdtw_objective(Dx, Dy, soft.weights))
        change = np.max(np.abs(soft.weights - A))
        A = soft.weights
        if change < tol:
            status = Status.CONVERGED
            break
    return GdtwResult(raw[-1], soft, list(raw), raw, status, int(status is Status.CONVERGED), 0, it)


def _solve(x, y, opts, soft):
    Dx = prepare_distances(x, opts.normalize_inputs)
    Dy = prepare_distances(y, opts.normalize_inputs)
    m, n = len(Dx), len(Dy)
    best = None
    for k, init in enumerate(_restart_inits(opts)):
        A0 = _init_alignment(init, m, n)
        if soft:
            res = _fw_soft(Dx, Dy, A0, opts.gamma, opts.max_iter, opts.tol)
        else:
            res = _fw_hard(Dx, Dy, A0, opts.max_iter)
        res.restart_index = k
        # strict comparison keeps the lowest restart index on ties
        if best is None or res.value < best.value:
            best = res
    return best


def gdtw(x, y, opts: FwOptions | None = None) -> GdtwResult:
    """Hard Gromov DTW via unit-step Frank-Wolfe iterations.

    Each iteration replaces the alignment by the DTW path of the linearized
    cost. The run stops when an alignment repeats (period 1 is convergence,
    longer periods a limit cycle) or after ``max_iter`` iterations; the best
    iterate visited is returned, so ``value`` is an upper bound on the true
    minimum.

    Parameters
    ----------
    x, y : TimeSeries or ndarray
        Series or precomputed square distance matrices.
    opts : FwOptions, optional
        ``gamma`` must be 0.
    """
    opts = opts or FwOptions()
    if opts.gamma != 0:
        raise ValueError("gdtw() is the hard solver; use soft_gdtw() for gamma > 0")
    return _solve(x, y, opts, soft=False)


def soft_gdtw(x, y, opts: FwOptions | None = None) -> GdtwResult:
    """Soft Gromov DTW: the DTW step is replaced by the soft argmin.

    Iterates until successive soft alignments differ by less than ``tol`` in
    max norm. The reported value is the objective at the final soft matrix.
    """
    opts = opts or FwOptions(gamma=1.0)
    if not opts.gamma > 0:
        raise ValueError("soft_gdtw() needs gamma > 0")
    return _solve(x, y, opts, soft=True)


def round_to_path(alignment) -> AlignmentPath:
    """Most likely hard path under a soft alignment (maximum total weight)."""
    if isinstance(alignment, AlignmentPath):
        return alignment
    W = _as_matrix(alignment)
    if np.all((W == 0) | (W == 1)):
        try:
            return path_from_matrix(W)
        except ValueError:
            pass
    return dtw(-W)[1]


def distance_grad(Dx, Dy, A):
    """Gradients of the objective with respect to ``Dx`` and ``Dy`` at fixed ``A``."""
    M = _as_matrix(A)
    r = M.sum(axis=1)
    c = M.sum(axis=0)
    gx = 2.0 * (Dx * np.outer(r, r) - M @ Dy @ M.T)
    gy = 2.0 * (Dy * np.outer(c, c) - M.T @ Dx @ M)
    return gx, gy


def raw_distance_grad(G, D_raw, normalize_inputs):
    """Chain a gradient on the (possibly normalized) matrix back to raw distances.

    With normalization the scale is the largest raw entry; the derivative
    flows through that entry (the first one in row-major order on ties).
    """
    if not normalize_inputs:
        return G
    s = D_raw.max()
    if s <= 0:
        return G
    out = G / s
    a, b = np.unravel_index(np.argmax(D_raw), D_raw.shape)
    c = np.sum(G * D_raw) / s**2
    out[a, b] -= 0.5 * c
    out[b, a] -= 0.5 * c
    return out


def points_grad(ts, G_raw):
    """Gradient in the points of ``ts`` from a symmetric gradient on its raw distances."""
    pts = ts.points
    diff = pts[:, None, :] - pts[None, :, :]
    if isinstance(ts.metric, SquaredEuclidean):
        W = 2.0 * G_raw
    else:
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        with np.errstate(divide="ignore", invalid="ignore"):
            W = np.where(dist > 0, G_raw / dist, 0.0)
    # each pair enters through both D[i, k] and D[k, i]
    return 2.0 * np.einsum("ik,ikd->id", W, diff)


def _differentiable(ts):
    return isinstance(ts, TimeSeries) and isinstance(ts.metric, (Euclidean, SquaredEuclidean))


def gdtw_grad(x, y, A, normalize_inputs=False):
    """Gradient of ``<L(x, y) (x) A, A>`` with respect to the points of ``x`` and ``y``.

    ``A`` is held fixed. With ``normalize_inputs`` both distance matrices
    are divided by their largest entry before the objective is formed and
    the gradient includes the dependence of that entry on the points.

    Returns
    -------
    grad_x : ndarray, shape (T_x, d)
    grad_y : ndarray of shape (T_y, d'), or None if ``y`` is not a vector series
    """
    if not _differentiable(x):
        raise ValueError("gdtw_grad needs x to be a Euclidean or squared-Euclidean TimeSeries")
    Dx_raw = pairwise_distances(x)
    Dy_raw = prepare_distances(y, False)
    Dx = normalize(Dx_raw) if normalize_inputs else Dx_raw
    Dy = normalize(Dy_raw) if normalize_inputs else Dy_raw
    gx, gy = distance_grad(Dx, Dy, A)
    grad_x = points_grad(x, raw_distance_grad(gx, Dx_raw, normalize_inputs))
    grad_y = None
    if _differentiable(y):
        grad_y = points_grad(y, raw_distance_grad(gy, Dy_raw, normalize_inputs))
    return grad_x, grad_y
