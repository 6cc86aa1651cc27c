"""Entropic optimal transport between sets of time series.

The Sinkhorn solver works in the log domain. Every returned coupling is
rounded onto the transport polytope so its marginals are exact up to
floating point, whichever stopping rule fired.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .dtw import dtw_value, soft_dtw
from .gdtw import FwOptions, gdtw, soft_gdtw
from .series import IncompatibleSpacesError, _threads, cross_distances

__all__ = [
    "Coupling",
    "SinkhornResult",
    "DatasetDistance",
    "GROUNDS",
    "entropy",
    "round_coupling",
    "sinkhorn",
    "pairwise_ground_costs",
    "dataset_distance",
]

GROUNDS = ("dtw", "soft-dtw", "gdtw", "soft-gdtw")


@dataclass(frozen=True)
class Coupling:
    matrix: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def marginal_violation(self) -> float:
        return float(max(np.max(np.abs(self.matrix.sum(axis=1) - self.p)),
                         np.max(np.abs(self.matrix.sum(axis=0) - self.q))))


@dataclass
class SinkhornResult:
    coupling: Coupling
    value: float
    transport: float
    converged: bool
    iterations: int
    value_trace: list = field(default_factory=list)
    dual_trace: list = field(default_factory=list)


def entropy(P) -> float:
    """``-sum P * (log P - 1)`` with ``0 log 0 = 0``."""
    P = np.asarray(P)
    nz = P[P > 0]
    return float(-np.sum(nz * (np.log(nz) - 1.0)))


def round_coupling(P, p, q) -> np.ndarray:
    """Round a nonnegative matrix onto the set of couplings of ``p`` and ``q``.

    Rows and then columns are scaled down to their targets and the remaining
    mass is added as a rank-one correction.
    """
    P = np.array(P, dtype=np.float64)
    rows = P.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        P *= np.minimum(np.where(rows > 0, p / rows, 1.0), 1.0)[:, None]
    cols = P.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        P *= np.minimum(np.where(cols > 0, q / cols, 1.0), 1.0)[None, :]
    # residuals are nonnegative in exact arithmetic; clip round-off
    err_r = np.maximum(p - P.sum(axis=1), 0.0)
    err_c = np.maximum(q - P.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        P += np.outer(err_r, err_c) / total
    return P


def _check_simplex(w, name):
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"{name} must be a probability vector")
    return w


def _primal(C, P, eps):
    return float(np.sum(C * P)) - eps * entropy(P)


def sinkhorn(C, p, q, epsilon=None, max_iters=1000, tol=1e-6, track=False) -> SinkhornResult:
    """Entropic OT value ``<C, P> - epsilon * H(P)`` by log-domain Sinkhorn.

    Parameters
    ----------
    C : array-like, shape (m, n)
        Ground cost.
    p, q : array-like
        Source and target weights on the simplex.
    epsilon : float, optional
        Regularization; defaults to ``0.1 * mean(C)`` (``1e-3`` if that is 0).
    max_iters, tol : int, float
        Stop after ``max_iters`` sweeps or once the row-marginal violation is
        below ``tol``.
    track : bool
        Record, after every sweep, the primal value of the rounded coupling
        (``value_trace``) and the dual objective (``dual_trace``). Only the
        dual is monotone (nondecreasing).
    """
    C = np.asarray(C, dtype=np.float64)
    p = _check_simplex(p, "p")
    q = _check_simplex(q, "q")
    if C.shape != (p.size, q.size):
        raise ValueError(f"cost shape {C.shape} does not match weights {(p.size, q.size)}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix contains non-finite values")
    if epsilon is None:
        epsilon = 0.1 * float(np.mean(C))
        if not epsilon > 0:
            epsilon = 1e-3
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        log_q = np.log(q)
    f = np.zeros(p.size)
    g = np.zeros(q.size)
    K = -C / epsilon
    trace, dual = [], []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        f = epsilon * (log_p - logsumexp(K + g[None, :] / epsilon, axis=1))
        g = epsilon * (log_q - logsumexp(K + f[:, None] / epsilon, axis=0))
        logP = K + (f[:, None] + g[None, :]) / epsilon
        P = np.exp(logP)
        if track:
            trace.append(_primal(C, round_coupling(P, p, q), epsilon))
            dual.append(float(f[p > 0] @ p[p > 0] + g[q > 0] @ q[q > 0] - epsilon * P.sum()))
        if np.max(np.abs(P.sum(axis=1) - p)) < tol:
            converged = True
            break
    P = round_coupling(np.exp(K + (f[:, None] + g[None, :]) / epsilon), p, q)
    transport = float(np.sum(C * P))
    value = transport - epsilon * entropy(P)
    return SinkhornResult(Coupling(P, p, q), value, transport, converged, it, trace, dual)


def _ground_distance(a, b, ground, gamma, opts):
    if ground == "dtw":
        return dtw_value(cross_distances(a, b))
    if ground == "soft-dtw":
        return soft_dtw(cross_distances(a, b), gamma)
    opts = opts or FwOptions()
    if ground == "gdtw":
        return gdtw(a, b, replace(opts, gamma=0.0)).value
    if ground == "soft-gdtw":
        return soft_gdtw(a, b, replace(opts, gamma=gamma)).value
    raise ValueError(f"unknown ground {ground!r}; expected one of {GROUNDS}")


def pairwise_ground_costs(setA, setB, ground="gdtw", gamma=1.0, opts=None, n_jobs=None) -> np.ndarray:
    """Matrix of (G)DTW distances between every series of ``setA`` and ``setB``.

    Raises
    ------
    IncompatibleSpacesError
        For ``dtw``/``soft-dtw`` grounds between series of incomparable spaces;
        the ``gdtw`` grounds handle those.
    """
    if ground not in GROUNDS:
        raise ValueError(f"unknown ground {ground!r}; expected one of {GROUNDS}")
    if ground in ("soft-dtw", "soft-gdtw") and not gamma > 0:
        raise ValueError("soft grounds need gamma > 0")
    if ground in ("dtw", "soft-dtw"):
        for a in setA:
            for b in setB:
                if a.metric != b.metric or a.dim != b.dim:
                    raise IncompatibleSpacesError(
                        f"{ground} needs a shared ground metric but the sets hold "
                        "incomparable series; use the gdtw or soft-gdtw ground")
    pairs = [(i, j) for i in range(len(setA)) for j in range(len(setB))]
    vals = Parallel(n_jobs=_threads(n_jobs), prefer="threads")(
        delayed(_ground_distance)(setA[i], setB[j], ground, gamma, opts) for i, j in pairs)
    C = np.empty((len(setA), len(setB)))
    for (i, j), v in zip(pairs, vals):
        C[i, j] = v
    return C


@dataclass
class DatasetDistance:
    value: float
    transport: float
    cost: np.ndarray
    coupling: Coupling
    epsilon: float


def _uniform(n):
    return np.full(n, 1.0 / n)


def dataset_distance(setA, setB, epsilon=None, ground="gdtw", gamma=1.0, opts=None,
                     debiased=False, max_iters=1000, tol=1e-6, n_jobs=None,
                     return_details=False):
    """Entropic OT between two empirical sets of series with a (G)DTW ground cost.

    Both sets carry uniform weights. With ``debiased=True`` the Sinkhorn
    divergence ``W(A, B) - (W(A, A) + W(B, B)) / 2`` is returned instead.
    ``epsilon=None`` uses ``0.1 * mean`` of the cross cost matrix for all terms.
    """
    C = pairwise_ground_costs(setA, setB, ground, gamma, opts, n_jobs)
    if epsilon is None:
        epsilon = 0.1 * float(np.mean(C))
        if not epsilon > 0:
            epsilon = 1e-3
    res = sinkhorn(C, _uniform(len(setA)), _uniform(len(setB)), epsilon, max_iters, tol)
    value, transport = res.value, res.transport
    if debiased:
        for S, sign in ((setA, -0.5), (setB, -0.5)):
            CS = pairwise_ground_costs(S, S, ground, gamma, opts, n_jobs)
            rs = sinkhorn(CS, _uniform(len(S)), _uniform(len(S)), epsilon, max_iters, tol)
            value += sign * rs.value
            transport += sign * rs.transport
    if not math.isfinite(value):
        raise FloatingPointError("Sinkhorn produced a non-finite value")
    if return_details:
        return DatasetDistance(value, transport, C, res.coupling, epsilon)
    return value
