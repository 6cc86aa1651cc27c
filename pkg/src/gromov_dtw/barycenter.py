"""GDTW barycenters by alternating minimization, and classical MDS."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .gdtw import FwOptions, Given, _as_matrix, gdtw, gdtw_objective, prepare_distances, soft_gdtw
from .series import TimeSeries, resample

__all__ = ["BarycenterResult", "barycenter_update", "gdtw_barycenter", "mds_embed"]


@dataclass
class BarycenterResult:
    distance_matrix: np.ndarray
    alignments: list
    embedded: Optional[TimeSeries]
    objective_trace: list
    iterations: int = 0
    converged: bool = False


def _check_weights(alpha, J):
    alpha = np.full(J, 1.0 / J) if alpha is None else np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (J,):
        raise ValueError(f"expected {J} weights, got shape {alpha.shape}")
    if np.any(alpha < -1e-9) or abs(alpha.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie on the probability simplex")
    return alpha


def barycenter_update(D_list, A_list, alpha=None) -> np.ndarray:
    """Closed-form minimizer over the barycenter distance matrix at fixed alignments.

    With ``A_j`` of shape ``(T, T_j)`` (barycenter time along rows)::

        D = sum_j a_j A_j D_j A_j^T  /  sum_j a_j (A_j 1)(A_j 1)^T

    elementwise. The result is symmetrized and its diagonal set to zero.
    """
    if not (len(D_list) == len(A_list) >= 1):
        raise ValueError("need matching, non-empty lists of distance matrices and alignments")
    alpha = _check_weights(alpha, len(D_list))
    num = den = None
    for a, Dj, Aj in zip(alpha, D_list, A_list):
        Aj = _as_matrix(Aj)
        Dj = np.asarray(Dj, dtype=np.float64)
        if Dj.shape != (Aj.shape[1], Aj.shape[1]):
            raise ValueError(f"alignment of shape {Aj.shape} does not match distance matrix {Dj.shape}")
        if num is not None and Aj.shape[0] != num.shape[0]:
            raise ValueError("all alignments must share the barycenter length")
        mass = Aj.sum(axis=1)
        n_j = a * (Aj @ Dj @ Aj.T)
        d_j = a * np.outer(mass, mass)
        num = n_j if num is None else num + n_j
        den = d_j if den is None else den + d_j
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.where(den > 0, num / den, 0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def _objective(D, D_list, A_list, alpha):
    return float(sum(a * gdtw_objective(D, Dj, Aj) for a, Dj, Aj in zip(alpha, D_list, A_list)))


def gdtw_barycenter(series, alpha=None, T=None, opts: FwOptions | None = None,
                    outer_iters=30, tol=1e-6, embed_dim=None, init=None) -> BarycenterResult:
    """Barycenter of a list of series (or distance matrices) under GDTW.

    Alternates between per-series GDTW alignments against the current
    barycenter matrix and the closed-form matrix update of
    :func:`barycenter_update`. Alignment solves are warm-started from the
    previous alignments, so with the hard solver the objective never
    increases.

    Parameters
    ----------
    series : list of TimeSeries or ndarray
    alpha : array-like, optional
        Simplex weights; uniform by default.
    T : int, optional
        Barycenter length; defaults to the length of the first series.
    opts : FwOptions
        Inner solver options. ``normalize_inputs`` applies once to the inputs.
    outer_iters : int
    tol : float
        Stop once the matrix changes by less than this in max norm.
    embed_dim : int, optional
        If given, embed the result by classical MDS.
    init : ndarray, optional
        Initial ``T x T`` matrix; by default the distances of the first series
        resampled to length ``T``.
    """
    if len(series) < 1:
        raise ValueError("need at least one series")
    opts = opts or FwOptions()
    alpha = _check_weights(alpha, len(series))
    D_list = [prepare_distances(s, opts.normalize_inputs) for s in series]
    first = series[0]
    T = len(D_list[0]) if T is None else int(T)
    if T < 2:
        raise ValueError("barycenter length must be >= 2")
    if init is not None:
        D = np.asarray(init, dtype=np.float64)
    elif isinstance(first, TimeSeries):
        D = prepare_distances(resample(first, T), opts.normalize_inputs)
    elif len(D_list[0]) == T:
        D = D_list[0].copy()
    else:
        raise ValueError("cannot resample a bare distance matrix; pass init or T=len")
    if D.shape != (T, T):
        raise ValueError(f"initial matrix must be {T}x{T}")
    inner = replace(opts, normalize_inputs=False)
    solve = soft_gdtw if inner.gamma > 0 else gdtw

    A_list = [None] * len(D_list)
    trace = []
    converged = False
    it = 0
    for it in range(1, outer_iters + 1):
        for j, Dj in enumerate(D_list):
            jopts = inner if A_list[j] is None else replace(inner, init=Given(A_list[j]))
            A_list[j] = solve(D, Dj, jopts).alignment
        D_new = barycenter_update(D_list, A_list, alpha)
        trace.append(_objective(D_new, D_list, A_list, alpha))
        change = float(np.max(np.abs(D_new - D)))
        D = D_new
        if change < tol:
            converged = True
            break
    embedded = mds_embed(D, embed_dim) if embed_dim else None
    return BarycenterResult(D, A_list, embedded, trace, it, converged)


def mds_embed(D, dim) -> TimeSeries:
    """Classical multidimensional scaling of a distance matrix.

    Rows keep their order, so the embedded points form a time series.
    Negative eigenvalues of the double-centered Gram matrix are clipped to zero.
    """
    D = np.asarray(D, dtype=np.float64)
    T = D.shape[0]
    if D.shape != (T, T):
        raise ValueError("distance matrix must be square")
    if not 1 <= dim <= T:
        raise ValueError(f"dim must lie in [1, {T}]")
    J = np.eye(T) - 1.0 / T
    B = -0.5 * J @ (D * D) @ J
    B = 0.5 * (B + B.T)
    vals, vecs = np.linalg.eigh(B)
    order = np.argsort(vals)[::-1][:dim]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.where(vecs[idx, np.arange(dim)] < 0, -1.0, 1.0)
    return TimeSeries(vecs * np.sqrt(vals))
