"""Dynamic time warping, soft-DTW and the soft argmin alignment.

All routines take a precomputed cost matrix ``D`` of shape ``(m, n)``.
The inner loops are compiled with numba.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "AlignmentPath",
    "SoftAlignment",
    "dtw",
    "dtw_value",
    "soft_dtw",
    "soft_argmin",
    "enumerate_alignments",
    "path_from_matrix",
]

_HARD_GAMMA = 1e-12


@dataclass(frozen=True, eq=False)
class AlignmentPath:
    """Monotone alignment path from ``(0, 0)`` to ``(m - 1, n - 1)``.

    ``steps`` is an integer array of shape ``(K, 2)``; consecutive rows differ
    by ``(1, 0)``, ``(0, 1)`` or ``(1, 1)``.
    """

    steps: np.ndarray
    shape: tuple

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64).reshape(-1, 2)
        m, n = (int(s) for s in self.shape)
        if m < 1 or n < 1:
            raise ValueError("alignment shape must be positive")
        if len(steps) == 0 or tuple(steps[0]) != (0, 0) or tuple(steps[-1]) != (m - 1, n - 1):
            raise ValueError("path must run from (0, 0) to (m - 1, n - 1)")
        delta = np.diff(steps, axis=0)
        ok = (delta >= 0).all(axis=1) & (delta <= 1).all(axis=1) & (delta.sum(axis=1) > 0)
        if not ok.all():
            raise ValueError("path steps must be (1, 0), (0, 1) or (1, 1)")
        steps.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "shape", (m, n))

    def __len__(self):
        return len(self.steps)

    def __eq__(self, other):
        if not isinstance(other, AlignmentPath):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.steps, other.steps)

    def __hash__(self):
        return hash((self.shape, self.steps.tobytes()))

    def matrix(self) -> np.ndarray:
        """Binary indicator matrix of the path."""
        A = np.zeros(self.shape)
        A[self.steps[:, 0], self.steps[:, 1]] = 1.0
        return A

    def transpose(self) -> "AlignmentPath":
        return AlignmentPath(self.steps[:, ::-1], self.shape[::-1])

    @classmethod
    def diagonal(cls, m, n) -> "AlignmentPath":
        """Staircase closest to the straight line from corner to corner."""
        if m == 1 or n == 1:
            return cls(np.array([(i, j) for i in range(m) for j in range(n)]), (m, n))
        ii, jj = np.meshgrid(np.arange(m) / (m - 1), np.arange(n) / (n - 1),
                             indexing="ij")
        return dtw(np.abs(ii - jj))[1]

    @classmethod
    def random(cls, m, n, rng) -> "AlignmentPath":
        """Random monotone walk choosing uniformly among the admissible moves."""
        i = j = 0
        steps = [(0, 0)]
        moves = ((1, 0), (0, 1), (1, 1))
        while (i, j) != (m - 1, n - 1):
            allowed = [(di, dj) for di, dj in moves if i + di < m and j + dj < n]
            di, dj = allowed[rng.integers(len(allowed))]
            i, j = i + di, j + dj
            steps.append((i, j))
        return cls(np.array(steps), (m, n))


@dataclass(frozen=True, eq=False)
class SoftAlignment:
    """Expected alignment matrix under the Gibbs distribution over paths."""

    weights: np.ndarray
    gamma: float

    def matrix(self) -> np.ndarray:
        return self.weights

    @property
    def shape(self):
        return self.weights.shape


def path_from_matrix(A) -> AlignmentPath:
    A = np.asarray(A)
    steps = np.argwhere(A > 0.5)
    return AlignmentPath(steps, A.shape)


def _check_cost(D):
    D = np.ascontiguousarray(D, dtype=np.float64)
    if D.ndim != 2 or D.size == 0:
        raise ValueError("cost matrix must be a non-empty 2-D array")
    if not np.all(np.isfinite(D)):
        raise ValueError("cost matrix contains non-finite values")
    return D


@njit(cache=True, nogil=True)
def _dtw_table(D):
    m, n = D.shape
    R = np.full((m + 1, n + 1), np.inf)
    R[0, 0] = 0.0
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            best = R[i - 1, j - 1]
            if R[i - 1, j] < best:
                best = R[i - 1, j]
            if R[i, j - 1] < best:
                best = R[i, j - 1]
            R[i, j] = D[i - 1, j - 1] + best
    return R


@njit(cache=True, nogil=True)
def _dtw_backtrack(R):
    m = R.shape[0] - 1
    n = R.shape[1] - 1
    out = np.empty((m + n, 2), dtype=np.int64)
    i, j = m, n
    k = 0
    while True:
        out[k, 0] = i - 1
        out[k, 1] = j - 1
        k += 1
        if i == 1 and j == 1:
            break
        diag = R[i - 1, j - 1]
        up = R[i - 1, j]
        left = R[i, j - 1]
        # ties: diagonal, then up, then left
        if diag <= up and diag <= left:
            i -= 1
            j -= 1
        elif up <= left:
            i -= 1
        else:
            j -= 1
    return out[:k][::-1]


@njit(cache=True, nogil=True)
def _dtw_value_rolling(D):
    m, n = D.shape
    prev = np.full(n + 1, np.inf)
    cur = np.full(n + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, m + 1):
        cur[0] = np.inf
        for j in range(1, n + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = D[i - 1, j - 1] + best
        prev, cur = cur, prev
        prev[0] = np.inf
    return prev[n]


def dtw(D):
    """Exact DTW by dynamic programming.

    Parameters
    ----------
    D : array-like, shape (m, n)
        Cost matrix.

    Returns
    -------
    value : float
        Minimum of ``<D, A>`` over alignment matrices.
    path : AlignmentPath
        A minimizing path; ties are broken towards the diagonal move, then the
        move from ``(i - 1, j)``, then from ``(i, j - 1)``.
    """
    D = _check_cost(D)
    R = _dtw_table(D)
    steps = _dtw_backtrack(R)
    return float(R[-1, -1]), AlignmentPath(steps, D.shape)


def dtw_value(D) -> float:
    """DTW value only, using two rolling rows."""
    return float(_dtw_value_rolling(_check_cost(D)))


@njit(cache=True, nogil=True)
def _softmin3(a, b, c, gamma):
    lo = min(a, b, c)
    if lo == np.inf:
        return np.inf
    s = math.exp(-(a - lo) / gamma) + math.exp(-(b - lo) / gamma) + math.exp(-(c - lo) / gamma)
    return lo - gamma * math.log(s)


@njit(cache=True, nogil=True)
def _soft_dtw_table(D, gamma):
    m, n = D.shape
    R = np.full((m + 2, n + 2), np.inf)
    R[0, 0] = 0.0
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            R[i, j] = D[i - 1, j - 1] + _softmin3(R[i - 1, j], R[i - 1, j - 1],
                                                  R[i, j - 1], gamma)
    return R


@njit(cache=True, nogil=True)
def _soft_dtw_grad(D, R, gamma):
    m, n = D.shape
    Dp = np.zeros((m + 2, n + 2))
    Dp[1:m + 1, 1:n + 1] = D
    E = np.zeros((m + 2, n + 2))
    Rp = R.copy()
    for i in range(1, m + 1):
        Rp[i, n + 1] = -np.inf
    for j in range(1, n + 1):
        Rp[m + 1, j] = -np.inf
    Rp[m + 1, n + 1] = R[m, n]
    E[m + 1, n + 1] = 1.0
    for i in range(m, 0, -1):
        for j in range(n, 0, -1):
            a = math.exp((Rp[i + 1, j] - Rp[i, j] - Dp[i + 1, j]) / gamma)
            b = math.exp((Rp[i, j + 1] - Rp[i, j] - Dp[i, j + 1]) / gamma)
            c = math.exp((Rp[i + 1, j + 1] - Rp[i, j] - Dp[i + 1, j + 1]) / gamma)
            E[i, j] = E[i + 1, j] * a + E[i, j + 1] * b + E[i + 1, j + 1] * c
    return E[1:m + 1, 1:n + 1]


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError("gamma must be positive; use dtw() for the hard minimum")


def soft_dtw(D, gamma) -> float:
    """Soft-DTW value ``-gamma * log(sum_A exp(-<D, A> / gamma))``."""
    _check_gamma(gamma)
    D = _check_cost(D)
    if gamma < _HARD_GAMMA:
        return dtw_value(D)
    return float(_soft_dtw_table(D, float(gamma))[D.shape[0], D.shape[1]])


def soft_argmin(D, gamma) -> SoftAlignment:
    """Expected alignment matrix, i.e. the gradient of :func:`soft_dtw` in ``D``."""
    _check_gamma(gamma)
    D = _check_cost(D)
    if gamma < _HARD_GAMMA:
        return SoftAlignment(dtw(D)[1].matrix(), float(gamma))
    R = _soft_dtw_table(D, float(gamma))
    return SoftAlignment(_soft_dtw_grad(D, R, float(gamma)), float(gamma))


def enumerate_alignments(m, n) -> list[AlignmentPath]:
    """All members of the alignment set for an ``m x n`` grid (brute force).

    Only meant for tiny problems; ``m + n`` is capped at 14.
    """
    if m < 1 or n < 1:
        raise ValueError("shape must be positive")
    if m + n > 14:
        raise ValueError("enumeration guard: m + n must be <= 14")
    out = []

    def walk(i, j, acc):
        if (i, j) == (m - 1, n - 1):
            out.append(AlignmentPath(np.array(acc), (m, n)))
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < m and j + dj < n:
                acc.append((i + di, j + dj))
                walk(i + di, j + dj, acc)
                acc.pop()

    walk(0, 0, [(0, 0)])
    return out
