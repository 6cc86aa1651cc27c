"""DTW-GI baseline: DTW jointly optimized over an orthogonal (affine) map.

The objective is ``min_{R, t} min_A sum_{(i, j) in A} ||x_i - (R y_j + t)||**2``,
solved by alternating DTW (fixed map) and orthogonal Procrustes (fixed path).
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .dtw import AlignmentPath, dtw
from .series import _as_series, rotation_2d

__all__ = ["Invariance", "GiResult", "procrustes", "initial_maps", "dtw_gi"]


class Invariance(enum.Enum):
    ROTATION = "rotation"
    ROTATION_TRANSLATION = "rotation-translation"


@dataclass
class GiResult:
    value: float
    path: AlignmentPath
    rotation: np.ndarray
    translation: np.ndarray
    trace: list

    @property
    def mean_cost(self) -> float:
        """Cost per aligned pair."""
        return self.value / len(self.path)


def procrustes(x, y, translate):
    """Orthogonal ``R`` (and ``t``) minimizing ``sum ||x_k - R y_k - t||**2`` over paired rows.

    Reflections are allowed.
    """
    if translate:
        mx, my = x.mean(axis=0), y.mean(axis=0)
    else:
        mx = my = np.zeros(x.shape[1])
    M = (x - mx).T @ (y - my)
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    t = mx - R @ my if translate else np.zeros(x.shape[1])
    return R, t


def _sq_cost(x, z):
    diff = x[:, None, :] - z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def initial_maps(d, mode="grid"):
    """Starting orthogonal maps for the alternation.

    ``"identity"`` gives the identity only. ``"grid"`` gives, in 2-D, the
    rotations by multiples of 22.5 degrees and their reflections; otherwise
    all signed permutation matrices.
    """
    if mode == "identity":
        return [np.eye(d)]
    if mode != "grid":
        raise ValueError(f"unknown init mode {mode!r}")
    if d == 2:
        flip = np.diag([1.0, -1.0])
        rots = [rotation_2d(k * np.pi / 8) for k in range(16)]
        return rots + [R @ flip for R in rots]
    out = []
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1.0, -1.0), repeat=d):
            M = np.zeros((d, d))
            M[np.arange(d), perm] = signs
            out.append(M)
    # identity first so ties resolve to it
    out.sort(key=lambda M: not np.array_equal(M, np.eye(d)))
    return out


def _alternate(X, Y, R, t, translate, iters):
    trace = []
    path = None
    for _ in range(iters):
        value, new_path = dtw(_sq_cost(X, Y @ R.T + t))
        trace.append(value)
        if new_path == path:
            break
        path = new_path
        i, j = path.steps[:, 0], path.steps[:, 1]
        R_new, t_new = procrustes(X[i], Y[j], translate)
        # keep the previous map unless Procrustes strictly improves the path cost
        old = np.sum((X[i] - Y[j] @ R.T - t) ** 2)
        new = np.sum((X[i] - Y[j] @ R_new.T - t_new) ** 2)
        if new < old:
            R, t = R_new, t_new
    value, path = dtw(_sq_cost(X, Y @ R.T + t))
    if value < trace[-1]:
        trace.append(value)
    return GiResult(value, path, R, t, trace)


def dtw_gi(x, y, invariance=Invariance.ROTATION, iters=30, init="grid") -> GiResult:
    """DTW invariant to orthogonal maps (optionally also translations) of ``y``.

    For each starting map the DTW path and the Procrustes map are updated in
    turn until the path repeats or ``iters`` alternations; the best run is
    returned. With translations both series are first centered on their
    means and the translation is re-estimated at every Procrustes step.
    """
    x, y = _as_series(x), _as_series(y)
    invariance = Invariance(invariance)
    if x.is_grid or y.is_grid or x.dim != y.dim:
        raise ValueError("DTW-GI needs vector series of equal dimension")
    d = x.dim
    if d > 3:
        raise ValueError("DTW-GI is limited to dimension <= 3")
    translate = invariance is Invariance.ROTATION_TRANSLATION
    X, Y = x.points, y.points
    best = None
    for R0 in initial_maps(d, init):
        t0 = X.mean(axis=0) - R0 @ Y.mean(axis=0) if translate else np.zeros(d)
        res = _alternate(X, Y, R0, t0, translate, iters)
        if best is None or res.value < best.value:
            best = res
    return best
