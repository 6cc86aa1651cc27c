"""Time series over pluggable metric spaces.

A :class:`TimeSeries` is an ordered array of points together with the metric
used to compare them. Points are either real vectors (shape ``(T, d)``) or
probability densities on a pixel grid (shape ``(T, h, w)``).

Distance matrices and cost matrices are plain ``numpy`` arrays.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from joblib import Parallel, delayed

__all__ = [
    "Euclidean",
    "SquaredEuclidean",
    "WassersteinGrid",
    "MetricKind",
    "TimeSeries",
    "IncompatibleSpacesError",
    "pairwise_distances",
    "cross_distances",
    "normalize",
    "apply_isometry",
    "rotation_2d",
    "resample",
    "load_series",
    "save_series",
    "gen_fixture",
    "render_grid_video",
    "FIXTURE_KINDS",
]


class IncompatibleSpacesError(ValueError):
    """Raised when a cross-space cost is requested between incomparable series."""


@dataclass(frozen=True)
class Euclidean:
    name = "euclidean"


@dataclass(frozen=True)
class SquaredEuclidean:
    name = "sqeuclidean"


@dataclass(frozen=True)
class WassersteinGrid:
    """Entropic 2-Wasserstein distance between densities on a pixel grid.

    ``epsilon=None`` selects ``0.01 * diag**2`` where ``diag`` is the diagonal
    of the unit square holding the cell centers.
    """

    epsilon: float | None = None
    iters: int = 200
    name = "wasserstein_grid"

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("WassersteinGrid epsilon must be positive")
        if int(self.iters) < 1:
            raise ValueError("WassersteinGrid iters must be a positive integer")


MetricKind = Union[Euclidean, SquaredEuclidean, WassersteinGrid]


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A metric time series.

    Parameters
    ----------
    points : array-like, shape (T, d) or (T, h, w)
        Vector points for Euclidean metrics, density grids for
        :class:`WassersteinGrid`.
    metric : MetricKind
    """

    points: np.ndarray
    metric: MetricKind = field(default_factory=Euclidean)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if isinstance(self.metric, WassersteinGrid):
            if pts.ndim != 3:
                raise ValueError("grid series need points of shape (T, h, w)")
            if np.any(pts < 0):
                raise ValueError("grid points must be nonnegative")
            sums = pts.reshape(len(pts), -1).sum(axis=1)
            if np.any(np.abs(sums - 1.0) > 1e-9):
                raise ValueError("grid points must sum to 1")
        else:
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2:
                raise ValueError("vector series need points of shape (T, d)")
        if len(pts) < 1:
            raise ValueError("a time series needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("time series contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        """Point dimension ``d`` or grid shape ``(h, w)``."""
        if self.is_grid:
            return self.points.shape[1:]
        return self.points.shape[1]

    @property
    def is_grid(self):
        return isinstance(self.metric, WassersteinGrid)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.metric == other.metric
                and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points))

    __hash__ = None


def _as_series(x) -> TimeSeries:
    return x if isinstance(x, TimeSeries) else TimeSeries(np.asarray(x))


def _vector_distances(a, b, metric):
    diff = a[:, None, :] - b[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if isinstance(metric, SquaredEuclidean):
        return sq
    return np.sqrt(sq)


def _grid_cost(shape):
    h, w = shape
    rows, cols = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w,
                             indexing="ij")
    centers = np.stack([rows.ravel(), cols.ravel()], axis=1)
    return _vector_distances(centers, centers, SquaredEuclidean())


def _grid_epsilon(metric: WassersteinGrid, shape):
    if metric.epsilon is not None:
        return metric.epsilon
    h, w = shape
    diag_sq = ((h - 1) / h) ** 2 + ((w - 1) / w) ** 2
    return 0.01 * diag_sq


def _grid_distances(a, b, metric, same=False, n_jobs=None):
    from .distribution import sinkhorn

    shape = a.shape[1:]
    cost = _grid_cost(shape)
    eps = _grid_epsilon(metric, shape)
    fa = a.reshape(len(a), -1)
    fb = b.reshape(len(b), -1)

    def ot(p, q):
        return sinkhorn(cost, p, q, epsilon=eps, max_iters=metric.iters,
                        tol=1e-9).value

    self_a = [ot(p, p) for p in fa]
    self_b = self_a if same else [ot(q, q) for q in fb]
    if same:
        pairs = [(i, k) for i in range(len(fa)) for k in range(i + 1, len(fa))]
    else:
        pairs = [(i, k) for i in range(len(fa)) for k in range(len(fb))]
    vals = Parallel(n_jobs=_threads(n_jobs), prefer="threads")(
        delayed(ot)(fa[i], fb[k]) for i, k in pairs)
    out = np.zeros((len(fa), len(fb)))
    for (i, k), v in zip(pairs, vals):
        # debiased divergence; clipped at zero for round-off
        div = v - 0.5 * self_a[i] - 0.5 * self_b[k]
        out[i, k] = math.sqrt(max(div, 0.0))
        if same:
            out[k, i] = out[i, k]
    return out


def _threads(n_jobs):
    if n_jobs is not None:
        return n_jobs
    env = os.environ.get("GDTW_THREADS")
    return int(env) if env else 1


def pairwise_distances(ts, n_jobs=None) -> np.ndarray:
    """Intra-series distance matrix ``D[i, k] = d(x_i, x_k)``.

    The result is exactly symmetric with an exactly zero diagonal.
    """
    ts = _as_series(ts)
    pts = ts.points
    if ts.is_grid:
        D = _grid_distances(pts, pts, ts.metric, same=True, n_jobs=n_jobs)
    else:
        D = _vector_distances(pts, pts, ts.metric)
        D = np.triu(D, 1)
        D = D + D.T
    np.fill_diagonal(D, 0.0)
    return D


def cross_distances(x, y, n_jobs=None) -> np.ndarray:
    """Cross-series cost matrix ``C[i, j] = d(x_i, y_j)``.

    Raises
    ------
    IncompatibleSpacesError
        If ``x`` and ``y`` do not live in the same metric space. Such pairs
        have no ground cost; compare them with GDTW instead.
    """
    x, y = _as_series(x), _as_series(y)
    if x.metric != y.metric or x.is_grid != y.is_grid or x.dim != y.dim:
        raise IncompatibleSpacesError(
            f"series live in incomparable spaces ({x.metric.name} dim {x.dim} "
            f"vs {y.metric.name} dim {y.dim}); no cross-space cost exists, "
            "use GDTW which only needs intra-series distances")
    if x.is_grid:
        return _grid_distances(x.points, y.points, x.metric, n_jobs=n_jobs)
    return _vector_distances(x.points, y.points, x.metric)


def normalize(D) -> np.ndarray:
    """Divide a distance matrix by its largest entry (all-zero input is returned as is)."""
    D = np.asarray(D, dtype=np.float64)
    top = D.max() if D.size else 0.0
    if top == 0.0:
        return D.copy()
    return D / top


def rotation_2d(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def apply_isometry(ts, rotation, translation=None) -> TimeSeries:
    """Map every point ``x`` to ``R @ x + t``."""
    ts = _as_series(ts)
    if ts.is_grid:
        raise ValueError("isometries are only defined for vector series")
    R = np.asarray(rotation, dtype=np.float64)
    d = ts.dim
    if R.shape != (d, d):
        raise ValueError(f"rotation must be {d}x{d}")
    if np.max(np.abs(R.T @ R - np.eye(d))) > 1e-10:
        raise ValueError("rotation matrix is not orthogonal")
    t = np.zeros(d) if translation is None else np.asarray(translation, float)
    return TimeSeries(ts.points @ R.T + t, ts.metric)


def resample(ts, length) -> TimeSeries:
    """Resample to ``length`` points uniformly in time.

    Vector series are linearly interpolated; grid series take the nearest frame.
    """
    ts = _as_series(ts)
    T = len(ts)
    pos = np.linspace(0.0, T - 1, length)
    if ts.is_grid:
        return TimeSeries(ts.points[np.rint(pos).astype(int)], ts.metric)
    grid = np.arange(T)
    pts = np.stack([np.interp(pos, grid, ts.points[:, k])
                    for k in range(ts.dim)], axis=1)
    return TimeSeries(pts, ts.metric)


# -- I/O ---------------------------------------------------------------------

def _metric_to_json(metric):
    out = {"kind": metric.name}
    if isinstance(metric, WassersteinGrid):
        out["epsilon"] = metric.epsilon
        out["iters"] = metric.iters
    return out


def _metric_from_json(obj):
    kind = obj.get("kind", "euclidean")
    if kind == "euclidean":
        return Euclidean()
    if kind == "sqeuclidean":
        return SquaredEuclidean()
    if kind == "wasserstein_grid":
        return WassersteinGrid(obj.get("epsilon"), int(obj.get("iters", 200)))
    raise ValueError(f"unknown metric kind {kind!r}")


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt
    ext = os.path.splitext(str(path))[1].lower()
    return "json" if ext == ".json" else "csv"


def load_series(path, format=None, header=False) -> list[TimeSeries]:
    """Read series from a CSV file (one step per row) or a JSON document.

    CSV files hold exactly one Euclidean series. JSON documents carry the
    metric and any number of series.
    """
    fmt = _infer_format(path, format)
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.strip():
        raise ValueError(f"{path}: empty file")
    if fmt == "json":
        doc = json.loads(text)
        metric = _metric_from_json(doc.get("metric", {}))
        items = doc.get("series")
        if not items:
            raise ValueError(f"{path}: no series in document")
        return [TimeSeries(np.array(item["points"], dtype=np.float64), metric)
                for item in items]
    if fmt != "csv":
        raise ValueError(f"unknown series format {fmt!r}")
    rows = list(csv.reader(text.splitlines()))
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    pts = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} != {width} columns)")
        try:
            pts.append([float(c) for c in row])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from None
    return [TimeSeries(np.array(pts))]


def save_series(path, series, format=None) -> None:
    """Write series with shortest round-trip float formatting (see :func:`load_series`)."""
    if isinstance(series, TimeSeries):
        series = [series]
    series = list(series)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        if len(series) != 1 or series[0].is_grid:
            raise ValueError("CSV holds exactly one vector series; use JSON")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for p in series[0].points:
                writer.writerow([repr(float(v)) for v in p])
        return
    if fmt != "json":
        raise ValueError(f"unknown series format {fmt!r}")
    metrics = {s.metric for s in series}
    if len(metrics) != 1:
        raise ValueError("all series in one JSON document must share a metric")
    doc = {
        "metric": _metric_to_json(series[0].metric),
        "series": [{"points": s.points.tolist()} for s in series],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


# -- synthetic fixtures --------------------------------------------------------

FIXTURE_KINDS = ("spiral", "circle", "folium", "noisy-copy")


def gen_fixture(kind, T, seed=0) -> TimeSeries:
    """Synthetic 2-D curves used as stand-ins for sketch data.

    ``circle`` samples the unit circle at angles ``2*pi*k/T``; ``spiral`` has
    strictly increasing radius; ``folium`` traces the loop of the folium of
    Descartes; ``noisy-copy`` is the spiral plus Gaussian noise (sd 0.05).
    """
    if T < 2:
        raise ValueError("fixtures need T >= 2")
    t = np.arange(T) / (T - 1)
    if kind == "circle":
        ang = 2 * np.pi * np.arange(T) / T
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    elif kind in ("spiral", "noisy-copy"):
        r = 0.2 + 0.8 * t
        ang = 3 * np.pi * t
        pts = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
        if kind == "noisy-copy":
            rng = np.random.default_rng(seed)
            pts = pts + 0.05 * rng.standard_normal(pts.shape)
    elif kind == "folium":
        # s = tan(theta) sweeps the loop from the origin back to the origin
        theta = (0.02 + 0.96 * t) * (np.pi / 2)
        s = np.tan(theta)
        pts = np.stack([3 * s / (1 + s**3), 3 * s**2 / (1 + s**3)], axis=1)
    else:
        raise ValueError(f"unknown fixture kind {kind!r}; expected one of {FIXTURE_KINDS}")
    return TimeSeries(pts)


def render_grid_video(ts, shape=(16, 16), sigma=None, metric=None) -> TimeSeries:
    """Render a 2-D curve as a sequence of Gaussian blobs on a pixel grid.

    Points are affinely mapped into the unit square (shared scale on both
    axes, 10% margin) and each frame is normalized to sum to one.
    """
    ts = _as_series(ts)
    if ts.is_grid or ts.dim != 2:
        raise ValueError("only 2-D vector series can be rendered")
    h, w = shape
    pts = ts.points
    lo = pts.min(axis=0)
    span = float(np.max(pts.max(axis=0) - lo)) or 1.0
    unit = 0.1 + 0.8 * (pts - lo) / span
    sigma = 1.0 / max(h, w) if sigma is None else sigma
    rows = (np.arange(h) + 0.5) / h
    cols = (np.arange(w) + 0.5) / w
    frames = np.empty((len(pts), h, w))
    for k, (px, py) in enumerate(unit):
        g = np.exp(-((rows[:, None] - px) ** 2 + (cols[None, :] - py) ** 2)
                   / (2 * sigma**2))
        frames[k] = g / g.sum()
    return TimeSeries(frames, metric or WassersteinGrid())
