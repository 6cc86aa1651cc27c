import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gromov_dtw.series import (
    FIXTURE_KINDS,
    Euclidean,
    IncompatibleSpacesError,
    SquaredEuclidean,
    TimeSeries,
    WassersteinGrid,
    apply_isometry,
    cross_distances,
    gen_fixture,
    load_series,
    normalize,
    pairwise_distances,
    render_grid_video,
    resample,
    rotation_2d,
    save_series,
)

from conftest import random_orthogonal


def test_single_point_distance():
    assert np.array_equal(pairwise_distances(TimeSeries([[1.5, -2.0]])), [[0.0]])


def test_three_four_five():
    D = pairwise_distances(TimeSeries([[0.0, 0.0], [3.0, 4.0]]))
    assert np.array_equal(D, [[0, 5], [5, 0]])


def test_real_line():
    D = pairwise_distances(TimeSeries([[0.0], [1.0], [3.0]]))
    assert np.array_equal(D, [[0, 1, 3], [1, 0, 2], [3, 2, 0]])


def test_squared_euclidean():
    D = pairwise_distances(TimeSeries([[0.0], [1.0], [3.0]], SquaredEuclidean()))
    assert np.array_equal(D, [[0, 1, 9], [1, 0, 4], [9, 4, 0]])


def test_cross_distances_line():
    x = TimeSeries([[0.0], [1.0]])
    y = TimeSeries([[0.0], [2.0]])
    assert np.array_equal(cross_distances(x, y), [[0, 2], [1, 1]])
    assert np.array_equal(cross_distances(TimeSeries([[0.0, 0.0]]), TimeSeries([[0.0, 0.0]])), [[0]])


def test_cross_distances_elementwise(rng):
    x = TimeSeries(rng.standard_normal((4, 3)))
    y = TimeSeries(rng.standard_normal((5, 3)))
    C = cross_distances(x, y)
    for i in range(4):
        for j in range(5):
            assert C[i, j] == pytest.approx(np.linalg.norm(x.points[i] - y.points[j]), rel=1e-14)


def test_cross_distances_incompatible_mentions_gdtw():
    x = TimeSeries(np.zeros((3, 2)))
    y = TimeSeries(np.zeros((3, 3)))
    with pytest.raises(IncompatibleSpacesError, match="GDTW"):
        cross_distances(x, y)
    with pytest.raises(IncompatibleSpacesError):
        cross_distances(x, TimeSeries(np.zeros((3, 2)), SquaredEuclidean()))


def test_normalize_examples():
    assert np.array_equal(normalize([[0, 2], [2, 0]]), [[0, 1], [1, 0]])
    assert np.array_equal(normalize(np.zeros((3, 3))), np.zeros((3, 3)))
    out = normalize([[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    assert np.allclose(out, [[0, 1 / 3, 1], [1 / 3, 0, 2 / 3], [1, 2 / 3, 0]], rtol=0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 2), elements=st.floats(-100, 100)))
def test_pairwise_symmetric_zero_diag_and_normalize_idempotent(pts):
    for metric in (Euclidean(), SquaredEuclidean()):
        D = pairwise_distances(TimeSeries(pts, metric))
        assert np.array_equal(D, D.T)
        assert np.all(np.diag(D) == 0)
        assert np.all(D >= 0)
        N = normalize(D)
        assert np.array_equal(normalize(N), N)
        assert N.max() in (0.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_isometry_preserves_distances(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    x = TimeSeries(rng.standard_normal((7, d)))
    y = apply_isometry(x, random_orthogonal(rng, d), rng.standard_normal(d))
    assert np.allclose(pairwise_distances(y), pairwise_distances(x), rtol=0, atol=1e-10)


def test_apply_isometry_examples():
    x = TimeSeries([[1.0, 0.0], [0.5, 2.0]])
    assert apply_isometry(x, np.eye(2), np.zeros(2)) == x
    y = apply_isometry(TimeSeries([[1.0, 0.0]]), rotation_2d(np.pi))
    assert np.allclose(y.points, [[-1.0, 0.0]], atol=1e-15)
    with pytest.raises(ValueError, match="orthogonal"):
        apply_isometry(x, np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries([[np.nan, 0.0]])
    with pytest.raises(ValueError):
        TimeSeries(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        TimeSeries(np.ones((2, 3)), WassersteinGrid())
    ts = TimeSeries([[1.0, 2.0]])
    with pytest.raises(ValueError):
        ts.points[0, 0] = 5.0


def test_csv_roundtrip(tmp_path, rng):
    ts = TimeSeries(rng.standard_normal((5, 2)) * 1e3)
    path = tmp_path / "s.csv"
    save_series(path, [ts])
    [back] = load_series(path)
    assert np.array_equal(back.points, ts.points)


def test_json_roundtrip_grid(tmp_path):
    video = render_grid_video(gen_fixture("spiral", 4), shape=(5, 6))
    path = tmp_path / "v.json"
    save_series(path, [video, video])
    back = load_series(path)
    assert len(back) == 2
    assert back[0] == video
    assert back[0].metric == video.metric
    with pytest.raises(ValueError, match="share a metric"):
        save_series(path, [video, gen_fixture("circle", 3)])


def test_csv_shape_and_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("x,y\n1,2\n3,4\n5,6\n")
    [ts] = load_series(p, header=True)
    assert (len(ts), ts.dim) == (3, 2)
    with pytest.raises(ValueError):
        load_series(p)


def test_load_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(ValueError):
        load_series(empty)
    ragged = tmp_path / "r.csv"
    ragged.write_text("1,2\n3\n")
    with pytest.raises(ValueError):
        load_series(ragged)
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"series": []}))
    with pytest.raises(ValueError):
        load_series(bad)


def test_fixtures():
    c = gen_fixture("circle", 4)
    assert np.allclose(c.points, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    for kind in FIXTURE_KINDS:
        assert gen_fixture(kind, 12, seed=3) == gen_fixture(kind, 12, seed=3)
    assert gen_fixture("noisy-copy", 12, seed=1) != gen_fixture("noisy-copy", 12, seed=2)
    s = gen_fixture("spiral", 40).points
    r = np.linalg.norm(s, axis=1)
    assert np.all(np.diff(r) > 0)
    with pytest.raises(ValueError):
        gen_fixture("square", 5)
    with pytest.raises(ValueError):
        gen_fixture("circle", 1)


def test_resample_endpoints():
    x = gen_fixture("spiral", 10)
    y = resample(x, 25)
    assert len(y) == 25
    assert np.array_equal(y.points[0], x.points[0])
    assert np.allclose(y.points[-1], x.points[-1])
    assert resample(x, 10) == x


def test_grid_video_frames_are_densities():
    v = render_grid_video(gen_fixture("circle", 6), shape=(8, 8))
    assert v.is_grid and v.points.shape == (6, 8, 8)
    assert np.allclose(v.points.sum(axis=(1, 2)), 1.0)


def test_wasserstein_grid_distances():
    v = render_grid_video(gen_fixture("circle", 5), shape=(12, 12))
    D = pairwise_distances(v)
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0)
    # blobs far apart are farther in W2 than neighbours
    assert D[0, 2] > D[0, 1] > 0


def test_wasserstein_grid_tracks_translation():
    """Debiased entropic W2 between shifted blobs is close to the shift length."""
    pts = TimeSeries([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
    v = render_grid_video(pts, shape=(16, 16))
    D = pairwise_distances(v)
    ratio = D[0, 2] / D[0, 1]
    assert ratio == pytest.approx(2.0, rel=0.05)
    assert D[0, 1] > 0


def test_thread_count_does_not_change_result(monkeypatch):
    v = render_grid_video(gen_fixture("spiral", 5), shape=(8, 8))
    D1 = pairwise_distances(v, n_jobs=1)
    D4 = pairwise_distances(v, n_jobs=4)
    assert np.array_equal(D1, D4)
