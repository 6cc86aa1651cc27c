import numpy as np
import pytest
from scipy.optimize import minimize

from gromov_dtw.barycenter import barycenter_update, gdtw_barycenter, mds_embed
from gromov_dtw.dtw import AlignmentPath
from gromov_dtw.gdtw import FwOptions, gdtw_objective
from gromov_dtw.series import TimeSeries, apply_isometry, gen_fixture, pairwise_distances

from conftest import brute_force_objective, euclid_dist, random_orthogonal


def _numerical_barycenter(D_list, A_list, alpha, T):
    iu = np.triu_indices(T, 1)

    def unpack(v):
        D = np.zeros((T, T))
        D[iu] = v
        return D + D.T

    def f(v):
        D = unpack(v)
        return sum(a * brute_force_objective(D, Dj, Aj) for a, Dj, Aj in zip(alpha, D_list, A_list))

    res = minimize(f, np.zeros(len(iu[0])), method="BFGS", options={"gtol": 1e-10})
    return unpack(res.x), res.fun


def test_identity_cases(rng):
    Dx = euclid_dist(rng.standard_normal((4, 2)))
    assert np.array_equal(barycenter_update([Dx], [np.eye(4)], [1.0]), Dx)
    D2 = euclid_dist(rng.standard_normal((4, 2)))
    out = barycenter_update([Dx, D2], [np.eye(4), np.eye(4)], [0.5, 0.5])
    assert np.allclose(out, (Dx + D2) / 2, rtol=0, atol=1e-15)


def test_matches_numerical_minimizer():
    rng = np.random.default_rng(3)
    T = 3
    for _ in range(5):
        D_list, A_list = [], []
        for Tj in (3, 4):
            D_list.append(euclid_dist(rng.standard_normal((Tj, 2))))
            A_list.append(AlignmentPath.random(T, Tj, rng).matrix())
        alpha = rng.dirichlet([1, 1])
        D = barycenter_update(D_list, A_list, alpha)
        ref, fref = _numerical_barycenter(D_list, A_list, alpha, T)
        assert np.allclose(D, ref, atol=1e-6)
        fD = sum(a * brute_force_objective(D, Dj, Aj) for a, Dj, Aj in zip(alpha, D_list, A_list))
        assert fD <= fref + 1e-10


def test_update_properties(rng):
    T = 6
    D_list = [euclid_dist(rng.standard_normal((Tj, 2))) for Tj in (5, 7, 9)]
    A_list = [AlignmentPath.random(T, len(Dj), rng) for Dj in D_list]
    alpha = np.array([0.2, 0.3, 0.5])
    D = barycenter_update(D_list, A_list, alpha)
    assert np.array_equal(D, D.T) and np.all(np.diag(D) == 0) and np.all(D >= 0)
    # stationarity: the matrix does not depend on the previous barycenter, so a
    # repeat with the same alignments gives the same matrix
    assert np.allclose(barycenter_update(D_list, A_list, alpha), D, rtol=0, atol=1e-12)
    perm = [2, 0, 1]
    Dp = barycenter_update([D_list[k] for k in perm], [A_list[k] for k in perm], alpha[perm])
    assert np.allclose(Dp, D, rtol=0, atol=1e-12)
    # never worse than any random symmetric candidate at fixed alignments
    obj = lambda M: sum(a * gdtw_objective(M, Dj, Aj) for a, Dj, Aj in zip(alpha, D_list, A_list))
    for _ in range(20):
        E = rng.standard_normal((T, T)) * 0.05
        E = E + E.T
        np.fill_diagonal(E, 0)
        assert obj(D) <= obj(D + E) + 1e-12


def test_update_errors(rng):
    D = euclid_dist(rng.standard_normal((3, 2)))
    with pytest.raises(ValueError):
        barycenter_update([D], [np.eye(3)], [0.7])
    with pytest.raises(ValueError):
        barycenter_update([D, D], [np.eye(3)], [0.5, 0.5])
    with pytest.raises(ValueError):
        barycenter_update([D], [np.eye(4)], [1.0])


def test_self_barycenter():
    x = gen_fixture("spiral", 12)
    res = gdtw_barycenter([x], T=12, opts=FwOptions(restarts=0))
    assert res.objective_trace[-1] == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(res.distance_matrix, pairwise_distances(x) / pairwise_distances(x).max(), atol=1e-14)


def test_isometric_copies(rng):
    x = gen_fixture("folium", 16)
    copies = [apply_isometry(x, random_orthogonal(rng), rng.standard_normal(2)) for _ in range(4)]
    res = gdtw_barycenter(copies, T=16, opts=FwOptions(restarts=0))
    assert res.objective_trace[-1] <= 1e-6
    Dsrc = pairwise_distances(x)
    Dsrc /= Dsrc.max()
    P = res.alignments[0].matrix()
    # compare after re-aligning through the solver's alignment of copy 0
    assert np.max(np.abs(res.distance_matrix - P @ Dsrc @ P.T)) <= 1e-3


def test_trace_nonincreasing_hard(rng):
    series = [gen_fixture("noisy-copy", int(T), seed=s) for s, T in enumerate((14, 18, 11))]
    res = gdtw_barycenter(series, T=12, opts=FwOptions(restarts=1, seed=4), outer_iters=15)
    tr = np.array(res.objective_trace)
    assert np.all(tr >= 0)
    assert np.all(np.diff(tr) <= 1e-12)
    assert [a.shape for a in res.alignments] == [(12, 14), (12, 18), (12, 11)]


def test_embedding_output():
    series = [gen_fixture("circle", 10), gen_fixture("spiral", 14)]
    res = gdtw_barycenter(series, T=10, opts=FwOptions(restarts=0), embed_dim=2, outer_iters=5)
    assert isinstance(res.embedded, TimeSeries) and res.embedded.points.shape == (10, 2)


def test_mds_examples():
    assert np.array_equal(mds_embed(np.zeros((4, 4)), 2).points, np.zeros((4, 2)))
    tri = np.array([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]])
    D = euclid_dist(tri)
    assert np.allclose(euclid_dist(mds_embed(D, 2).points), D, atol=1e-6)
    line = np.column_stack([np.array([0.0, 1.0, 2.5, 4.0]), np.zeros(4)])
    E = mds_embed(euclid_dist(line), 2).points
    assert np.max(np.abs(E[:, 1])) <= 1e-6
    with pytest.raises(ValueError):
        mds_embed(D, 0)
    with pytest.raises(ValueError):
        mds_embed(D, 4)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_mds_round_trip(rng, d):
    P = rng.standard_normal((12, d))
    D = euclid_dist(P)
    assert np.max(np.abs(euclid_dist(mds_embed(D, d).points) - D)) <= 1e-6
