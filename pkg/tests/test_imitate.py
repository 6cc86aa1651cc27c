import numpy as np
import pytest

from gromov_dtw.dtw import AlignmentPath
from gromov_dtw.gdtw import FwOptions, gdtw, gdtw_objective, prepare_distances
from gromov_dtw.imitate import (
    DivergenceError,
    ImitationProblem,
    imitate,
    imitation_loss,
    rollout,
    rollout_vjp,
    trajectory_grad,
)
from gromov_dtw.series import TimeSeries, apply_isometry, gen_fixture, normalize, resample

from conftest import euclid_dist, random_orthogonal


def test_rollout_examples(rng):
    x0 = np.array([0.5, -1.0])
    assert np.array_equal(rollout(np.zeros((4, 2)), x0).points, np.tile(x0, (5, 1)))
    pts = rollout(np.array([[1.0, 0.0], [1.0, 0.0]]), np.zeros(2), T=3).points
    assert np.array_equal(pts, [[0, 0], [1, 0], [2, 0]])
    a = rng.normal(scale=2.0, size=(9, 2))
    pts = rollout(a, x0, a_max=1.0).points
    ref = [x0.copy()]
    for step in a:
        ref.append(ref[-1] + np.clip(step, -1.0, 1.0))
    assert np.allclose(pts, ref, rtol=0, atol=1e-14)
    assert np.all(np.abs(np.diff(pts, axis=0)) <= 1.0)
    with pytest.raises(ValueError):
        rollout(np.zeros((3, 2)), x0, T=5)


def test_rollout_vjp_matches_jacobian(rng):
    a = rng.normal(size=(6, 2))
    G = rng.normal(size=(7, 2))
    J = np.tril(np.ones((7, 6)), -1)  # state t is x0 plus actions before t
    assert np.allclose(rollout_vjp(G, a), J.T @ G, atol=1e-14)


def test_problem_validation():
    e = gen_fixture("spiral", 5)
    with pytest.raises(ValueError):
        ImitationProblem(e, horizon=1)
    with pytest.raises(ValueError):
        ImitationProblem(e, horizon=5, a_max=0)
    with pytest.raises(ValueError):
        ImitationProblem(e, horizon=5, learn_rate=-1)


def test_loss_isometric_and_self(rng):
    e = gen_fixture("spiral", 15)
    assert imitation_loss(e, e)[0] == 0.0
    traj = apply_isometry(e, random_orthogonal(rng), rng.standard_normal(2))
    assert imitation_loss(traj, e)[0] <= 1e-6


def test_loss_cache_bypass(rng):
    e = gen_fixture("folium", 12)
    traj = TimeSeries(np.cumsum(rng.normal(size=(10, 2)), axis=0))
    opts = FwOptions(restarts=0)
    cached = imitation_loss(traj, e, opts=opts, expert_D=prepare_distances(e))[0]
    assert cached == imitation_loss(traj, e, opts=opts)[0]
    assert cached == gdtw(traj, e, opts).value
    soft = imitation_loss(traj, e, gamma=0.5, opts=opts)[0]
    assert soft > 0


def test_action_gradient_matches_finite_differences(rng):
    e = gen_fixture("spiral", 8)
    eD = normalize(euclid_dist(e.points))
    a = rng.normal(scale=0.3, size=(6, 2))
    x0 = np.array([0.2, 0.1])
    A = AlignmentPath.random(7, 8, rng)

    def loss(actions):
        D = euclid_dist(rollout(actions, x0).points)
        return gdtw_objective(D / D.max(), eD, A)

    g = rollout_vjp(trajectory_grad(rollout(a, x0), eD, A), a)
    fd = np.zeros_like(a)
    h = 1e-6
    for idx in np.ndindex(a.shape):
        E = np.zeros_like(a)
        E[idx] = h
        fd[idx] = (loss(a + E) - loss(a - E)) / (2 * h)
    assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def test_expert_equal_to_rollout_stays_zero(rng):
    a = rng.normal(scale=0.3, size=(9, 2))
    expert = rollout(a, np.zeros(2))
    res = imitate(ImitationProblem(expert, horizon=10, init_actions=a, steps=20))
    assert res.loss_history == [0.0] * 21
    assert np.array_equal(res.actions, a)


def test_history_shape_and_bounds():
    e = gen_fixture("circle", 12)
    res = imitate(ImitationProblem(e, horizon=12, steps=30, a_max=0.5))
    assert len(res.loss_history) == 31
    assert all(np.isfinite(v) and v >= 0 for v in res.loss_history)
    assert np.all(np.abs(np.diff(res.trajectory.points, axis=0)) <= 0.5 + 1e-15)


def test_translation_invariance_of_problem():
    e = gen_fixture("spiral", 12)
    t = np.array([3.0, -2.0])
    base = imitate(ImitationProblem(e, horizon=12, steps=25))
    moved = imitate(ImitationProblem(apply_isometry(e, np.eye(2), t), horizon=12, steps=25, start_state=t))
    assert np.allclose(base.loss_history, moved.loss_history, rtol=1e-8, atol=1e-12)


def test_spiral_imitation_decreases():
    e = gen_fixture("spiral", 20)
    res = imitate(ImitationProblem(e, horizon=20, steps=150))
    assert res.loss_history[-1] < 0.1 * res.loss_history[0]


def test_callback_and_soft_variant():
    e = gen_fixture("circle", 10)
    seen = []
    res = imitate(ImitationProblem(e, horizon=10, steps=5, gamma=0.5),
                  callback=lambda step, loss, traj: seen.append(step))
    assert seen == list(range(6))
    assert len(res.loss_history) == 6


def test_divergence_guard(rng):
    # normalized losses are bounded, so blow-up shows relative to a tiny start
    a = rng.normal(scale=0.3, size=(9, 2))
    expert = rollout(a + 1e-7 * rng.normal(size=a.shape), np.zeros(2))
    with pytest.raises(DivergenceError):
        imitate(ImitationProblem(expert, horizon=10, steps=5, init_actions=a,
                                 learn_rate=1e7, clip_norm=1e9, a_max=1e9))
