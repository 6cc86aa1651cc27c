"""Imitation of an expert trajectory through a GDTW loss.

The agent is a 2-D single integrator ``x[t+1] = x[t] + clip(a[t], -a_max, a_max)``
driven by an open-loop action sequence. The expert may live in any metric
space (for example a sequence of density grids); only its intra-series
distances enter the loss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .gdtw import (
    FwOptions,
    Given,
    RandomMonotone,
    distance_grad,
    gdtw,
    points_grad,
    prepare_distances,
    raw_distance_grad,
    soft_gdtw,
)
from .series import TimeSeries, normalize, pairwise_distances

__all__ = [
    "ImitationProblem",
    "ImitationResult",
    "DivergenceError",
    "rollout",
    "rollout_vjp",
    "imitation_loss",
    "trajectory_grad",
    "imitate",
]


class DivergenceError(RuntimeError):
    """Raised when the loss blows up during imitation."""


@dataclass
class ImitationProblem:
    """Settings of one imitation run.

    ``init_actions`` of shape ``(horizon - 1, 2)`` overrides the default
    random start (normal with scale ``0.1 * a_max``, drawn from ``seed``).
    """

    expert: TimeSeries
    horizon: int
    start_state: np.ndarray = field(default_factory=lambda: np.zeros(2))
    a_max: float = 1.0
    gamma: float = 0.0
    learn_rate: float = 5e-3
    steps: int = 500
    clip_norm: float = 100.0
    rerandomize_every: int = 50
    opts: FwOptions = field(default_factory=lambda: FwOptions(restarts=0))
    init_actions: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if not self.a_max > 0:
            raise ValueError("a_max must be positive")
        if not self.learn_rate > 0:
            raise ValueError("learn_rate must be positive")
        self.start_state = np.asarray(self.start_state, dtype=np.float64)


@dataclass
class ImitationResult:
    trajectory: TimeSeries
    loss_history: list
    actions: np.ndarray
    alignment: object = None


def rollout(actions, x0, T=None, a_max=np.inf) -> TimeSeries:
    """States of the clipped single integrator; ``len(actions)`` must be ``T - 1``."""
    actions = np.asarray(actions, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    T = len(actions) + 1 if T is None else T
    if actions.shape != (T - 1, x0.size):
        raise ValueError(f"expected actions of shape {(T - 1, x0.size)}, got {actions.shape}")
    steps = np.clip(actions, -a_max, a_max)
    states = np.vstack([x0, x0 + np.cumsum(steps, axis=0)])
    return TimeSeries(states)


def rollout_vjp(state_grad, actions, a_max=np.inf):
    """Pull a gradient on states back to actions (reverse prefix sum, clip mask).

    Actions on the bound pass the gradient through, matching the projected
    update in :func:`imitate`.
    """
    actions = np.asarray(actions, dtype=np.float64)
    tail = np.cumsum(state_grad[:0:-1], axis=0)[::-1]
    return tail * (np.abs(actions) <= a_max)


def imitation_loss(traj, expert, gamma=0.0, opts=None, expert_D=None):
    """GDTW (``gamma == 0``) or soft GDTW loss between a trajectory and the expert.

    ``expert_D`` is the expert's distance matrix, normalized if
    ``opts.normalize_inputs``; pass it to avoid recomputing grid distances.

    Returns
    -------
    value : float
    alignment : AlignmentPath or SoftAlignment, shape ``(len(traj), len(expert))``
    """
    opts = opts or FwOptions(restarts=0)
    Ey = expert_D if expert_D is not None else prepare_distances(expert, opts.normalize_inputs)
    Dx = prepare_distances(traj, opts.normalize_inputs)
    if gamma > 0:
        res = soft_gdtw(Dx, Ey, replace(opts, gamma=gamma, normalize_inputs=False))
    else:
        res = gdtw(Dx, Ey, replace(opts, gamma=0.0, normalize_inputs=False))
    return res.value, res.alignment


def trajectory_grad(traj, expert_D, A, normalize_inputs=True):
    """Gradient of the objective in the trajectory points at a fixed alignment."""
    D_raw = pairwise_distances(traj)
    D = normalize(D_raw) if normalize_inputs else D_raw
    G, _ = distance_grad(D, expert_D, A)
    return points_grad(traj, raw_distance_grad(G, D_raw, normalize_inputs))


def imitate(problem: ImitationProblem, callback=None) -> ImitationResult:
    """Gradient descent on the open-loop actions.

    Each step solves the alignment (warm-started from the previous step and,
    every ``rerandomize_every`` steps, also from a random path), takes the
    gradient of the loss at that alignment, backpropagates it through the
    rollout and applies a clipped gradient step. ``loss_history`` holds
    ``steps + 1`` values: one per step and the final loss.
    """
    p = problem
    rng = np.random.default_rng(p.seed)
    if p.init_actions is not None:
        actions = np.array(p.init_actions, dtype=np.float64)
    else:
        actions = 0.1 * p.a_max * rng.standard_normal((p.horizon - 1, p.start_state.size))
    actions = np.clip(actions, -p.a_max, p.a_max)
    norm = p.opts.normalize_inputs
    expert_D = prepare_distances(p.expert, norm)
    solve = soft_gdtw if p.gamma > 0 else gdtw
    base = replace(p.opts, gamma=p.gamma, normalize_inputs=False, restarts=0)

    history = []
    A = None
    first = None
    for step in range(p.steps + 1):
        traj = rollout(actions, p.start_state, p.horizon, p.a_max)
        Dx = prepare_distances(traj, norm)
        candidates = [base if A is None else replace(base, init=Given(A))]
        if A is not None and p.rerandomize_every and step % p.rerandomize_every == 0:
            candidates.append(replace(base, init=RandomMonotone(int(rng.integers(2**63)))))
        results = [solve(Dx, expert_D, o) for o in candidates]
        res = min(results, key=lambda r: r.value)
        A = res.alignment
        loss = res.value
        history.append(loss)
        if first is None:
            first = loss
        if not math.isfinite(loss) or (first > 0 and loss > 1e3 * first):
            raise DivergenceError(f"loss diverged at step {step}: {loss!r}")
        if callback is not None:
            callback(step, loss, traj)
        if step == p.steps:
            break
        g_states = trajectory_grad(traj, expert_D, A, norm)
        g_actions = rollout_vjp(g_states, actions, p.a_max)
        gnorm = np.linalg.norm(g_actions)
        if gnorm > p.clip_norm:
            g_actions *= p.clip_norm / gnorm
        actions = np.clip(actions - p.learn_rate * g_actions, -p.a_max, p.a_max)
    return ImitationResult(traj, history, actions, A)
