"""Finite discounted MDPs and the policy <-> occupation-measure correspondence.

Policies and occupation measures are plain ``(n_states, n_actions)`` arrays.
Flattening them in C order gives the state-action index ``s * n_actions + a``
used by every matrix in this package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12
RESIDUAL_TOL = 1e-8


class ZeroStateMassError(ValueError):
    """An occupation measure puts no mass on a state, so no policy is defined there."""

    def __init__(self, state: int):
        super().__init__(f"occupation measure has zero mass at state {state}")
        self.state = state


@dataclass(frozen=True, eq=False)
class Mdp:
    """Tabular MDP with ``transition[s, a, s']`` = P(s' | s, a)."""

    transition: np.ndarray
    discount: float
    initial_dist: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        alpha = np.array(self.initial_dist, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if alpha.shape != (P.shape[0],):
            raise ValueError(f"initial_dist must have shape ({P.shape[0]},), got {alpha.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=2) - 1.0) > STOCHASTIC_TOL):
            raise ValueError("every transition row must be a probability distribution")
        if np.any(alpha < 0) or abs(alpha.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValueError("initial_dist must be a probability distribution")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        P.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial_dist", alpha)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    @property
    def mass_upper_bound(self) -> float:
        """Largest possible state mass of any occupation measure, |A| / (1 - gamma)."""
        return self.n_actions / (1.0 - self.discount)


@dataclass(frozen=True, eq=False)
class FeasibilityPolytope:
    """The set {mu >= 0 : eq_matrix @ mu = eq_rhs} of valid occupation measures."""

    eq_matrix: np.ndarray
    eq_rhs: np.ndarray

    def residual(self, mu) -> float:
        return float(np.max(np.abs(self.eq_matrix @ np.ravel(mu) - self.eq_rhs)))


def state_indicator(n_states: int, n_actions: int) -> np.ndarray:
    """Binary matrix B with B[(s, a), s'] = 1 iff s == s'."""
    return np.repeat(np.eye(n_states), n_actions, axis=0)


def feasibility_polytope(mdp: Mdp) -> FeasibilityPolytope:
    B = state_indicator(mdp.n_states, mdp.n_actions)
    P = mdp.transition.reshape(mdp.n_pairs, mdp.n_states)
    return FeasibilityPolytope((B - mdp.discount * P).T, mdp.initial_dist.copy())


def check_policy(policy, n_states: int, n_actions: int) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise ValueError(f"policy must have shape ({n_states}, {n_actions}), got {pi.shape}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise ValueError("policy rows must be probability distributions")
    return pi


def state_kernel(mdp: Mdp, policy) -> np.ndarray:
    """State-to-state transition matrix induced by ``policy``."""
    return np.einsum("sa,sat->st", policy, mdp.transition)


def state_distribution(mdp: Mdp, policy) -> np.ndarray:
    """Discounted state visitation d solving d = alpha + gamma * P_pi^T d."""
    P_pi = state_kernel(mdp, policy)
    lhs = np.eye(mdp.n_states) - mdp.discount * P_pi.T
    return np.linalg.solve(lhs, mdp.initial_dist)


def occupation_from_policy(mdp: Mdp, policy) -> np.ndarray:
    """Exact discounted occupation measure of a stationary policy."""
    pi = check_policy(policy, mdp.n_states, mdp.n_actions)
    d = state_distribution(mdp, pi)
    mu = d[:, None] * pi
    residual = feasibility_polytope(mdp).residual(mu)
    if residual > RESIDUAL_TOL:
        raise RuntimeError(f"occupation measure residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return mu


def occupation_from_policies(mdp: Mdp, policies: np.ndarray) -> np.ndarray:
    """Batched version of :func:`occupation_from_policy` over a leading axis.

    No validation; meant for brute-force grids.
    """
    P_pi = np.einsum("ksa,sat->kst", policies, mdp.transition)
    lhs = np.eye(mdp.n_states)[None] - mdp.discount * np.swapaxes(P_pi, 1, 2)
    rhs = np.broadcast_to(mdp.initial_dist, (len(policies), mdp.n_states))[..., None]
    d = np.linalg.solve(lhs, rhs)[..., 0]
    return d[:, :, None] * policies


def policy_from_occupation(mu, zero_mass: str = "raise") -> np.ndarray:
    """Normalize each state row of ``mu`` into an action distribution.

    ``zero_mass="uniform"`` assigns the uniform distribution to states with no
    mass instead of raising :class:`ZeroStateMassError`.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 2:
        raise ValueError(f"occupation measure must be 2-D (S, A), got shape {mu.shape}")
    mass = mu.sum(axis=1)
    empty = np.flatnonzero(mass <= 0)
    if len(empty):
        if zero_mass == "raise":
            raise ZeroStateMassError(int(empty[0]))
        if zero_mass != "uniform":
            raise ValueError(f"unknown zero_mass mode {zero_mass!r}")
    pi = np.empty_like(mu)
    full = mass > 0
    pi[full] = mu[full] / mass[full, None]
    pi[~full] = 1.0 / mu.shape[1]
    return pi


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    n_states: int
    n_actions: int

    def __post_init__(self):
        if len(self.states) != len(self.actions):
            raise ValueError("states and actions must have equal length")
        if len(self.states) and (
            self.states.min() < 0 or self.states.max() >= self.n_states
            or self.actions.min() < 0 or self.actions.max() >= self.n_actions
        ):
            raise ValueError("trajectory index out of range")

    @property
    def horizon(self) -> int:
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int]]:
        return list(zip(self.states.tolist(), self.actions.tolist()))


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    # one inverse-CDF draw per row of probs
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1]) * cdf[..., -1]
    idx = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def rollout_batch(mdp: Mdp, policy, n: int, horizon: int, seed=None,
                  start_dist=None) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n`` independent trajectories in lockstep.

    Returns ``(states, actions)`` arrays of shape ``(n, horizon)``.
    """
    if horizon < 1 or n < 1:
        raise ValueError("need n >= 1 and horizon >= 1")
    pi = check_policy(policy, mdp.n_states, mdp.n_actions)
    rng = np.random.default_rng(seed)
    start = mdp.initial_dist if start_dist is None else np.asarray(start_dist, dtype=float)
    states = np.empty((n, horizon), dtype=np.int64)
    actions = np.empty((n, horizon), dtype=np.int64)
    s = _categorical(rng, np.broadcast_to(start, (n, mdp.n_states)))
    for t in range(horizon):
        a = _categorical(rng, pi[s])
        states[:, t] = s
        actions[:, t] = a
        s = _categorical(rng, mdp.transition[s, a])
    return states, actions


def sample_trajectory(mdp: Mdp, policy, horizon: int, seed=None) -> Trajectory:
    states, actions = rollout_batch(mdp, policy, 1, horizon, seed)
    return Trajectory(states[0], actions[0], mdp.n_states, mdp.n_actions)


def sample_trajectories(mdp: Mdp, policy, n: int, horizon: int, seed=None) -> list[Trajectory]:
    states, actions = rollout_batch(mdp, policy, n, horizon, seed)
    return [Trajectory(s, a, mdp.n_states, mdp.n_actions) for s, a in zip(states, actions)]


def empirical_occupation(trajectories, discount: float) -> np.ndarray:
    """Average truncated discounted visit counts over a list of trajectories.

    Truncation at the horizon biases every entry low by at most
    ``discount**horizon / (1 - discount)`` in total mass.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    n_states, n_actions = trajectories[0].n_states, trajectories[0].n_actions
    mu = np.zeros((n_states, n_actions))
    for traj in trajectories:
        if (traj.n_states, traj.n_actions) != (n_states, n_actions):
            raise ValueError("trajectories disagree on state/action counts")
        weights = discount ** np.arange(traj.horizon)
        np.add.at(mu, (traj.states, traj.actions), weights)
    return mu / len(trajectories)


def empirical_occupation_batch(states: np.ndarray, actions: np.ndarray, n_states: int,
                               n_actions: int, discount: float) -> np.ndarray:
    """:func:`empirical_occupation` for arrays produced by :func:`rollout_batch`."""
    weights = np.broadcast_to(discount ** np.arange(states.shape[1]), states.shape)
    flat = np.bincount((states * n_actions + actions).ravel(), weights.ravel(),
                       minlength=n_states * n_actions)
    return flat.reshape(n_states, n_actions) / states.shape[0]


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int, discount: float,
               initial_dist=None) -> Mdp:
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    alpha = rng.dirichlet(np.ones(n_states)) if initial_dist is None else initial_dist
    return Mdp(P, discount, alpha)


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)
