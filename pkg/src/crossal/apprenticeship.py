"""Worst-case cost discrepancy, the weighted performance function, and single-environment LPs."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lp import LpProblem, l1_epigraph, solve_lp
from .mdp import (Mdp, feasibility_polytope, occupation_from_policies, occupation_from_policy,
                  policy_from_occupation)


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CostBasis:
    """Columns are basis cost vectors over state-action pairs, each with sup-norm <= 1."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2:
            raise ValueError(f"cost basis must be a 2-D matrix, got shape {M.shape}")
        norms = np.abs(M).max(axis=0, initial=0.0)
        bad = np.flatnonzero(norms > 1.0)
        if len(bad):
            raise ValueError(f"cost basis column {bad[0]} has sup-norm {norms[bad[0]]:g} > 1")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls, n_pairs: int) -> CostBasis:
        return cls(np.eye(n_pairs))

    @property
    def n_pairs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_costs(self) -> int:
        return self.matrix.shape[1]

    def features(self, mu) -> np.ndarray:
        """Expected basis costs Phi^T mu."""
        mu = np.ravel(mu)
        if mu.shape != (self.n_pairs,):
            raise ValueError(f"measure has {mu.size} entries, basis expects {self.n_pairs}")
        return self.matrix.T @ mu


@dataclass(frozen=True, eq=False)
class EnvironmentBundle:
    """An environment together with the occupation measure its expert generated."""

    mdp: Mdp
    expert_measure: np.ndarray
    label: str = ""

    def __post_init__(self):
        mu = np.array(self.expert_measure, dtype=float).reshape(self.mdp.n_states, self.mdp.n_actions)
        object.__setattr__(self, "expert_measure", mu)
        if np.any(mu < 0):
            raise ValueError("expert measure must be nonnegative")
        mass = mu.sum(axis=1)
        # empirical measures are noisy and truncated, so only warn
        if np.any(mass > self.mdp.mass_upper_bound + 1e-9) or np.any(mass < self.mdp.initial_dist - 1e-9):
            warnings.warn(f"expert measure of {self.label or 'environment'} violates state-mass bounds",
                          stacklevel=2)


def check_weights(beta, n_envs: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (n_envs,):
        raise ValueError(f"expected {n_envs} weights, got shape {beta.shape}")
    if np.any(beta < 0) or abs(beta.sum() - 1.0) > 1e-12:
        raise ValueError("weights must lie on the probability simplex")
    return beta


def discrepancy(mu, expert, basis: CostBasis) -> float:
    """Worst-case cost gap ||Phi^T mu - Phi^T mu_E||_1 over the unit cost ball."""
    return float(np.abs(basis.features(mu) - basis.features(expert)).sum())


def performance(beta, policy, envs: list[EnvironmentBundle], basis: CostBasis) -> float:
    """Weighted sum of per-environment discrepancies of one policy."""
    beta = check_weights(beta, len(envs))
    return float(sum(b * discrepancy(occupation_from_policy(env.mdp, policy), env.expert_measure, basis)
                     for b, env in zip(beta, envs)))


def feasibility_lp(mdps: list[Mdp], n_extra: int = 0) -> LpProblem:
    """Zero-objective LP over stacked measures mu_1..mu_N, each in its F_i.

    ``n_extra`` free-of-constraint nonnegative variables are appended at the end.
    """
    blocks = [sp.csr_matrix(feasibility_polytope(m).eq_matrix) for m in mdps]
    A_eq = sp.block_diag(blocks, format="csr")
    if n_extra:
        A_eq = sp.hstack([A_eq, sp.csr_matrix((A_eq.shape[0], n_extra))]).tocsr()
    n = A_eq.shape[1]
    return LpProblem(np.zeros(n), A_eq=A_eq, b_eq=np.concatenate([m.initial_dist for m in mdps]),
                     lb=np.zeros(n))


def decoupled_measure(env: EnvironmentBundle, basis: CostBasis, method: str = "highs"):
    """Solve min ||Phi^T mu - Phi^T mu_E||_1 over F_i; returns ``(mu, value)``."""
    mdp = env.mdp
    base = feasibility_lp([mdp])
    problem = l1_epigraph(basis.matrix.T, basis.features(env.expert_measure), base)
    sol = solve_lp(problem, method=method)
    if not sol.optimal:
        raise RuntimeError(f"decoupled LP for {env.label or 'environment'} is {sol.status}")
    mu = np.maximum(sol.x[:mdp.n_pairs], 0.0).reshape(mdp.n_states, mdp.n_actions)
    return mu, max(sol.objective_value, 0.0)


def solve_decoupled(env: EnvironmentBundle, basis: CostBasis, method: str = "highs"):
    """Best single-environment imitation policy and its optimal discrepancy."""
    mu, value = decoupled_measure(env, basis, method)
    return policy_from_occupation(mu), value


def simplex_grid(n_actions: int, grid: int) -> np.ndarray:
    """All action distributions with entries in {0, 1/grid, ..., 1}."""
    pts = [c for c in itertools.product(range(grid + 1), repeat=n_actions - 1) if sum(c) <= grid]
    pts = np.array([list(c) + [grid - sum(c)] for c in pts], dtype=float)
    return pts / grid


def policy_grid(n_states: int, n_actions: int, grid: int, max_points: int = 250_000) -> np.ndarray:
    """Cartesian product of per-state simplex grids, shape (K, S, A)."""
    row = simplex_grid(n_actions, grid)
    total = len(row) ** n_states
    if total > max_points:
        raise InstanceTooLargeError(f"policy grid has {total} points (limit {max_points})")
    idx = np.array(list(itertools.product(range(len(row)), repeat=n_states)))
    return row[idx]


def grid_values(envs: list[EnvironmentBundle], basis: CostBasis, policies: np.ndarray) -> np.ndarray:
    """Per-environment discrepancy of every gridded policy, shape (N, K)."""
    out = np.empty((len(envs), len(policies)))
    for i, env in enumerate(envs):
        mus = occupation_from_policies(env.mdp, policies).reshape(len(policies), -1)
        feats = mus @ basis.matrix
        out[i] = np.abs(feats - basis.features(env.expert_measure)).sum(axis=1)
    return out


def _check_small(envs, grid):
    mdp = envs[0].mdp
    if mdp.n_pairs > 8 or grid > 21:
        raise InstanceTooLargeError(
            f"brute force needs |S||A| <= 8 and grid <= 21, got {mdp.n_pairs} and {grid}")


def solve_centralized_bruteforce(envs: list[EnvironmentBundle], basis: CostBasis, grid: int = 20):
    """Grid-search oracle for the single shared policy minimizing the summed discrepancy.

    Accurate to O(1/grid); only for toy instances.
    """
    _check_small(envs, grid)
    mdp = envs[0].mdp
    policies = policy_grid(mdp.n_states, mdp.n_actions, grid)
    total = grid_values(envs, basis, policies).sum(axis=0)
    k = int(np.argmin(total))
    return policies[k], float(total[k])
