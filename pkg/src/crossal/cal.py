"""Cross apprenticeship learning: convex approximations and policy recovery.

The CAL problem couples one policy per environment to a shared cross policy
through ``max |pi_i - pi_c| <= epsilon``. In occupation-measure variables that
coupling is bilinear. Two LPs approximate it:

* :func:`solve_mccormick` replaces ``w_i(s,a) = pi_c(s,a) * sigma_i(s)`` by its
  McCormick envelope, giving an outer relaxation and hence a lower bound.
* :func:`solve_inner` keeps every measure inside a small sup-ball around a
  central measure, giving an inner approximation that is often infeasible.

:func:`recover_policies` turns a relaxed solution into a feasible policy tuple
by per-state Euclidean projection.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .apprenticeship import (CostBasis, EnvironmentBundle, discrepancy, grid_values, policy_grid,
                             _check_small)
from .lp import LpProblem, l1_epigraph, solve_lp
from .mdp import feasibility_polytope, occupation_from_policy, policy_from_occupation
from .projection import project_box_simplex

log = logging.getLogger(__name__)

CROSS_CENTERED = "cross_centered"
AVERAGE_CENTERED = "average_centered"
STRATEGIES = (CROSS_CENTERED, AVERAGE_CENTERED)


@dataclass(frozen=True, eq=False)
class CalInstance:
    envs: list[EnvironmentBundle]
    basis: CostBasis
    epsilon: float

    def __post_init__(self):
        if not self.envs:
            raise ValueError("need at least one environment")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        ref = self.envs[0].mdp
        for env in self.envs[1:]:
            m = env.mdp
            if (m.n_states, m.n_actions) != (ref.n_states, ref.n_actions):
                raise ValueError(f"environment {env.label!r} has a different state/action space")
            if m.discount != ref.discount or not np.array_equal(m.initial_dist, ref.initial_dist):
                raise ValueError(f"environment {env.label!r} has a different discount or initial distribution")
        if self.basis.n_pairs != ref.n_pairs:
            raise ValueError("cost basis does not match the state-action space")
        object.__setattr__(self, "envs", list(self.envs))

    @property
    def n_envs(self) -> int:
        return len(self.envs)

    @property
    def shape(self) -> tuple[int, int]:
        m = self.envs[0].mdp
        return m.n_states, m.n_actions

    def objective(self, policies) -> float:
        """Summed discrepancy of individual policies, each in its own environment."""
        return float(sum(
            discrepancy(occupation_from_policy(env.mdp, pi), env.expert_measure, self.basis)
            for env, pi in zip(self.envs, policies)))


@dataclass(frozen=True)
class McCormickLayout:
    """Index map of the McCormick LP variable vector.

    Order: mu_1..mu_N, pi_c, w_1..w_N, sigma_1..sigma_N, then one epigraph
    variable per (environment, basis column).
    """

    n_envs: int
    n_states: int
    n_actions: int
    n_costs: int

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    def mu(self, i: int) -> slice:
        return slice(i * self.n_pairs, (i + 1) * self.n_pairs)

    @property
    def pi_c(self) -> slice:
        start = self.n_envs * self.n_pairs
        return slice(start, start + self.n_pairs)

    def w(self, i: int) -> slice:
        start = (self.n_envs + 1 + i) * self.n_pairs
        return slice(start, start + self.n_pairs)

    def sigma(self, i: int) -> slice:
        start = (2 * self.n_envs + 1) * self.n_pairs + i * self.n_states
        return slice(start, start + self.n_states)

    @property
    def n_core(self) -> int:
        return (2 * self.n_envs + 1) * self.n_pairs + self.n_envs * self.n_states

    @property
    def n_vars(self) -> int:
        return self.n_core + self.n_envs * self.n_costs

    @property
    def n_eq(self) -> int:
        # F_i rows, sigma definitions, cross-policy normalization
        return 2 * self.n_envs * self.n_states + self.n_states

    @property
    def n_ub(self) -> int:
        # two proximity rows and four envelope rows per (i, s, a); two epigraph rows per (i, j)
        return 6 * self.n_envs * self.n_pairs + 2 * self.n_envs * self.n_costs


@dataclass(eq=False)
class McCormickSolution:
    measures: list[np.ndarray]
    cross_policy: np.ndarray
    aux_w: list[np.ndarray]
    aux_state_mass: list[np.ndarray]
    lower_bound: float
    max_residual: float = 0.0
    x: np.ndarray = field(default=None, repr=False)


@dataclass(eq=False)
class CalPolicies:
    individual: list[np.ndarray]
    cross: np.ndarray
    feasible: bool
    achieved_objective: float
    max_deviation: float = 0.0


@dataclass(eq=False)
class InnerSolution:
    """Outcome of the inner approximation; ``measures`` is None when infeasible."""

    status: str
    measures: list[np.ndarray] | None = None
    central_measure: np.ndarray | None = None
    value: float = np.inf
    radius: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def build_mccormick(instance: CalInstance) -> LpProblem:
    """McCormick outer relaxation of the CAL problem as a sparse LP.

    Variable order is described by :class:`McCormickLayout`. With
    ``n = |S||A|``, ``N`` environments and ``n_c`` basis columns the LP has
    ``N (2n + |S| + n_c) + n`` variables, ``2 N |S| + |S|`` equalities and
    ``6 N n + 2 N n_c`` inequalities.
    """
    S, A = instance.shape
    N = instance.n_envs
    lay = McCormickLayout(N, S, A, instance.basis.n_costs)
    n = lay.n_pairs
    mdp0 = instance.envs[0].mdp
    alpha = mdp0.initial_dist
    upper = mdp0.mass_upper_bound
    assert np.all(alpha < upper), "state-mass bounds must satisfy lower < upper"
    eps = float(instance.epsilon)
    alpha_sa = np.repeat(alpha, A)           # alpha(s) for each (s, a)
    pair_state = np.repeat(np.arange(S), A)  # s for each (s, a)
    pairs = np.arange(n)

    # equalities
    eq_blocks = []
    eq_rhs = []
    for i, env in enumerate(instance.envs):
        F = sp.csr_matrix(feasibility_polytope(env.mdp).eq_matrix)
        block = sp.hstack([sp.csr_matrix((S, lay.mu(i).start)), F,
                           sp.csr_matrix((S, lay.n_core - lay.mu(i).stop))])
        eq_blocks.append(block)
        eq_rhs.append(alpha)
    # sum_a pi_c(s, a) = 1
    eq_blocks.append(_coo([pair_state], [lay.pi_c.start + pairs], [np.ones(n)], (S, lay.n_core)))
    eq_rhs.append(np.ones(S))
    # sigma_i(s) - sum_a mu_i(s, a) = 0
    for i in range(N):
        eq_blocks.append(_coo(
            [np.arange(S), pair_state],
            [lay.sigma(i).start + np.arange(S), lay.mu(i).start + pairs],
            [np.ones(S), -np.ones(n)], (S, lay.n_core)))
        eq_rhs.append(np.zeros(S))

    # inequalities, one block of n rows per constraint family
    ub_rows, ub_cols, ub_vals, ub_rhs = [], [], [], []
    row0 = 0

    def add(terms, rhs):
        nonlocal row0
        for cols, vals in terms:
            ub_rows.append(row0 + pairs)
            ub_cols.append(cols)
            ub_vals.append(np.broadcast_to(vals, (n,)).astype(float))
        ub_rhs.append(np.broadcast_to(rhs, (n,)).astype(float))
        row0 += n

    pic = lay.pi_c.start + pairs
    for i in range(N):
        mu = lay.mu(i).start + pairs
        w = lay.w(i).start + pairs
        sig = lay.sigma(i).start + pair_state
        # |mu - w| <= eps * sigma
        add([(mu, 1.0), (w, -1.0), (sig, -eps)], 0.0)
        add([(mu, -1.0), (w, 1.0), (sig, -eps)], 0.0)
        # w >= alpha(s) pi_c
        add([(pic, alpha_sa), (w, -1.0)], 0.0)
        # w >= sigma + U (pi_c - 1)
        add([(sig, 1.0), (pic, upper), (w, -1.0)], upper)
        # w <= sigma + alpha(s) (pi_c - 1)
        add([(w, 1.0), (sig, -1.0), (pic, -alpha_sa)], -alpha_sa)
        # w <= U pi_c
        add([(w, 1.0), (pic, -upper)], 0.0)

    A_ub = _coo(ub_rows, ub_cols, ub_vals, (row0, lay.n_core))
    lb = np.zeros(lay.n_core)
    ub = np.full(lay.n_core, np.inf)
    ub[lay.pi_c] = 1.0
    for i in range(N):
        lb[lay.sigma(i)] = alpha
        ub[lay.sigma(i)] = upper
    names = ([f"mu{i}[{s},{a}]" for i in range(N) for s in range(S) for a in range(A)]
             + [f"pic[{s},{a}]" for s in range(S) for a in range(A)]
             + [f"w{i}[{s},{a}]" for i in range(N) for s in range(S) for a in range(A)]
             + [f"sigma{i}[{s}]" for i in range(N) for s in range(S)])
    base = LpProblem(np.zeros(lay.n_core), A_eq=sp.vstack(eq_blocks).tocsr(), b_eq=np.concatenate(eq_rhs),
                     A_ub=A_ub, b_ub=np.concatenate(ub_rhs), lb=lb, ub=ub, variable_names=names)

    Phi_T = sp.csr_matrix(instance.basis.matrix.T)
    M = sp.hstack([sp.block_diag([Phi_T] * N), sp.csr_matrix((N * instance.basis.n_costs, lay.n_core - N * n))])
    offset = np.concatenate([instance.basis.features(env.expert_measure) for env in instance.envs])
    return l1_epigraph(M, offset, base)


def _clean_policy(pi: np.ndarray) -> np.ndarray:
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum(axis=1, keepdims=True)


def solve_mccormick(instance: CalInstance, method: str = "highs") -> McCormickSolution:
    """Solve the McCormick relaxation; its optimum lower-bounds the CAL optimum."""
    S, A = instance.shape
    lay = McCormickLayout(instance.n_envs, S, A, instance.basis.n_costs)
    problem = build_mccormick(instance)
    sol = solve_lp(problem, method=method)
    if not sol.optimal:
        raise RuntimeError(f"McCormick LP is {sol.status}; the relaxation should always be feasible")
    x = sol.x
    log.info("McCormick eps=%g: lower bound %.6f (residual %.2e)", instance.epsilon,
             sol.objective_value, sol.max_residual)
    return McCormickSolution(
        measures=[np.maximum(x[lay.mu(i)], 0.0).reshape(S, A) for i in range(instance.n_envs)],
        cross_policy=_clean_policy(x[lay.pi_c].reshape(S, A)),
        aux_w=[x[lay.w(i)].reshape(S, A) for i in range(instance.n_envs)],
        aux_state_mass=[x[lay.sigma(i)].copy() for i in range(instance.n_envs)],
        lower_bound=sol.objective_value,
        max_residual=sol.max_residual,
        x=x,
    )


def inner_radius(instance: CalInstance) -> float:
    """Sup-ball radius on measures that guarantees epsilon-close policies.

    Collapses to zero when some state has zero initial probability.
    """
    S, A = instance.shape
    nu_min = float(instance.envs[0].mdp.initial_dist.min())
    return nu_min * instance.epsilon / (2 * S * A)


def solve_inner(instance: CalInstance, method: str = "highs") -> InnerSolution:
    """Inner approximation: all measures within a sup-ball of a central measure.

    Infeasibility is reported through ``status``, not raised.
    """
    S, A = instance.shape
    N = instance.n_envs
    n = S * A
    mdp0 = instance.envs[0].mdp
    nu_min = float(mdp0.initial_dist.min())
    radius = inner_radius(instance)
    base = _inner_base(instance, radius, nu_min)
    Phi_T = sp.csr_matrix(instance.basis.matrix.T)
    M = sp.hstack([sp.block_diag([Phi_T] * N), sp.csr_matrix((N * instance.basis.n_costs, n))])
    offset = np.concatenate([instance.basis.features(env.expert_measure) for env in instance.envs])
    sol = solve_lp(l1_epigraph(M, offset, base), method=method)
    if not sol.optimal:
        log.info("inner approximation eps=%g radius=%.3e: %s", instance.epsilon, radius, sol.status)
        return InnerSolution(sol.status, radius=radius)
    x = sol.x
    measures = [np.maximum(x[i * n:(i + 1) * n], 0.0).reshape(S, A) for i in range(N)]
    central = np.maximum(x[N * n:(N + 1) * n], 0.0).reshape(S, A)
    return InnerSolution("optimal", measures, central, sol.objective_value, radius)


def _inner_base(instance: CalInstance, radius: float, nu_min: float) -> LpProblem:
    S, A = instance.shape
    N = instance.n_envs
    n = S * A
    n_vars = (N + 1) * n
    blocks = [sp.csr_matrix(feasibility_polytope(env.mdp).eq_matrix) for env in instance.envs]
    A_eq = sp.hstack([sp.block_diag(blocks), sp.csr_matrix((N * S, n))]).tocsr()
    b_eq = np.concatenate([env.mdp.initial_dist for env in instance.envs])
    upper = instance.envs[0].mdp.mass_upper_bound
    B_T = sp.kron(sp.identity(S), np.ones((1, A)))  # per-state mass
    central = sp.hstack([sp.csr_matrix((S, N * n)), B_T])
    eye = sp.identity(n)
    rows = [central, -central]
    rhs = [np.full(S, upper), np.full(S, -nu_min)]
    for i in range(N):
        pick = sp.hstack([sp.csr_matrix((n, i * n)), eye, sp.csr_matrix((n, (N - 1 - i) * n)), -eye])
        rows += [pick, -pick]
        rhs += [np.full(n, radius), np.full(n, radius)]
    return LpProblem(np.zeros(n_vars), A_eq=A_eq, b_eq=b_eq, A_ub=sp.vstack(rows).tocsr(),
                     b_ub=np.concatenate(rhs), lb=np.zeros(n_vars))


def recover_policies(sol: McCormickSolution, instance: CalInstance,
                     strategy: str = AVERAGE_CENTERED, zero_mass: str = "raise") -> CalPolicies:
    """Project relaxed policies onto the epsilon-ball of a center to restore CAL feasibility.

    ``cross_centered`` centers the ball at the LP's cross policy;
    ``average_centered`` centers it at the mean individual policy, which also
    becomes the cross policy.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    eps = float(instance.epsilon)
    raw = [policy_from_occupation(mu, zero_mass=zero_mass) for mu in sol.measures]
    if strategy == CROSS_CENTERED:
        center = sol.cross_policy
    else:
        center = np.mean(raw, axis=0)
    projected = []
    for pi in raw:
        projected.append(np.array([project_box_simplex(pi[s], center[s], eps) for s in range(len(pi))]))
    deviation = max(float(np.abs(pi - center).max()) for pi in projected)
    return CalPolicies(
        individual=projected,
        cross=center,
        feasible=deviation <= eps + 1e-9,
        achieved_objective=instance.objective(projected),
        max_deviation=deviation,
    )


def solve_cal_bruteforce(instance: CalInstance, grid: int = 20):
    """Grid oracle for the full CAL problem on toy instances.

    Searches cross policies and individual policies over the same policy grid,
    keeping only epsilon-feasible tuples. Returns
    ``(individual_policies, cross_policy, value)``.
    """
    _check_small(instance.envs, grid)
    S, A = instance.shape
    policies = policy_grid(S, A, grid)
    values = grid_values(instance.envs, instance.basis, policies)  # (N, K)
    flat = policies.reshape(len(policies), -1)
    best = (np.inf, None, None)
    # chunk over cross-policy candidates to bound memory
    for start in range(0, len(policies), 512):
        centers = flat[start:start + 512]
        dev = np.abs(centers[:, None, :] - flat[None, :, :]).max(axis=2)
        ok = dev <= instance.epsilon + 1e-12
        masked = np.where(ok[None], values[:, None, :], np.inf)  # (N, C, K)
        per_env = masked.min(axis=2)
        total = per_env.sum(axis=0)
        c = int(np.argmin(total))
        if total[c] < best[0]:
            picks = masked[:, c, :].argmin(axis=1)
            best = (float(total[c]), start + c, picks)
    value, c, picks = best
    return [policies[k] for k in picks], policies[c], value
