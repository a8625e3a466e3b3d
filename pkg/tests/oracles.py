"""Independent reference computations used only by the tests."""
import itertools

import numpy as np


def occupation_by_power_series(mdp, policy, n_terms=4000):
    """Sum gamma^t P[s_t = s, a_t = a] term by term."""
    d = mdp.initial_dist.copy()
    mu = np.zeros((mdp.n_states, mdp.n_actions))
    g = 1.0
    for _ in range(n_terms):
        joint = d[:, None] * policy
        mu += g * joint
        d = np.einsum("sa,sat->t", joint, mdp.transition)
        g *= mdp.discount
    return mu


def monte_carlo_occupation(mdp, policy, n, horizon, seed):
    """Discounted visit counts averaged over truncated rollouts (plain sampling loop per step)."""
    rng = np.random.default_rng(seed)
    S, A = mdp.n_states, mdp.n_actions
    s = rng.choice(S, size=n, p=mdp.initial_dist)
    mu = np.zeros(S * A)
    g = 1.0
    for _ in range(horizon):
        u = rng.random(n)
        a = (u[:, None] > np.cumsum(policy[s], axis=1)).sum(axis=1).clip(max=A - 1)
        np.add.at(mu, s * A + a, g)
        u = rng.random(n)
        s = (u[:, None] > np.cumsum(mdp.transition[s, a], axis=1)).sum(axis=1).clip(max=S - 1)
        g *= mdp.discount
    return mu.reshape(S, A) / n


def vertex_enumeration(c, A_ub, b_ub, A_eq=None, b_eq=None, tol=1e-9):
    """Minimize c @ x over {A_ub x <= b_ub, A_eq x = b_eq} by trying every basis.

    Assumes the feasible set is bounded and nonempty (an optimal vertex exists).
    Returns the optimal value, or None if no feasible vertex is found.
    """
    c = np.asarray(c, float)
    n = len(c)
    A_ub = np.asarray(A_ub, float).reshape(-1, n)
    b_ub = np.asarray(b_ub, float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    k = n - len(A_eq)
    best = None
    for rows in itertools.combinations(range(len(A_ub)), k):
        M = np.vstack([A_eq, A_ub[list(rows)]])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.concatenate([b_eq, b_ub[list(rows)]]))
        if np.all(A_ub @ x <= b_ub + tol) and np.allclose(A_eq @ x, b_eq, atol=tol):
            val = c @ x
            if best is None or val < best:
                best = val
    return best


def box_simplex_active_set(v, lo, hi):
    """Project v onto {sum x = 1, lo <= x <= hi} by trying every clamp pattern."""
    v = np.asarray(v, float)
    n = len(v)
    best, best_d = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):  # 0 free, 1 at lo, 2 at hi
        pattern = np.array(pattern)
        x = np.where(pattern == 1, lo, hi).astype(float)
        free = pattern == 0
        if free.any():
            tau = (v[free].sum() - (1.0 - x[~free].sum())) / free.sum()
            x[free] = v[free] - tau
        if abs(x.sum() - 1) > 1e-12 or np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            continue
        d = np.sum((x - v) ** 2)
        if d < best_d:
            best, best_d = x, d
    return best
