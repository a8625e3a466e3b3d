"""Acceptance criteria 1-10, one test each; every test records a PASS/FAIL line."""
import time

import numpy as np

from crossal.apprenticeship import (CostBasis, EnvironmentBundle, decoupled_measure, discrepancy, grid_values,
                                    policy_grid, solve_decoupled)
from crossal.cal import CalInstance, recover_policies, solve_cal_bruteforce, solve_inner, solve_mccormick
from crossal.experiment import ExperimentConfig, run_experiment
from crossal.gridworld import expert_measure
from crossal.mdp import feasibility_polytope, occupation_from_policy, policy_from_occupation, random_mdp, \
    random_policy
from crossal.projection import project_box_simplex
from helpers import ACCEPTANCE_LINES, noisy_instance, toy_instance
from oracles import box_simplex_active_set

BENCHMARK_EPS = (1.0, 0.6, 0.2, 0.0)


def record(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def corpus(n=100, seed=2024):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        S, A = int(rng.integers(1, 11)), int(rng.integers(1, 5))
        gamma = float(rng.uniform(0.05, 0.99))
        yield random_mdp(rng, S, A, gamma), random_policy(rng, S, A)


def test_criterion_01_occupation_exactness():
    start = time.perf_counter()
    worst_res = worst_trip = 0.0
    for mdp, pi in corpus():
        mu = occupation_from_policy(mdp, pi)
        worst_res = max(worst_res, feasibility_polytope(mdp).residual(mu))
        worst_trip = max(worst_trip, np.abs(policy_from_occupation(mu) - pi).max())
    elapsed = time.perf_counter() - start
    record(1, worst_res <= 1e-8 and worst_trip <= 1e-8 and elapsed < 5,
           f"residual {worst_res:.1e}, round-trip {worst_trip:.1e}, {elapsed:.2f}s")


def test_criterion_02_state_mass_bounds():
    worst = -np.inf
    for mdp, pi in corpus():
        mass = occupation_from_policy(mdp, pi).sum(axis=1)
        worst = max(worst, np.max(mdp.initial_dist - mass), np.max(mass - mdp.n_actions / (1 - mdp.discount)))
    record(2, worst <= 1e-9, f"worst bound violation {worst:.1e}")


def test_criterion_03_decoupled_sanity():
    worst_exact = 0.0
    for seed in range(10):
        envs, basis = toy_instance(seed, n_states=3, n_actions=3)
        worst_exact = max(worst_exact, max(solve_decoupled(e, basis)[1] for e in envs))
    rng = np.random.default_rng(3)
    beaten = 0
    for _ in range(5):
        mdp = random_mdp(rng, 3, 2, 0.9, rng.dirichlet(np.ones(3)))
        env = EnvironmentBundle(mdp, expert_measure(mdp, random_policy(rng, 3, 2), 200, 100, seed=rng))
        basis = CostBasis.identity(6)
        _, value = solve_decoupled(env, basis)
        for _ in range(100):
            d = discrepancy(occupation_from_policy(mdp, random_policy(rng, 3, 2)), env.expert_measure, basis)
            beaten += d < value - 1e-9
    record(3, worst_exact <= 1e-6 and beaten == 0,
           f"exact-expert value {worst_exact:.1e}, random policies beating LP {beaten}/500")


def test_criterion_04_mccormick_soundness():
    rng = np.random.default_rng(4)
    worst_cut = -np.inf
    for _ in range(10_000):
        S, A = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        gamma = rng.uniform(0.1, 0.99)
        alpha = rng.dirichlet(np.ones(S))
        U = A / (1 - gamma)
        pic = rng.dirichlet(np.ones(A), size=S)
        sigma = rng.uniform(alpha, U)[:, None]
        w = sigma * pic
        a = alpha[:, None]
        viol = [a * pic - w, sigma + U * (pic - 1) - w, w - sigma - a * (pic - 1), w - U * pic]
        worst_cut = max(worst_cut, max(float(v.max()) for v in viol) / U)
    worst_gap = -np.inf
    for seed in range(3):
        envs, basis = noisy_instance(40 + seed)
        for eps in (0.1, 0.4):
            inst = CalInstance(envs, basis, eps)
            lower = solve_mccormick(inst).lower_bound
            for _ in range(1000):
                center = random_policy(rng, 2, 2)
                tuple_ = [np.array([project_box_simplex(row, c, eps) for row, c in
                                    zip(random_policy(rng, 2, 2), center)]) for _ in envs]
                worst_gap = max(worst_gap, lower - inst.objective(tuple_))
    # cuts are checked in floating point, relative to the mass bound
    record(4, worst_cut <= 1e-12 and worst_gap <= 1e-7,
           f"worst relative cut violation {worst_cut:.1e}, worst lower-minus-sampled {worst_gap:.2e}")


def per_env_gap(envs, basis):
    sol = solve_mccormick(CalInstance(envs, basis, 1.0))
    return max(abs(discrepancy(mu, env.expert_measure, basis) - decoupled_measure(env, basis)[1])
               for mu, env in zip(sol.measures, envs))


def test_criterion_05_unit_epsilon_decouples(benchmark_bundles):
    toy = max(per_env_gap(*noisy_instance(50 + s, n_envs=3, n_states=3)) for s in range(5))
    grid = per_env_gap(*benchmark_bundles)
    record(5, toy <= 1e-6 and grid <= 1e-6, f"worst per-env gap: toy {toy:.1e}, 7x10 worlds {grid:.1e}")


def test_criterion_06_monotone_in_epsilon(benchmark_bundles):
    instances = [noisy_instance(60 + s, n_envs=3, n_states=3) for s in range(5)] + [benchmark_bundles]
    worst = -np.inf
    for envs, basis in instances:
        # BENCHMARK_EPS is decreasing, so each bound may only grow along the list
        bounds = [solve_mccormick(CalInstance(envs, basis, e)).lower_bound for e in BENCHMARK_EPS]
        worst = max(worst, max(a - b for a, b in zip(bounds, bounds[1:])))
    record(6, worst <= 1e-7, f"worst increase as epsilon grows {worst:.1e} over {len(instances)} instances")


def grid_slack(envs, basis, grid=20):
    """Sum over environments and states of the largest objective change between adjacent grid policies."""
    vals = grid_values(envs, basis, policy_grid(2, 2, grid)).reshape(len(envs), grid + 1, grid + 1)
    return float(sum(np.abs(np.diff(v, axis=0)).max() + np.abs(np.diff(v, axis=1)).max() for v in vals))


def test_criterion_07_bruteforce_sandwich():
    start = time.perf_counter()
    lower_gap = upper_gap = order_gap = -np.inf
    for seed in range(5):
        envs, basis = noisy_instance(70 + seed)
        slack = grid_slack(envs, basis)
        dec = [discrepancy(occupation_from_policy(e.mdp, solve_decoupled(e, basis)[0]), e.expert_measure, basis)
               for e in envs]
        for eps in (0.0, 0.2, 0.5, 1.0):  # multiples of the grid step
            inst = CalInstance(envs, basis, eps)
            sol = solve_mccormick(inst)
            achieved = recover_policies(sol, inst).achieved_objective
            individual, cross, value = solve_cal_bruteforce(inst, grid=20)
            lower_gap = max(lower_gap, sol.lower_bound - value)
            upper_gap = max(upper_gap, value - achieved - slack)
            for i, env in enumerate(envs):
                v_ind = discrepancy(occupation_from_policy(env.mdp, individual[i]), env.expert_measure, basis)
                v_cross = discrepancy(occupation_from_policy(env.mdp, cross), env.expert_measure, basis)
                order_gap = max(order_gap, dec[i] - v_ind - 1e-7, v_ind - v_cross - 1e-12)
    elapsed = time.perf_counter() - start
    record(7, lower_gap <= 1e-7 and upper_gap <= 0 and order_gap <= 0 and elapsed < 120,
           f"lower-oracle {lower_gap:.1e}, oracle-achieved-slack {upper_gap:.2e}, "
           f"ordering {order_gap:.1e}, {elapsed:.1f}s")


def test_criterion_08_projection():
    rng = np.random.default_rng(8)
    worst_oracle = worst_con = 0.0
    for _ in range(1000):
        v = rng.normal(size=4)
        center = rng.dirichlet(np.ones(4))
        eps = rng.uniform(0, 1)
        x = project_box_simplex(v, center, eps)
        lo, hi = np.maximum(0, center - eps), np.minimum(1, center + eps)
        worst_oracle = max(worst_oracle, np.abs(x - box_simplex_active_set(v, lo, hi)).max())
        worst_con = max(worst_con, abs(x.sum() - 1), np.max(lo - x), np.max(x - hi))
    record(8, worst_oracle <= 1e-8 and worst_con <= 1e-10,
           f"oracle gap {worst_oracle:.1e}, constraint violation {worst_con:.1e}")


def test_criterion_09_gridworld_trends(tmp_path):
    start = time.perf_counter()
    report = run_experiment(ExperimentConfig(output_dir=str(tmp_path)))
    elapsed = time.perf_counter() - start
    by_eps = {r.epsilon: r.success for r in report.results}
    N = report.n_worlds
    off = ~np.eye(N, dtype=bool)
    one = by_eps[1.0][:N]
    diag_ok = bool(np.all(np.diag(one) >= 160))
    weak_ok = bool(one[off].min() <= 60)
    spread = int((by_eps[0.0].max(axis=0) - by_eps[0.0].min(axis=0)).max())
    avg = [float(by_eps[e][:N][off].mean()) for e in (1.0, 0.6, 0.2)]
    trend_ok = avg[0] <= avg[1] <= avg[2]
    record(9, diag_ok and weak_ok and spread <= 40 and trend_ok and elapsed < 1800,
           f"eps=1 diagonal {np.diag(one).tolist()}, min off-diagonal {one[off].min()}, "
           f"eps=0 spread {spread}, off-diagonal means {[round(a, 2) for a in avg]}, {elapsed:.1f}s")


def test_criterion_10_inner_approximation(benchmark_bundles):
    envs, basis = benchmark_bundles
    grid = solve_inner(CalInstance(envs, basis, 0.2))
    worst = 0.0
    for seed in range(5):
        single, basis = noisy_instance(100 + seed, n_envs=1, n_states=3)
        inner = solve_inner(CalInstance(single, basis, 1.0))
        gap = abs(inner.value - solve_decoupled(single[0], basis)[1]) if inner.feasible else np.inf
        worst = max(worst, gap)
    record(10, not grid.feasible and grid.measures is None and worst <= 1e-6,
           f"7x10 worlds eps=0.2 status {grid.status!r}, single-env gap to decoupled {worst:.1e}")

