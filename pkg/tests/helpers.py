"""Instance builders shared by several test modules."""
import numpy as np

from crossal.apprenticeship import CostBasis, EnvironmentBundle
from crossal.mdp import occupation_from_policy, random_mdp, random_policy

# filled by test_acceptance, printed by the terminal-summary hook in conftest
ACCEPTANCE_LINES = []


def toy_instance(seed, n_envs=2, n_states=2, n_actions=2, discount=0.9):
    """Environments sharing alpha and gamma, each with an exact expert measure."""
    rng = np.random.default_rng(seed)
    alpha = rng.dirichlet(np.ones(n_states)) * 0.8 + 0.2 / n_states
    envs = []
    for i in range(n_envs):
        mdp = random_mdp(rng, n_states, n_actions, discount, alpha)
        expert = random_policy(rng, n_states, n_actions)
        envs.append(EnvironmentBundle(mdp, occupation_from_policy(mdp, expert), f"env{i}"))
    return envs, CostBasis.identity(n_states * n_actions)


def noisy_instance(seed, n_envs=2, n_states=2, n_actions=2, scale=0.3):
    """Toy instance whose expert measures are perturbed off the feasible polytopes."""
    envs, basis = toy_instance(seed, n_envs, n_states, n_actions)
    rng = np.random.default_rng(seed + 1000)
    out = []
    for e in envs:
        mu = e.expert_measure * (1 + scale * rng.uniform(-1, 1, e.expert_measure.shape))
        out.append(EnvironmentBundle(e.mdp, mu, e.label))
    return out, basis
