"""Cross apprenticeship learning on tabular MDPs."""

__version__ = "0.1.0"

from .apprenticeship import (CostBasis, EnvironmentBundle, discrepancy, performance, solve_centralized_bruteforce,
                             solve_decoupled)
from .cal import CalInstance, build_mccormick, recover_policies, solve_inner, solve_mccormick
from .lp import LpProblem, LpSolution, l1_epigraph, solve_lp
from .mdp import (Mdp, Trajectory, empirical_occupation, occupation_from_policy, policy_from_occupation,
                  sample_trajectory)
from .projection import project_box_simplex

__all__ = [
    "CalInstance", "CostBasis", "EnvironmentBundle", "LpProblem", "LpSolution", "Mdp", "Trajectory",
    "build_mccormick", "discrepancy", "empirical_occupation", "l1_epigraph", "occupation_from_policy",
    "performance", "policy_from_occupation", "project_box_simplex", "recover_policies", "sample_trajectory",
    "solve_centralized_bruteforce", "solve_decoupled", "solve_inner", "solve_lp", "solve_mccormick",
]
