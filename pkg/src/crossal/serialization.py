"""JSON documents for MDPs, policies, environment bundles and CAL solutions.

Transition tables are stored with one row per state-action pair, row index
``a + s * n_actions``. Floats are written with ``repr`` precision so arrays
round-trip exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .apprenticeship import CostBasis, EnvironmentBundle
from .gridworld import WindyGridworld
from .mdp import Mdp

MDP_SCHEMA = "crossal.mdp/1"
BUNDLES_SCHEMA = "crossal.bundles/1"
POLICY_SCHEMA = "crossal.policy/1"
SOLUTION_SCHEMA = "crossal.solution/1"
WORLD_SCHEMA = "crossal.world/1"


def mdp_to_dict(mdp: Mdp) -> dict:
    return {
        "schema": MDP_SCHEMA,
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "discount": mdp.discount,
        "initial_dist": mdp.initial_dist.tolist(),
        "transition": mdp.transition.reshape(mdp.n_pairs, mdp.n_states).tolist(),
    }


def mdp_from_dict(doc: dict) -> Mdp:
    S, A = int(doc["n_states"]), int(doc["n_actions"])
    P = np.asarray(doc["transition"], dtype=float)
    if P.shape != (S * A, S):
        raise ValueError(f"transition must have {S * A} rows of length {S}, got shape {P.shape}")
    return Mdp(P.reshape(S, A, S), float(doc["discount"]), np.asarray(doc["initial_dist"], dtype=float))


def basis_from_doc(spec, n_pairs: int) -> CostBasis:
    if isinstance(spec, str):
        if spec != "identity":
            raise ValueError(f"unknown cost basis shorthand {spec!r}")
        return CostBasis.identity(n_pairs)
    M = np.asarray(spec, dtype=float)
    if M.ndim != 2 or M.shape[0] != n_pairs:
        raise ValueError(f"cost basis must have {n_pairs} rows (one per state-action pair), got shape {M.shape}")
    return CostBasis(M)


def bundles_to_dict(envs: list[EnvironmentBundle], basis="identity") -> dict:
    return {
        "schema": BUNDLES_SCHEMA,
        "cost_basis": basis if isinstance(basis, str) else np.asarray(basis.matrix).tolist(),
        "environments": [
            {"label": env.label, "mdp": mdp_to_dict(env.mdp), "expert_measure": env.expert_measure.tolist()}
            for env in envs
        ],
    }


def bundles_from_dict(doc: dict) -> tuple[list[EnvironmentBundle], CostBasis]:
    envs = [EnvironmentBundle(mdp_from_dict(e["mdp"]), np.asarray(e["expert_measure"], dtype=float),
                              e.get("label", f"env{i + 1}"))
            for i, e in enumerate(doc["environments"])]
    if not envs:
        raise ValueError("bundle document lists no environments")
    basis = basis_from_doc(doc.get("cost_basis", "identity"), envs[0].mdp.n_pairs)
    return envs, basis


def policy_to_dict(policy, label: str = "") -> dict:
    return {"schema": POLICY_SCHEMA, "label": label, "policy": np.asarray(policy).tolist()}


def policy_from_dict(doc: dict) -> np.ndarray:
    return np.asarray(doc["policy"], dtype=float)


def world_from_dict(doc: dict) -> WindyGridworld:
    return WindyGridworld(tuple(doc["wind"]), tuple(doc.get("goal", (3, 7))),
                          int(doc.get("rows", 7)), int(doc.get("cols", 10)))


def solution_to_dict(epsilon: float, lower_bound: float, policies, strategy: str) -> dict:
    return {
        "schema": SOLUTION_SCHEMA,
        "epsilon": epsilon,
        "strategy": strategy,
        "lower_bound": lower_bound,
        "achieved_objective": policies.achieved_objective,
        "feasible": policies.feasible,
        "individual_policies": [np.asarray(p).tolist() for p in policies.individual],
        "cross_policy": np.asarray(policies.cross).tolist(),
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_json(path, doc: dict):
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
