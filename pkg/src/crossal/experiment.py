"""Configuration, orchestration and reporting for the windy-gridworld CAL experiment.

Pipeline per run: train a SARSA expert in each world, estimate its occupation
measure from rollouts, then for each centrality value solve the McCormick
relaxation, project to feasible policies and count goal-reaching rollouts of
every policy in every world.
"""
from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .apprenticeship import EnvironmentBundle
from .cal import STRATEGIES, CalInstance, recover_policies, solve_mccormick
from .gridworld import (ExpertQualityError, SarsaConfig, WindyGridworld, evaluate_success,
                        expert_measure, benchmark_worlds, train_sarsa)
from .serialization import basis_from_doc, dumps, solution_to_dict, write_json

log = logging.getLogger(__name__)

CONFIG_SCHEMA = "crossal.config/1"
REPORT_SCHEMA = "crossal.report/1"

BENCHMARK = "benchmark"
BENCHMARK_ALIAS = "paper_worlds"  # older spelling, still accepted
STAGES = {"sarsa": 1, "expert": 2, "eval": 3}
SEED_SCHEME = ("sub-seed = SeedSequence([master_seed, stage_code, *indices]).generate_state(1)[0]; "
               "stage codes sarsa=1 (world, attempt), expert=2 (world), eval=3 (epsilon, policy, world)")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def sub_seed(master: int, stage: str, *indices: int) -> int:
    return int(np.random.SeedSequence([master, STAGES[stage], *indices]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    worlds: list[WindyGridworld] = field(default_factory=benchmark_worlds)
    discount: float = 0.9
    epsilon_values: list[float] = field(default_factory=lambda: [1.0, 0.6, 0.2, 0.0])
    cost_basis: object = "identity"
    sarsa: SarsaConfig = field(default_factory=SarsaConfig)
    expert_n_traj: int = 200
    expert_horizon: int = 100
    expert_attempts: int = 5
    eval_n_traj: int = 200
    eval_max_steps: int = 20
    seed: int = 0
    strategy: str = "average_centered"
    output_dir: str = "cal_run"

    def to_dict(self) -> dict:
        basis = self.cost_basis if isinstance(self.cost_basis, str) else np.asarray(self.cost_basis).tolist()
        return {
            "schema": CONFIG_SCHEMA,
            "worlds": [w.to_dict() for w in self.worlds],
            "discount": self.discount,
            "epsilon_values": list(self.epsilon_values),
            "cost_basis": basis,
            "expert": {"n_traj": self.expert_n_traj, "horizon": self.expert_horizon,
                       "attempts": self.expert_attempts, "sarsa": asdict(self.sarsa)},
            "evaluation": {"n_traj": self.eval_n_traj, "max_steps": self.eval_max_steps},
            "seed": self.seed,
            "strategy": self.strategy,
            "output_dir": self.output_dir,
        }

    def hash(self) -> str:
        doc = self.to_dict()
        doc.pop("output_dir")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


_TOP_KEYS = {"schema", "worlds", "discount", "epsilon_values", "cost_basis", "expert", "evaluation",
             "seed", "strategy", "output_dir"}
_EXPERT_KEYS = {"n_traj", "horizon", "attempts", "sarsa"}
_EVAL_KEYS = {"n_traj", "max_steps"}
_WORLD_KEYS = {"wind", "goal", "rows", "cols"}


def _reject_unknown(doc: dict, allowed: set, where: str):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return value


def _positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name}: expected a positive integer, got {value!r}")
    return value


def validate_config(document: str) -> ExperimentConfig:
    """Parse a YAML/JSON experiment document, apply defaults and check ranges."""
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"cannot parse config{where}: {getattr(exc, 'problem', exc)}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    _reject_unknown(doc, _TOP_KEYS, "config")
    if doc.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ConfigError(f"schema: expected {CONFIG_SCHEMA!r}, got {doc['schema']!r}")
    cfg = ExperimentConfig()

    worlds = doc.get("worlds", BENCHMARK)
    if worlds in (BENCHMARK, BENCHMARK_ALIAS):
        cfg.worlds = benchmark_worlds()
    elif isinstance(worlds, list) and worlds:
        cfg.worlds = []
        for i, w in enumerate(worlds):
            if not isinstance(w, dict) or "wind" not in w:
                raise ConfigError(f"worlds[{i}]: expected a mapping with a 'wind' list")
            _reject_unknown(w, _WORLD_KEYS, f"worlds[{i}]")
            try:
                cfg.worlds.append(WindyGridworld(tuple(w["wind"]), tuple(w.get("goal", (3, 7))),
                                                 int(w.get("rows", 7)), int(w.get("cols", 10))))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"worlds[{i}]: {exc}") from exc
        shapes = {(w.rows, w.cols) for w in cfg.worlds}
        if len(shapes) != 1:
            raise ConfigError("worlds: all worlds must share the same grid size")
    else:
        raise ConfigError(f"worlds: expected {BENCHMARK!r} or a nonempty list of world definitions")

    discount = doc.get("discount", cfg.discount)
    if not isinstance(discount, (int, float)) or not 0 < discount < 1:
        raise ConfigError(f"discount: must lie in (0, 1), got {discount!r}")
    cfg.discount = float(discount)

    eps = doc.get("epsilon_values", cfg.epsilon_values)
    if not isinstance(eps, list) or not eps:
        raise ConfigError("epsilon_values: expected a nonempty list")
    for j, e in enumerate(eps):
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 <= e <= 1:
            raise ConfigError(f"epsilon_values[{j}]: must lie in [0, 1], got {e!r}")
    cfg.epsilon_values = [float(e) for e in eps]

    basis = doc.get("cost_basis", "identity")
    n_pairs = cfg.worlds[0].n_states * 4
    try:
        basis_from_doc(basis, n_pairs)
    except ValueError as exc:
        raise ConfigError(f"cost_basis: {exc}") from exc
    cfg.cost_basis = basis if isinstance(basis, str) else np.asarray(basis, dtype=float)

    expert = _section(doc, "expert")
    _reject_unknown(expert, _EXPERT_KEYS, "expert")
    cfg.expert_n_traj = _positive_int(expert.get("n_traj", cfg.expert_n_traj), "expert.n_traj")
    cfg.expert_horizon = _positive_int(expert.get("horizon", cfg.expert_horizon), "expert.horizon")
    cfg.expert_attempts = _positive_int(expert.get("attempts", cfg.expert_attempts), "expert.attempts")
    sarsa = expert.get("sarsa", {})
    if not isinstance(sarsa, dict):
        raise ConfigError("expert.sarsa: expected a mapping")
    _reject_unknown(sarsa, set(asdict(SarsaConfig())), "expert.sarsa")
    cfg.sarsa = SarsaConfig(**{**asdict(SarsaConfig()), **sarsa})
    if not 0 < cfg.sarsa.learning_rate <= 1 or not 0 <= cfg.sarsa.exploration <= 1:
        raise ConfigError("expert.sarsa: learning_rate must lie in (0, 1] and exploration in [0, 1]")
    _positive_int(cfg.sarsa.episodes, "expert.sarsa.episodes")
    _positive_int(cfg.sarsa.max_steps, "expert.sarsa.max_steps")

    ev = _section(doc, "evaluation")
    _reject_unknown(ev, _EVAL_KEYS, "evaluation")
    cfg.eval_n_traj = _positive_int(ev.get("n_traj", cfg.eval_n_traj), "evaluation.n_traj")
    cfg.eval_max_steps = _positive_int(ev.get("max_steps", cfg.eval_max_steps), "evaluation.max_steps")

    seed = doc.get("seed", cfg.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: expected a nonnegative integer, got {seed!r}")
    cfg.seed = seed
    strategy = doc.get("strategy", cfg.strategy)
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy: expected one of {STRATEGIES}, got {strategy!r}")
    cfg.strategy = strategy
    cfg.output_dir = str(doc.get("output_dir", cfg.output_dir))
    return cfg


@dataclass
class EpsilonResult:
    epsilon: float
    lower_bound: float
    achieved_objective: float
    feasible: bool
    success: np.ndarray  # (N + 1, N): individual policies 1..N then the cross policy

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "lower_bound": self.lower_bound,
                "achieved_objective": self.achieved_objective, "feasible": self.feasible,
                "success": self.success.tolist()}


@dataclass
class Report:
    config: ExperimentConfig
    results: list[EpsilonResult]
    expert_success: list[int]
    expert_seeds: list[int]

    @property
    def n_worlds(self) -> int:
        return len(self.config.worlds)

    def policy_labels(self) -> list[str]:
        return [f"Individual policy {i + 1}" for i in range(self.n_worlds)] + ["Cross-learned policy"]

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "schema": REPORT_SCHEMA,
            "config": cfg.to_dict(),
            "provenance": {
                "config_hash": cfg.hash(),
                "master_seed": cfg.seed,
                "seed_scheme": SEED_SCHEME,
                "expert_seeds": self.expert_seeds,
                "initial_distribution": "uniform over non-goal cells",
                "versions": {"crossal": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                             "python": platform.python_version()},
            },
            "policy_labels": self.policy_labels(),
            "world_labels": [f"World {j + 1}" for j in range(self.n_worlds)],
            "expert_success": self.expert_success,
            "results": [r.to_dict() for r in self.results],
        }

    def table(self) -> str:
        """Fixed-width success table, one block per centrality value."""
        n = self.n_worlds
        width = max(len(s) for s in self.policy_labels()) + 2
        head = "Policy".ljust(width) + "".join(f"World {j + 1}".rjust(9) for j in range(n))
        lines = [f"Trajectories out of {self.config.eval_n_traj} reaching the goal within "
                 f"{self.config.eval_max_steps} steps", ""]
        for r in self.results:
            lines += [f"epsilon = {r.epsilon:g}   lower bound = {r.lower_bound:.6f}   "
                      f"achieved objective = {r.achieved_objective:.6f}", head, "-" * len(head)]
            for label, row in zip(self.policy_labels(), r.success):
                lines.append(label.ljust(width) + "".join(f"{int(v):9d}" for v in row))
            lines.append("")
        return "\n".join(lines)


def _expert_cache_key(world: WindyGridworld, cfg: ExperimentConfig, seed: int) -> str:
    doc = {"world": world.to_dict(), "sarsa": asdict(cfg.sarsa), "discount": cfg.discount,
           "n_traj": cfg.expert_n_traj, "horizon": cfg.expert_horizon,
           "attempts": cfg.expert_attempts, "seed": seed}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:20]


def build_expert(world: WindyGridworld, cfg: ExperimentConfig, index: int, cache_dir: Path | None = None):
    """Train (or load) the expert for one world; returns (policy, measure, sarsa_seed)."""
    seed = sub_seed(cfg.seed, "sarsa", index, 0)
    path = None
    if cache_dir is not None:
        path = cache_dir / f"expert_{_expert_cache_key(world, cfg, seed)}.npz"
        if path.exists():
            data = np.load(path)
            return data["policy"], data["measure"], int(data["seed"])
    mdp = world.to_mdp(cfg.discount)
    last = None
    for attempt in range(cfg.expert_attempts):
        seed = sub_seed(cfg.seed, "sarsa", index, attempt)
        try:
            art = train_sarsa(world, cfg.sarsa, seed)
            break
        except ExpertQualityError as exc:
            log.warning("world %d: SARSA attempt %d failed the quality gate (%s)", index + 1, attempt + 1, exc)
            last = exc
    else:
        raise last
    measure = expert_measure(mdp, art.policy, cfg.expert_n_traj, cfg.expert_horizon,
                             sub_seed(cfg.seed, "expert", index))
    if path is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        np.savez(path, policy=art.policy, measure=measure, seed=seed, training_log=art.training_log)
    return art.policy, measure, seed


def run_experiment(config: ExperimentConfig, write: bool = True) -> Report:
    """Run the full pipeline and, if ``write``, persist report and solutions to ``output_dir``."""
    started = time.time()
    out = Path(config.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    cache = out / "cache" if write else None
    mdps = [w.to_mdp(config.discount) for w in config.worlds]
    goals = [w.goal_state for w in config.worlds]
    N = len(mdps)

    try:
        envs, expert_success, expert_seeds = [], [], []
        for i, (world, mdp) in enumerate(zip(config.worlds, mdps)):
            policy, measure, seed = build_expert(world, config, i, cache)
            envs.append(EnvironmentBundle(mdp, measure, f"world{i + 1}"))
            expert_seeds.append(seed)
            expert_success.append(evaluate_success(mdp, policy, config.eval_n_traj, config.eval_max_steps,
                                                   sub_seed(config.seed, "eval", 999, i, i), goals[i]))
    except Exception as exc:
        raise StageError("experts", exc) from exc
    basis = basis_from_doc(config.cost_basis if isinstance(config.cost_basis, str)
                           else np.asarray(config.cost_basis).tolist(), mdps[0].n_pairs)

    results = []
    for e, eps in enumerate(config.epsilon_values):
        stage = f"cal(epsilon={eps:g})"
        try:
            instance = CalInstance(envs, basis, eps)
            sol = solve_mccormick(instance)
            pols = recover_policies(sol, instance, config.strategy)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        success = np.zeros((N + 1, N), dtype=int)
        for p, policy in enumerate(pols.individual + [pols.cross]):
            for j in range(N):
                success[p, j] = evaluate_success(mdps[j], policy, config.eval_n_traj, config.eval_max_steps,
                                                 sub_seed(config.seed, "eval", e, p, j), goals[j])
        results.append(EpsilonResult(eps, sol.lower_bound, pols.achieved_objective, pols.feasible, success))
        log.info("epsilon=%g lower=%.4f achieved=%.4f", eps, sol.lower_bound, pols.achieved_objective)
        if write:
            write_json(out / f"solution_eps{eps:g}.json",
                       solution_to_dict(eps, sol.lower_bound, pols, config.strategy))

    report = Report(config, results, expert_success, expert_seeds)
    if write:
        (out / "report.json").write_text(dumps(report.to_dict()))
        (out / "report.txt").write_text(report.table() + "\n")
        # kept apart so report.json stays byte-identical across reruns
        write_json(out / "run_meta.json", {"wall_clock_seconds": round(time.time() - started, 3),
                                           "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")})
    return report
