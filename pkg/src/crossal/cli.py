"""Command line interface: ``crossal {run,worlds,solve,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .cal import AVERAGE_CENTERED, STRATEGIES, CalInstance, recover_policies, solve_mccormick
from .experiment import ConfigError, StageError, run_experiment, validate_config
from .gridworld import benchmark_worlds, evaluate_success
from .serialization import (bundles_from_dict, dumps, policy_from_dict, read_json, solution_to_dict,
                            world_from_dict)


def cmd_run(args) -> int:
    text = Path(args.config).read_text() if args.config else "{}"
    cfg = validate_config(text)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    report = run_experiment(cfg)
    print(report.table())
    print(f"report written to {Path(cfg.output_dir) / 'report.json'}")
    return 0


def cmd_worlds(args) -> int:
    for i, w in enumerate(benchmark_worlds()):
        print(f"World {i + 1}: wind {' '.join(map(str, w.wind))}  goal {w.goal}  grid {w.rows}x{w.cols}")
    return 0


def cmd_solve(args) -> int:
    envs, basis = bundles_from_dict(read_json(args.bundles))
    instance = CalInstance(envs, basis, args.epsilon)
    sol = solve_mccormick(instance)
    pols = recover_policies(sol, instance, args.strategy)
    text = dumps(solution_to_dict(args.epsilon, sol.lower_bound, pols, args.strategy))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    world = world_from_dict(read_json(args.world))
    policy = policy_from_dict(read_json(args.policy))
    mdp = world.to_mdp(args.discount)
    count = evaluate_success(mdp, policy, args.n_traj, args.max_steps, args.seed, world.goal_state)
    print(json.dumps({"successes": count, "n_traj": args.n_traj, "max_steps": args.max_steps}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossal", description="Cross apprenticeship learning experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the windy-gridworld experiment")
    p.add_argument("--config", help="YAML/JSON experiment config (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="override the output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("worlds", help="print the four benchmark worlds")
    p.set_defaults(func=cmd_worlds)

    p = sub.add_parser("solve", help="McCormick CAL solve from an environment-bundle document")
    p.add_argument("--bundles", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default=AVERAGE_CENTERED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="count goal-reaching rollouts of a policy in a world")
    p.add_argument("--policy", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--n-traj", type=int, default=200)
    p.add_argument("--max-steps", type=int, default=20)
    p.add_argument("--discount", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
