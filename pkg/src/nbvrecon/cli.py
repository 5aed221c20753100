"""Command line entry point: run, episode, check and zoo."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import checks
from .harness import ConfigError, ExperimentConfig, build_scenario, emit_outputs, load_config, run_experiments, zoo
from .planner import PlannerSpec, run_episode

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    data = config.to_dict()
    if getattr(args, "seed", None) is not None:
        data["seeds"] = [args.seed]
    for flag, key in (("planner", "planners"), ("object", "objects")):
        value = getattr(args, flag, None)
        if value:
            data[key] = [value] if isinstance(value, str) else list(value)
    return ExperimentConfig.from_dict(data)


def cmd_run(args) -> int:
    config = _config(args)
    results = run_experiments(config)
    for path in emit_outputs(results, args.out):
        print(path)
    return EXIT_OK


def cmd_episode(args) -> int:
    config = _config(args)
    planner = PlannerSpec.parse(config.planners[0], config.pose_grid)
    name = config.object_names()[0]
    seed = config.seeds[0]
    scenario = build_scenario(config, name)
    oracle = run_episode(PlannerSpec.parse("oracle", config.pose_grid), scenario, seed, 10 * config.pose_grid)
    episode = run_episode(planner, scenario, seed, config.round_cap_factor * max(oracle.T, 1))
    print(f"{planner.name} on {name} (N={scenario.n_points}, seed={seed})")
    print(f"{'t':>4} {'theta_deg':>9} {'new':>5} {'oracle':>6} {'r_ind':>5} {'rec':>7}")
    for r in episode.rounds:
        print(f"{r.t:>4} {np.degrees(r.theta):>9.1f} {r.new_points:>5} {r.oracle_marginal_utility:>6} "
              f"{r.r_ind:>5} {r.cum_observed / scenario.n_points:>7.3f}")
    print(f"termination={episode.termination} T={episode.T} rec={episode.rec:.4f} oracle_T={oracle.T}")
    return EXIT_OK


def cmd_check(args) -> int:
    failed = 0
    for name, ok, detail in checks.run_all():
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_zoo(args) -> int:
    for entry in zoo():
        params = " ".join(f"{k}={v}" for k, v in entry.params.items())
        print(f"{entry.name:<14} {entry.object_class:<8} {params}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbvrecon", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, multi=True):
        p.add_argument("--config", help="JSON experiment config (defaults when omitted)")
        p.add_argument("--seed", type=int)
        action = "append" if multi else "store"
        p.add_argument("--planner", action=action, help="e.g. oracle, greedy-U, CS-U")
        p.add_argument("--object", action=action, help="zoo object name")

    run = sub.add_parser("run", help="run the object x planner grid and write CSVs")
    common(run)
    run.add_argument("--out", default="results")
    run.set_defaults(func=cmd_run)

    ep = sub.add_parser("episode", help="run one episode and print every round")
    common(ep, multi=False)
    ep.set_defaults(func=cmd_episode)

    check = sub.add_parser("check", help="run the fast property and bound checks")
    check.set_defaults(func=cmd_check)

    z = sub.add_parser("zoo", help="list the evaluation objects")
    z.set_defaults(func=cmd_zoo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
