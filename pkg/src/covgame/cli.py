"""Command-line front-end.

Subcommands: ``run`` (execute an experiment sweep and write CSVs),
``summarize`` (aggregate a results directory) and ``check`` (run the
submodularity and estimator property suites against a world).  Exit codes:
0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import traceback

import numpy as np

from . import harness
from .scenarios import generate_figure2_world, generate_figure3_world, load_config_file
from .submodular import check_monotone_submodular, check_second_order_submodular
from .bandit import EstimatorInput, estimate_reward
from .world import ConfigError, coverage_value

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    runtime failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="covgame", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep and write CSVs")
    run.add_argument("--scenario", choices=("figure2", "figure3", "custom"), required=True)
    run.add_argument("--config", help="TOML world config (required for --scenario custom)")
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--horizon", type=int, default=None)
    run.add_argument(
        "--strategies",
        default=None,
        help="comma-separated subset of neisel,nearest,random,all",
    )
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", required=True, help="output directory for the CSV files")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--snapshot-interval", type=int, default=None)
    run.add_argument(
        "--checkpoints",
        default=None,
        help="comma-separated duality-gap checkpoint rounds (default: 1,2,4,... plus T)",
    )

    summ = sub.add_parser("summarize", help="summarize a results directory")
    summ.add_argument("csv_dir")
    summ.add_argument("--json", action="store_true", help="emit machine-readable JSON")

    check = sub.add_parser(
        "check", help="run submodularity and estimator property suites on a world"
    )
    check.add_argument("--scenario", choices=("figure2", "figure3"), default=None)
    check.add_argument("--config", default=None, help="TOML world config")
    check.add_argument("--trials", type=int, default=1000)
    check.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    world = None
    overrides: dict = {}
    if args.scenario == "custom":
        if not args.config:
            raise ConfigError("--scenario custom requires --config")
        world, overrides = load_config_file(args.config)
    spec_kwargs = dict(overrides)
    if args.trials is not None:
        spec_kwargs["trials"] = args.trials
    if args.horizon is not None:
        spec_kwargs["horizon"] = args.horizon
    if args.strategies is not None:
        spec_kwargs["strategies"] = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    if args.seed is not None:
        spec_kwargs["seed"] = args.seed
    if args.snapshot_interval is not None:
        spec_kwargs["snapshot_interval"] = args.snapshot_interval
    if args.checkpoints is not None:
        spec_kwargs["checkpoints"] = tuple(
            int(t) for t in args.checkpoints.split(",") if t.strip()
        )
    spec_kwargs["workers"] = args.workers
    spec = harness.make_spec(args.scenario, args.out, world=world, **spec_kwargs)
    harness.run_experiment(spec)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    report = harness.summarize(args.csv_dir)
    print(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def _check_world(args):
    if args.config:
        world, _ = load_config_file(args.config)
        return world
    if args.scenario == "figure3":
        return generate_figure3_world(args.seed)
    return generate_figure2_world(args.seed)


def _cmd_check(args) -> int:
    world = _check_world(args)
    rng = np.random.default_rng(args.seed)
    ground = [(s.id, k) for s in world.sensors for k in range(s.orientations)]

    def fn(pairs, deployment):
        return coverage_value(world, pairs, deployment)

    failures = 0
    for name, checker in (
        ("monotone+submodular", check_monotone_submodular),
        ("second-order submodular", check_second_order_submodular),
    ):
        deployment = world.deployments[int(rng.integers(len(world.deployments)))]
        report = checker(fn, ground, deployment, args.trials, rng)
        status = "PASS" if report.passed else f"FAIL ({len(report.violations)} violations)"
        print(f"{name:<28} {status}")
        failures += 0 if report.passed else 1

    # Estimator unbiasedness: exact expectation must recover every reward.
    est_ok = True
    for _ in range(100):
        k = int(rng.integers(2, 7))
        probs = rng.dirichlet(np.ones(k))
        rewards = rng.random(k)
        expectation = np.zeros(k)
        for j in range(k):
            expectation += probs[j] * estimate_reward(
                EstimatorInput(j, float(probs[j]), float(rewards[j])), k
            )
        if not np.allclose(expectation, rewards, atol=1e-12, rtol=0.0):
            est_ok = False
            break
    print(f"{'estimator unbiasedness':<28} {'PASS' if est_ok else 'FAIL'}")
    failures += 0 if est_ok else 1

    if failures:
        print(f"{failures} property suite(s) failed")
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help exits 0; usage errors exit 1
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        return _cmd_check(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # noqa: BLE001 - CLI boundary
        traceback.print_exc()
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
