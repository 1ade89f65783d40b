"""Experiment front-end: Monte Carlo orchestration, CSV output and summaries.

A run sweeps (strategy, trial) pairs, each executed with its own master
seed derived from the experiment seed, a canonical per-strategy code and
the trial index, so outputs are byte-identical regardless of worker count
or sweep order.  Three files are produced per experiment: per-round
``metrics.csv``, checkpointed ``duality_gap.csv`` and the cross-trial
``summary.csv``.  Wall-clock timings are reported on stdout only; nothing
nondeterministic is written to disk.
"""

from __future__ import annotations

import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .engine import (
    GameConfig,
    NEIGHBOR_STRATEGIES,
    attacker_regret,
    defender_regret,
    default_checkpoints,
    run_game,
)
from .equilibrium import duality_gap_series
from .payoff import DEFAULT_ENUMERATION_CAP
from .scenarios import generate_figure2_world, generate_figure3_world
from .world import ConfigError, WorldConfig

METRICS_FILE = "metrics.csv"
GAP_FILE = "duality_gap.csv"
SUMMARY_FILE = "summary.csv"

METRICS_COLUMNS = (
    "trial",
    "round",
    "strategy",
    "deployment_id",
    "utility",
    "running_avg_utility",
    "attacker_estimated_reward",
    "defender_regret_to_date_flag",
)
GAP_COLUMNS = (
    "trial",
    "checkpoint_t",
    "best_response",
    "worst_response",
    "payoff_at_pair",
    "eps_hat",
    "exact",
    "strategy",
)
SUMMARY_COLUMNS = (
    "strategy",
    "trials",
    "horizon",
    "mean_final_coverage",
    "stderr_final_coverage",
    "mean_final_eps_hat",
    "stderr_final_eps_hat",
    "mean_defender_regret",
    "mean_attacker_regret",
    "regret_exact",
)

# Canonical per-strategy seed codes; independent of sweep order.
_STRATEGY_CODES = {name: code for code, name in enumerate(NEIGHBOR_STRATEGIES)}

_SCENARIO_DEFAULTS = {
    "figure2": {"trials": 20, "horizon": 15000, "strategies": ("neisel",)},
    "figure3": {"trials": 20, "horizon": 10000, "strategies": NEIGHBOR_STRATEGIES},
    "custom": {"trials": 1, "horizon": 1000, "strategies": ("neisel",)},
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One reproducible experiment: scenario, sweep and output location."""

    scenario: str
    out_dir: Path
    trials: int
    horizon: int
    strategies: tuple[str, ...]
    seed: int = 0
    world: WorldConfig | None = None
    checkpoints: tuple[int, ...] | None = None
    snapshot_interval: int = 10
    workers: int = 1
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self) -> None:
        if self.scenario not in _SCENARIO_DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.strategies:
            raise ConfigError("at least one neighbor strategy is required")
        bad = [s for s in self.strategies if s not in NEIGHBOR_STRATEGIES]
        if bad:
            raise ConfigError(f"unknown neighbor strategies: {', '.join(bad)}")
        if self.scenario == "custom" and self.world is None:
            raise ConfigError("custom scenario requires an explicit world config")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def make_spec(
    scenario: str,
    out_dir,
    *,
    trials: int | None = None,
    horizon: int | None = None,
    strategies: Sequence[str] | None = None,
    seed: int = 0,
    world: WorldConfig | None = None,
    **kwargs: Any,
) -> ExperimentSpec:
    """ExperimentSpec with per-scenario defaults filled in."""
    defaults = _SCENARIO_DEFAULTS.get(scenario)
    if defaults is None:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return ExperimentSpec(
        scenario=scenario,
        out_dir=Path(out_dir),
        trials=defaults["trials"] if trials is None else trials,
        horizon=defaults["horizon"] if horizon is None else horizon,
        strategies=tuple(strategies) if strategies is not None else defaults["strategies"],
        seed=seed,
        world=world,
        **kwargs,
    )


def scenario_world(spec: ExperimentSpec) -> WorldConfig:
    if spec.scenario == "figure2":
        return generate_figure2_world(spec.seed)
    if spec.scenario == "figure3":
        return generate_figure3_world(spec.seed)
    assert spec.world is not None
    return spec.world


def trial_master_seed(experiment_seed: int, strategy: str, trial: int) -> int:
    """64-bit master seed for one (strategy, trial) run."""
    ss = np.random.SeedSequence([experiment_seed, _STRATEGY_CODES[strategy], trial])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class TrialSummary:
    """Final per-trial figures; wall time never reaches the CSVs."""

    strategy: str
    trial: int
    final_avg_utility: float
    final_eps_hat: float
    defender_regret: float
    attacker_regret: float
    regret_exact: bool
    wall_time: float


@dataclass
class _TrialOutput:
    strategy: str
    trial: int
    deployment_ids: np.ndarray
    utility: np.ndarray
    running_avg: np.ndarray
    attacker_rhat: np.ndarray
    regret_to_date: np.ndarray | None
    gap_rows: list[tuple[int, float, float, float, float, bool]]
    summary: TrialSummary


@dataclass(frozen=True)
class _TrialTask:
    world: WorldConfig
    strategy: str
    trial: int
    horizon: int
    master_seed: int
    snapshot_interval: int
    checkpoints: tuple[int, ...] | None
    enumeration_cap: int


def _execute_trial(task: _TrialTask) -> _TrialOutput:
    started = time.perf_counter()
    config = GameConfig(
        world=task.world,
        horizon=task.horizon,
        neighbor_strategy=task.strategy,
        master_seed=task.master_seed,
        snapshot_interval=task.snapshot_interval,
        checkpoints=task.checkpoints,
        enumeration_cap=task.enumeration_cap,
    )
    result = run_game(config)
    gap = duality_gap_series(
        result.metrics.prefix_checkpoints, task.world, task.enumeration_cap
    )
    gap_rows = [
        (
            t,
            cert.best_response_value_vs_ybar,
            cert.worst_response_value_vs_xbar,
            cert.payoff_at_pair,
            cert.eps_hat,
            cert.exact,
        )
        for t, cert in gap
    ]
    d_reg = defender_regret(result.records, task.world, task.enumeration_cap)
    a_reg = attacker_regret(result.records, task.world)
    summary = TrialSummary(
        strategy=task.strategy,
        trial=task.trial,
        final_avg_utility=float(result.metrics.running_avg_utility[-1]),
        final_eps_hat=gap_rows[-1][4],
        defender_regret=d_reg.value,
        attacker_regret=a_reg.value,
        regret_exact=d_reg.exact,
        wall_time=time.perf_counter() - started,
    )
    return _TrialOutput(
        strategy=task.strategy,
        trial=task.trial,
        deployment_ids=np.asarray([r.deployment_id for r in result.records], dtype=np.int64),
        utility=result.metrics.utility,
        running_avg=result.metrics.running_avg_utility,
        attacker_rhat=result.metrics.attacker_estimated_reward,
        regret_to_date=result.metrics.defender_regret_to_date,
        gap_rows=gap_rows,
        summary=summary,
    )


@dataclass
class StrategySummary:
    """Cross-trial aggregate for one neighbor strategy."""

    strategy: str
    trials: int
    horizon: int
    mean_final_coverage: float
    stderr_final_coverage: float
    mean_final_eps_hat: float
    stderr_final_eps_hat: float
    mean_defender_regret: float
    mean_attacker_regret: float
    regret_exact: bool


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def aggregate_trials(
    summaries: Sequence[TrialSummary], horizon: int
) -> list[StrategySummary]:
    """Per-strategy means and standard errors, ranked by mean coverage."""
    by_strategy: dict[str, list[TrialSummary]] = {}
    for s in summaries:
        by_strategy.setdefault(s.strategy, []).append(s)
    rows = []
    for strategy, group in by_strategy.items():
        cov_mean, cov_se = _mean_stderr([g.final_avg_utility for g in group])
        eps_mean, eps_se = _mean_stderr([g.final_eps_hat for g in group])
        rows.append(
            StrategySummary(
                strategy=strategy,
                trials=len(group),
                horizon=horizon,
                mean_final_coverage=cov_mean,
                stderr_final_coverage=cov_se,
                mean_final_eps_hat=eps_mean,
                stderr_final_eps_hat=eps_se,
                mean_defender_regret=float(np.mean([g.defender_regret for g in group])),
                mean_attacker_regret=float(np.mean([g.attacker_regret for g in group])),
                regret_exact=all(g.regret_exact for g in group),
            )
        )
    rows.sort(key=lambda r: (-r.mean_final_coverage, r.strategy))
    return rows


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    files: dict[str, Path]
    trial_summaries: list[TrialSummary]
    strategy_summaries: list[StrategySummary]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(spec: ExperimentSpec, echo=print) -> ExperimentResult:
    """Execute the sweep and write metrics, duality-gap and summary CSVs."""
    world = scenario_world(spec)
    checkpoints = spec.checkpoints or default_checkpoints(spec.horizon)
    tasks = [
        _TrialTask(
            world=world,
            strategy=strategy,
            trial=trial,
            horizon=spec.horizon,
            master_seed=trial_master_seed(spec.seed, strategy, trial),
            snapshot_interval=spec.snapshot_interval,
            checkpoints=checkpoints,
            enumeration_cap=spec.enumeration_cap,
        )
        for strategy in spec.strategies
        for trial in range(spec.trials)
    ]

    outputs: dict[tuple[str, int], _TrialOutput] = {}
    started = time.perf_counter()
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for out in pool.map(_execute_trial, tasks):
                outputs[(out.strategy, out.trial)] = out
    else:
        for task in tasks:
            out = _execute_trial(task)
            outputs[(out.strategy, out.trial)] = out
    elapsed = time.perf_counter() - started

    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "metrics": out_dir / METRICS_FILE,
        "gaps": out_dir / GAP_FILE,
        "summary": out_dir / SUMMARY_FILE,
    }

    with open(files["metrics"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for strategy in spec.strategies:
            for trial in range(spec.trials):
                out = outputs[(strategy, trial)]
                regret = out.regret_to_date
                for idx in range(spec.horizon):
                    writer.writerow(
                        (
                            trial,
                            idx + 1,
                            strategy,
                            int(out.deployment_ids[idx]),
                            _fmt(float(out.utility[idx])),
                            _fmt(float(out.running_avg[idx])),
                            _fmt(float(out.attacker_rhat[idx])),
                            _fmt(float(regret[idx])) if regret is not None else "",
                        )
                    )

    with open(files["gaps"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GAP_COLUMNS)
        for strategy in spec.strategies:
            for trial in range(spec.trials):
                out = outputs[(strategy, trial)]
                for t, best, worst, payoff, eps, exact in out.gap_rows:
                    writer.writerow(
                        (
                            trial,
                            t,
                            _fmt(best),
                            _fmt(worst),
                            _fmt(payoff),
                            _fmt(eps),
                            _fmt(exact),
                            strategy,
                        )
                    )

    trial_summaries = [
        outputs[(strategy, trial)].summary
        for strategy in spec.strategies
        for trial in range(spec.trials)
    ]
    strategy_summaries = aggregate_trials(trial_summaries, spec.horizon)
    with open(files["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for row in strategy_summaries:
            writer.writerow(
                (
                    row.strategy,
                    row.trials,
                    row.horizon,
                    _fmt(row.mean_final_coverage),
                    _fmt(row.stderr_final_coverage),
                    _fmt(row.mean_final_eps_hat),
                    _fmt(row.stderr_final_eps_hat),
                    _fmt(row.mean_defender_regret),
                    _fmt(row.mean_attacker_regret),
                    _fmt(row.regret_exact),
                )
            )

    if echo is not None:
        per_trial = sorted(s.wall_time for s in trial_summaries)
        echo(
            f"completed {len(tasks)} runs in {elapsed:.1f}s "
            f"(median trial {per_trial[len(per_trial) // 2]:.1f}s); wrote "
            + ", ".join(str(p) for p in files.values())
        )
    return ExperimentResult(spec, files, trial_summaries, strategy_summaries)


# ---------------------------------------------------------------------------
# Summaries over previously written CSV directories.
# ---------------------------------------------------------------------------


@dataclass
class SummaryReport:
    rows: list[dict]
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "warnings": self.warnings}, indent=2)

    def to_text(self) -> str:
        if not self.rows:
            lines = ["(no harness CSVs found)"]
        else:
            header = (
                f"{'strategy':<10} {'trials':>6} {'final coverage':>22} {'final eps_hat':>22}"
            )
            lines = [header, "-" * len(header)]
            for row in self.rows:
                cov = f"{row['mean_final_coverage']:.4f} +/- {row['stderr_final_coverage']:.4f}"
                if row.get("mean_final_eps_hat") is None:
                    eps = "n/a"
                else:
                    eps = f"{row['mean_final_eps_hat']:.4f} +/- {row['stderr_final_eps_hat']:.4f}"
                lines.append(
                    f"{row['strategy']:<10} {row['trials']:>6} {cov:>22} {eps:>22}"
                )
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def _final_by_trial(path: Path, key_cols, value_col, warnings: list[str]):
    """Last row value per (strategy, trial) from a harness CSV."""
    finals: dict[tuple[str, int], float] = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for line_no, row in enumerate(reader, start=2):
                try:
                    key = (row[key_cols[0]], int(row[key_cols[1]]))
                    finals[key] = float(row[value_col])
                except (KeyError, TypeError, ValueError):
                    warnings.append(f"{path.name}: skipped malformed line {line_no}")
    except FileNotFoundError:
        warnings.append(f"{path.name}: missing")
    except OSError as err:
        warnings.append(f"{path.name}: unreadable ({err})")
    return finals


def summarize(csv_dir) -> SummaryReport:
    """Aggregate a harness output directory into per-strategy statistics.

    Tolerant of missing or partially corrupt files: problems are reported as
    warnings and whatever can be summarized still is.
    """
    csv_dir = Path(csv_dir)
    warnings: list[str] = []
    coverage = _final_by_trial(
        csv_dir / METRICS_FILE, ("strategy", "trial"), "running_avg_utility", warnings
    )
    eps = _final_by_trial(csv_dir / GAP_FILE, ("strategy", "trial"), "eps_hat", warnings)

    strategies: dict[str, list[int]] = {}
    for strategy, trial in coverage:
        strategies.setdefault(strategy, []).append(trial)
    rows = []
    for strategy in sorted(strategies):
        trials = sorted(strategies[strategy])
        cov_mean, cov_se = _mean_stderr([coverage[(strategy, t)] for t in trials])
        eps_vals = [eps[(strategy, t)] for t in trials if (strategy, t) in eps]
        if eps_vals:
            eps_mean, eps_se = _mean_stderr(eps_vals)
        else:
            eps_mean = eps_se = None
        rows.append(
            {
                "strategy": strategy,
                "trials": len(trials),
                "mean_final_coverage": cov_mean,
                "stderr_final_coverage": cov_se,
                "mean_final_eps_hat": eps_mean,
                "stderr_final_eps_hat": eps_se,
            }
        )
    rows.sort(key=lambda r: (-r["mean_final_coverage"], r["strategy"]))
    if not rows and not warnings:
        warnings.append(f"no harness CSVs in {csv_dir}")
    return SummaryReport(rows=rows, warnings=warnings)
