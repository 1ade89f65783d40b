"""Repeated-play engine for the coverage game.

One run executes T rounds of the full dynamic: the attacker samples a
deployment from its EXP3 distribution, every agent draws an orientation,
neighborhoods form (learned or baseline), marginal-gain and overlap rewards
are routed back into the bandits, the attacker updates from its realized
utility, and the strategy-averaging accumulators advance.  Everything is
driven by per-(entity, role) random substreams derived from one master
seed, so replays are bit-identical regardless of agent iteration order or
worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import bandit
from .payoff import (
    DEFAULT_ENUMERATION_CAP,
    greedy_joint_action,
    joint_action_count,
    payoff_table,
)
from .world import ConfigError, CoverageTables, WorldConfig, coverage_tables, reachable_peers

NEIGHBOR_STRATEGIES = ("neisel", "nearest", "random", "all")

# Role codes for the substream scheme.
_ROLE_ATTACKER = 0
_ROLE_ACTION = 0
_ROLE_NEIGHBOR_SLOT_BASE = 1
_ROLE_BASELINE_NEIGHBORS = 10_000


def substream(master_seed: int, entity: int, role: int) -> np.random.Generator:
    """Independent deterministic stream for (entity, role) under one seed.

    Entity 0 is the attacker; agent i is entity i + 1.
    """
    return np.random.default_rng(np.random.SeedSequence([master_seed, entity, role]))


@dataclass(frozen=True)
class GameConfig:
    """One run of the repeated game."""

    world: WorldConfig
    horizon: int
    neighbor_strategy: str = "neisel"
    master_seed: int = 0
    snapshot_interval: int = 10
    checkpoints: tuple[int, ...] | None = None
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.neighbor_strategy not in NEIGHBOR_STRATEGIES:
            raise ConfigError(
                f"neighbor_strategy must be one of {NEIGHBOR_STRATEGIES}, "
                f"got {self.neighbor_strategy!r}"
            )
        if self.snapshot_interval < 1:
            raise ConfigError("snapshot_interval must be >= 1")


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """Geometric grid {1, 2, 4, ...} plus the final round."""
    ts = []
    t = 1
    while t <= horizon:
        ts.append(t)
        t *= 2
    if ts[-1] != horizon:
        ts.append(horizon)
    return tuple(ts)


@dataclass
class RoundRecord:
    """Everything produced in one round."""

    t: int
    deployment_id: int
    joint_action: tuple[int, ...]
    neighborhoods: tuple[frozenset[int], ...]
    utility: float
    actsel_rewards: tuple[float, ...]
    neisel_slot_rewards: tuple[tuple[float, ...], ...]
    attacker_distribution: np.ndarray | None = None
    defender_marginals: tuple[np.ndarray, ...] | None = None


@dataclass
class PrefixCheckpoint:
    """Averaging accumulators frozen after round t (inclusive)."""

    t: int
    attacker_strategy_sum: np.ndarray
    deployment_value_sums: np.ndarray


@dataclass
class AveragedStrategies:
    """Running aggregates sufficient to price the averaged strategy pair.

    The averaged defender strategy is a mixture of per-round product
    distributions and is never materialized; its payoff against any pure
    deployment b is deployment_value_sums[b] / rounds, which is exact.
    """

    attacker_strategy_sum: np.ndarray
    defender_marginal_sums: list[np.ndarray]
    deployment_value_sums: np.ndarray
    rounds: int

    @property
    def attacker_avg(self) -> np.ndarray:
        return self.attacker_strategy_sum / self.rounds

    @property
    def defender_payoffs(self) -> np.ndarray:
        """Exact payoff of the averaged defender strategy vs each deployment."""
        return self.deployment_value_sums / self.rounds


@dataclass
class MetricSeries:
    """Per-round scalar series plus the checkpointed prefix accumulators."""

    utility: np.ndarray
    running_avg_utility: np.ndarray
    attacker_estimated_reward: np.ndarray
    defender_regret_to_date: np.ndarray | None
    defender_regret_exact: bool
    prefix_checkpoints: list[PrefixCheckpoint] = field(default_factory=list)


@dataclass
class GameResult:
    records: list[RoundRecord]
    averages: AveragedStrategies
    metrics: MetricSeries


def baseline_neighbors(
    strategy: str,
    agent_id: int,
    world: WorldConfig,
    rng: np.random.Generator,
    peers: Sequence[int] | None = None,
) -> frozenset[int]:
    """Non-learned neighborhood rules.

    nearest: the bandwidth-many closest reachable peers, ties by lower id.
    random: bandwidth-many uniform draws without replacement.
    all: the whole reachable set, ignoring bandwidth.
    """
    if strategy == "neisel":
        raise ValueError("neisel neighborhoods are formed by the learned selector")
    if strategy not in NEIGHBOR_STRATEGIES:
        raise ValueError(f"unknown neighbor strategy {strategy!r}")
    sensor = world.sensors[agent_id]
    if peers is None:
        peers = sorted(reachable_peers(world)[agent_id])
    else:
        peers = sorted(peers)
    if strategy == "all":
        return frozenset(peers)
    if not peers or sensor.bandwidth == 0:
        return frozenset()
    if strategy == "nearest":
        xi, yi = sensor.position
        ranked = sorted(
            peers,
            key=lambda j: (
                (world.sensors[j].position[0] - xi) ** 2
                + (world.sensors[j].position[1] - yi) ** 2,
                j,
            ),
        )
        return frozenset(ranked[: sensor.bandwidth])
    # random
    size = min(sensor.bandwidth, len(peers))
    picked = rng.choice(np.asarray(peers, dtype=np.int64), size=size, replace=False)
    return frozenset(int(j) for j in picked)


def run_game(config: GameConfig, _agent_order: Sequence[int] | None = None) -> GameResult:
    """Execute the full repeated-play dynamic for config.horizon rounds.

    ``_agent_order`` only reorders the per-round iteration over agents; the
    per-entity substreams make the outcome identical for any order (used by
    the round-barrier tests).
    """
    world = config.world
    tables = coverage_tables(world)
    horizon = config.horizon
    n_agents = len(world.sensors)
    num_dep = tables.num_deployments
    m = tables.m
    agent_order = tuple(_agent_order) if _agent_order is not None else tuple(range(n_agents))

    peers_map = reachable_peers(world)
    sorted_peers = [tuple(sorted(peers_map[i])) for i in range(n_agents)]

    # Bandit instances and their substreams.
    attacker = bandit.exp3_init(num_dep, horizon, kind="attacker")
    attacker_rng = substream(config.master_seed, 0, _ROLE_ATTACKER)
    actsel = [bandit.ActSel(world.sensors[i].orientations, horizon) for i in range(n_agents)]
    action_rngs = [substream(config.master_seed, i + 1, _ROLE_ACTION) for i in range(n_agents)]
    neisel = [
        bandit.NeiSel(sorted_peers[i], world.sensors[i].bandwidth, horizon)
        for i in range(n_agents)
    ]
    neighbor_slot_rngs = [
        [
            substream(config.master_seed, i + 1, _ROLE_NEIGHBOR_SLOT_BASE + k)
            for k in range(world.sensors[i].bandwidth)
        ]
        for i in range(n_agents)
    ]
    baseline_rngs = [
        substream(config.master_seed, i + 1, _ROLE_BASELINE_NEIGHBORS) for i in range(n_agents)
    ]
    # nearest/all neighborhoods never change; compute them once.
    static_hoods: list[frozenset[int]] | None = None
    if config.neighbor_strategy in ("nearest", "all"):
        static_hoods = [
            baseline_neighbors(
                config.neighbor_strategy, i, world, baseline_rngs[i], sorted_peers[i]
            )
            for i in range(n_agents)
        ]

    # Hindsight-regret tracking via the exact payoff table when enumerable.
    # float64 is exact here: every product round-count * covered-count stays
    # far below 2**53.
    track_regret = joint_action_count(tables.arm_counts) <= config.enumeration_cap
    counts_matrix = (
        payoff_table(tables, config.enumeration_cap).counts.astype(np.float64)
        if track_regret
        else None
    )

    checkpoints = set(config.checkpoints or default_checkpoints(horizon))

    # Accumulators.
    ybar_sum = np.zeros(num_dep)
    marginal_sums = [np.zeros(world.sensors[i].orientations) for i in range(n_agents)]
    value_sums = np.zeros(num_dep)
    deployment_rounds = np.zeros(num_dep, dtype=np.int64)
    covered_cumulative = 0  # sum over rounds of covered-target counts
    cover_prob_rows = np.empty((n_agents, num_dep * m))

    records: list[RoundRecord] = []
    utility_series = np.empty(horizon)
    running_avg_series = np.empty(horizon)
    attacker_rhat_series = np.empty(horizon)
    regret_series = np.empty(horizon) if track_regret else None
    prefix_checkpoints: list[PrefixCheckpoint] = []

    masks = tables.masks
    for t in range(1, horizon + 1):
        # (1) Attacker samples the deployment from q_t.
        q_snapshot = attacker.probabilities.copy()
        b, b_prob = bandit.exp3_sample(attacker, attacker_rng)

        # (2) Every agent draws an orientation.
        p_snapshots: list[np.ndarray] = [None] * n_agents  # type: ignore[list-item]
        actions = [0] * n_agents
        action_probs = [0.0] * n_agents
        for i in agent_order:
            snap, arm, prob = actsel[i].draw(action_rngs[i])
            p_snapshots[i] = snap
            actions[i] = arm
            action_probs[i] = prob

        # (3) Neighborhoods form; learned slots are rewarded by VoC increments.
        hoods: list[frozenset[int]] = [frozenset()] * n_agents
        slot_rewards: list[tuple[float, ...]] = [()] * n_agents
        if config.neighbor_strategy == "neisel":
            for i in agent_order:
                own_mask = masks[i][actions[i]][b]

                def overlap_value(drawn: tuple[int, ...], _own=own_mask, _b=b) -> float:
                    u = 0
                    for j in drawn:
                        u |= masks[j][actions[j]][_b]
                    return (_own & u).bit_count() / m

                hood, rewards, _ = neisel[i].select(overlap_value, neighbor_slot_rngs[i])
                hoods[i] = hood
                slot_rewards[i] = rewards
        elif static_hoods is not None:
            hoods = list(static_hoods)
        else:  # random baseline redraws every round
            for i in agent_order:
                hoods[i] = baseline_neighbors(
                    "random", i, world, baseline_rngs[i], sorted_peers[i]
                )

        # (4)-(5) Agents receive neighbor actions and update their
        # orientation bandits with the conditional marginal gain.
        marginal_rewards = [0.0] * n_agents
        for i in agent_order:
            neighbor_mask = 0
            for j in hoods[i]:
                neighbor_mask |= masks[j][actions[j]][b]
            own = masks[i][actions[i]][b]
            gain = ((own | neighbor_mask).bit_count() - neighbor_mask.bit_count()) / m
            marginal_rewards[i] = gain
            actsel[i].apply_reward(actions[i], action_probs[i], gain)

        # (6) Attacker observes the realized team utility and updates.
        covered = tables.joint_covered_count(actions, b)
        r_team = covered / m
        rhat_chosen = 1.0 - (1.0 - r_team) / b_prob
        attacker_feedback = bandit.EstimatorInput(b, b_prob, bandit.clamp01(r_team))
        bandit.exp3_update(attacker, bandit.estimate_reward(attacker_feedback, num_dep))

        # (7) Strategy-averaging accumulators.
        ybar_sum += q_snapshot
        for i in range(n_agents):
            marginal_sums[i] += p_snapshots[i]
            cover_prob_rows[i] = p_snapshots[i] @ tables.cover_flat[i]
        miss = np.prod(1.0 - cover_prob_rows, axis=0)
        value_sums += (1.0 - miss).reshape(num_dep, m).mean(axis=1)
        deployment_rounds[b] += 1
        covered_cumulative += covered

        utility_series[t - 1] = r_team
        running_avg_series[t - 1] = covered_cumulative / (m * t)
        attacker_rhat_series[t - 1] = rhat_chosen
        if track_regret:
            best_hindsight = (counts_matrix @ deployment_rounds).max()
            regret_series[t - 1] = (best_hindsight - covered_cumulative) / m

        keep_snapshot = (t - 1) % config.snapshot_interval == 0
        records.append(
            RoundRecord(
                t=t,
                deployment_id=b,
                joint_action=tuple(actions),
                neighborhoods=tuple(hoods),
                utility=r_team,
                actsel_rewards=tuple(marginal_rewards),
                neisel_slot_rewards=tuple(slot_rewards),
                attacker_distribution=q_snapshot if keep_snapshot else None,
                defender_marginals=tuple(p_snapshots) if keep_snapshot else None,
            )
        )
        if t in checkpoints:
            prefix_checkpoints.append(
                PrefixCheckpoint(t, ybar_sum.copy(), value_sums.copy())
            )

    averages = AveragedStrategies(
        attacker_strategy_sum=ybar_sum,
        defender_marginal_sums=marginal_sums,
        deployment_value_sums=value_sums,
        rounds=horizon,
    )
    metrics = MetricSeries(
        utility=utility_series,
        running_avg_utility=running_avg_series,
        attacker_estimated_reward=attacker_rhat_series,
        defender_regret_to_date=regret_series,
        defender_regret_exact=track_regret,
        prefix_checkpoints=prefix_checkpoints,
    )
    return GameResult(records=records, averages=averages, metrics=metrics)


@dataclass(frozen=True)
class RegretResult:
    """Cumulative regret; exact=False marks the greedy hindsight surrogate."""

    value: float
    exact: bool
    comparator: tuple[int, ...] | int


def defender_regret(
    records: Sequence[RoundRecord],
    world: WorldConfig,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> RegretResult:
    """Cumulative defender regret against the best fixed joint action.

    The hindsight optimum weighs each deployment by its realized round
    count.  Exact enumeration under the cap; otherwise the greedy surrogate
    yields a lower bound on the optimum (and hence on the regret), flagged
    via exact=False.
    """
    tables = coverage_tables(world)
    dep_counts = np.zeros(tables.num_deployments, dtype=np.int64)
    realized = 0
    for rec in records:
        dep_counts[rec.deployment_id] += 1
        realized += tables.joint_covered_count(rec.joint_action, rec.deployment_id)
    if joint_action_count(tables.arm_counts) <= cap:
        table = payoff_table(tables, cap)
        scores = table.counts @ dep_counts  # int64, exact
        row = int(np.argmax(scores))
        best = int(scores[row])
        return RegretResult((best - realized) / tables.m, True, table.assignment(row))
    action, value = greedy_joint_action(tables, dep_counts.astype(np.float64))
    return RegretResult(value - realized / tables.m, False, action)


def attacker_regret(records: Sequence[RoundRecord], world: WorldConfig) -> RegretResult:
    """Cumulative attacker regret against the best fixed deployment.

    Always exact: the deployment set is enumerated directly, in integer
    covered-count arithmetic.
    """
    tables = coverage_tables(world)
    totals = np.zeros(tables.num_deployments, dtype=np.int64)
    union = np.empty((tables.num_deployments, tables.m), dtype=bool)
    realized = 0
    for rec in records:
        realized += tables.joint_covered_count(rec.joint_action, rec.deployment_id)
        union[:] = False
        for i, k in enumerate(rec.joint_action):
            np.logical_or(union, tables.covered[i][k], out=union)
        totals += union.sum(axis=1, dtype=np.int64)
    best = int(totals.min())
    b_star = int(np.argmin(totals))
    return RegretResult((realized - best) / tables.m, True, b_star)
