"""Joint-action enumeration and payoff tables.

The defender's pure-strategy space is the mixed-radix product of the
agents' orientation counts.  When that product fits under an enumeration
cap, the full payoff matrix G (joint actions x deployments) is materialized
once per world: exact best responses, hindsight optima and the game-value
oracle all reduce to a matvec plus a max.  Above the cap the callers fall
back to an agent-by-agent greedy surrogate that is flagged as inexact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import CoverageTables

DEFAULT_ENUMERATION_CAP = 1_000_000

_CHUNK_ROWS = 8192


class EnumerationCapExceeded(RuntimeError):
    """The joint-action space is too large for exact enumeration."""


def joint_action_count(arm_counts: tuple[int, ...]) -> int:
    n = 1
    for k in arm_counts:
        n *= k
    return n


class PayoffTable:
    """Covered-target counts for every (joint action, deployment) pair.

    ``counts`` is int64 of shape (num_joint_actions, num_deployments); the
    float payoff matrix is counts / m.  Row order is mixed-radix with the
    last agent's orientation varying fastest.
    """

    def __init__(self, tables: CoverageTables):
        self.arm_counts = tables.arm_counts
        self.m = tables.m
        self.num_joint = joint_action_count(self.arm_counts)
        num_dep = tables.num_deployments
        counts = np.empty((self.num_joint, num_dep), dtype=np.int64)
        n_agents = len(self.arm_counts)
        radices = np.asarray(self.arm_counts, dtype=np.int64)
        flat = [c.reshape(c.shape[0], -1) for c in tables.covered]  # (K_i, |Y|*m)
        for start in range(0, self.num_joint, _CHUNK_ROWS):
            stop = min(start + _CHUNK_ROWS, self.num_joint)
            rows = np.arange(start, stop, dtype=np.int64)
            union = None
            rem = rows
            for i in range(n_agents - 1, -1, -1):
                arms = rem % radices[i]
                rem = rem // radices[i]
                block = flat[i][arms]  # fancy indexing: already a fresh copy
                union = block if union is None else np.logical_or(union, block, out=union)
            counts[start:stop] = (
                union.reshape(stop - start, num_dep, self.m).sum(axis=2, dtype=np.int64)
            )
        self.counts = counts
        self.matrix = counts / self.m  # float64 payoffs f(A, b)

    def assignment(self, row: int) -> tuple[int, ...]:
        """Decode a row index into the per-agent orientation tuple."""
        out = []
        for k in reversed(self.arm_counts):
            out.append(row % k)
            row //= k
        return tuple(reversed(out))


def payoff_table(tables: CoverageTables, cap: int = DEFAULT_ENUMERATION_CAP) -> PayoffTable:
    """Build (or fetch the cached) payoff table, refusing above the cap."""
    n = joint_action_count(tables.arm_counts)
    if n > cap:
        raise EnumerationCapExceeded(
            f"{n} joint actions exceed the enumeration cap of {cap}"
        )
    cached = getattr(tables, "_payoff_table", None)
    if cached is None:
        cached = PayoffTable(tables)
        tables._payoff_table = cached
    return cached


def greedy_joint_action(
    tables: CoverageTables, deployment_weights: np.ndarray
) -> tuple[tuple[int, ...], float]:
    """Agent-by-agent greedy maximization of the weighted coverage.

    A lower-bound surrogate for the exact best response: agents commit an
    orientation in id order, each maximizing the weighted count of newly
    covered targets.  Ties break toward the lower orientation index.
    """
    num_dep = tables.num_deployments
    weights = np.repeat(np.asarray(deployment_weights, dtype=np.float64), tables.m)
    union = np.zeros(num_dep * tables.m, dtype=bool)
    chosen: list[int] = []
    for i in range(len(tables.arm_counts)):
        flat = tables.covered[i].reshape(tables.arm_counts[i], -1)
        gains = (flat & ~union) @ weights
        k = int(np.argmax(gains))
        chosen.append(k)
        union |= flat[k]
    value = float(union @ weights) / tables.m
    return tuple(chosen), value


@dataclass(frozen=True)
class BestResponse:
    """Value (and witness) of a pure defender response to mixed attacker play."""

    value: float
    joint_action: tuple[int, ...]
    exact: bool


def best_response_to_attacker(
    tables: CoverageTables,
    deployment_weights: np.ndarray,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> BestResponse:
    """max over joint actions A of sum_b w_b f(A, b), exact under the cap."""
    weights = np.asarray(deployment_weights, dtype=np.float64)
    if joint_action_count(tables.arm_counts) <= cap:
        table = payoff_table(tables, cap)
        scores = table.matrix @ weights
        row = int(np.argmax(scores))
        return BestResponse(float(scores[row]), table.assignment(row), exact=True)
    action, value = greedy_joint_action(tables, weights)
    return BestResponse(value, action, exact=False)
