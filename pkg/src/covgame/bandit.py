"""Adversarial bandit engines.

One exponential-weights core serves three users: the attacker's deployment
bandit (loss-seeking update, exp(-eta * rhat)), each agent's orientation
bandit (gain-seeking, exp(+eta * rhat)) and each agent's per-slot neighbor
bandits (gain-seeking).  Weights live in log space so that tens of
thousands of multiplicative updates neither underflow nor overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

GAIN = "gain"
LOSS = "loss"

_KIND_DIRECTION = {"attacker": LOSS, "action": GAIN, "neighbor": GAIN}


class Exp3State:
    """Weight vector, learning rate and update direction of one bandit."""

    __slots__ = ("log_weights", "eta", "direction", "round_count", "_probs")

    def __init__(self, num_arms: int, eta: float, direction: str):
        if num_arms < 1:
            raise ValueError("an EXP3 instance needs at least one arm")
        if direction not in (GAIN, LOSS):
            raise ValueError(f"unknown direction {direction!r}")
        self.log_weights = np.zeros(num_arms)
        self.eta = float(eta)
        self.direction = direction
        self.round_count = 0
        self._probs = np.full(num_arms, 1.0 / num_arms)

    @property
    def num_arms(self) -> int:
        return self.log_weights.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        """Current arm distribution (normalized weights); do not mutate."""
        return self._probs

    def _refresh(self) -> None:
        shifted = self.log_weights - self.log_weights.max()
        w = np.exp(shifted)
        self._probs = w / w.sum()


def exp3_init(num_arms: int, horizon: int, kind: str) -> Exp3State:
    """Fresh uniform-weight state with rate sqrt(2 log K / (K T)).

    ``kind`` selects the update direction: the attacker bandit is
    loss-seeking, the action and neighbor bandits are gain-seeking.
    """
    if kind not in _KIND_DIRECTION:
        raise ValueError(f"unknown bandit kind {kind!r}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if num_arms < 1:
        raise ValueError("arm count must be >= 1")
    eta = math.sqrt(2.0 * math.log(num_arms) / (num_arms * horizon)) if num_arms > 1 else 0.0
    return Exp3State(num_arms, eta, _KIND_DIRECTION[kind])


def exp3_sample(state: Exp3State, rng: np.random.Generator) -> tuple[int, float]:
    """Draw one arm from the current distribution; returns (arm, its mass)."""
    probs = state._probs
    u = rng.random()
    arm = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    if arm >= probs.shape[0]:  # u landed on accumulated round-off past 1.0
        arm = probs.shape[0] - 1
    return arm, float(probs[arm])


@dataclass(frozen=True)
class EstimatorInput:
    """One round of bandit feedback for the importance-weighted estimator."""

    chosen_arm: int
    chosen_prob: float
    observed_reward: float

    def __post_init__(self) -> None:
        if not self.chosen_prob > 0.0:
            raise ValueError("chosen arm must have positive probability")
        if not 0.0 <= self.observed_reward <= 1.0:
            raise ValueError("observed reward must be clamped to [0, 1] before estimation")


def estimate_reward(feedback: EstimatorInput, num_arms: int) -> np.ndarray:
    """Loss-based importance-weighted reward estimate over all arms.

    rhat_a = 1 for unchosen arms; rhat_chosen = 1 - (1 - r) / p_chosen.
    Unbiased: summing p_j * rhat_a over the possible chosen arms j recovers
    the true reward of every arm exactly.
    """
    rhat = np.ones(num_arms)
    rhat[feedback.chosen_arm] = 1.0 - (1.0 - feedback.observed_reward) / feedback.chosen_prob
    return rhat


def exp3_update(state: Exp3State, rhat: np.ndarray) -> Exp3State:
    """Multiplicative update in the state's direction; renormalizes in place."""
    if rhat.shape != state.log_weights.shape:
        raise ValueError("estimate vector does not match the arm count")
    sign = 1.0 if state.direction == GAIN else -1.0
    state.log_weights += sign * state.eta * rhat
    state.round_count += 1
    state._refresh()
    return state


def clamp01(x: float) -> float:
    """Clamp a reward to [0, 1]; guards float noise, never rescales."""
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


class ActSel:
    """Per-agent orientation bandit (gain-seeking EXP3).

    The caller draws an orientation at the start of the round and applies
    the marginal-gain reward once the round's neighborhoods are known.
    """

    def __init__(self, num_orientations: int, horizon: int):
        self.state = exp3_init(num_orientations, horizon, kind="action")

    def draw(self, rng: np.random.Generator) -> tuple[np.ndarray, int, float]:
        """Sample an orientation; returns (p_t snapshot, arm, arm probability)."""
        snapshot = self.state.probabilities.copy()
        arm, prob = exp3_sample(self.state, rng)
        return snapshot, arm, prob

    def apply_reward(self, arm: int, prob: float, reward: float) -> None:
        """Feed the clamped marginal-gain reward for the drawn orientation."""
        rhat = estimate_reward(EstimatorInput(arm, prob, clamp01(reward)), self.state.num_arms)
        exp3_update(self.state, rhat)


class NeiSel:
    """Per-agent neighbor selection: one EXP3 slot per unit of bandwidth.

    Slot k draws a candidate peer, is rewarded with the increment of the
    Value of Coordination contributed by that draw (clamped to [0, 1]) and
    updates only its own weights.  The returned neighborhood is the set of
    drawn peers, so repeated draws collapse (their increments are zero).
    """

    def __init__(self, peer_ids: Sequence[int], bandwidth: int, horizon: int):
        self.peers = tuple(sorted(peer_ids))
        self.bandwidth = bandwidth
        if self.peers and bandwidth > 0:
            self.slots = [exp3_init(len(self.peers), horizon, kind="neighbor") for _ in range(bandwidth)]
        else:
            self.slots = []

    def select(
        self,
        overlap_value: Callable[[tuple[int, ...]], float],
        slot_rngs: Sequence[np.random.Generator],
    ) -> tuple[frozenset[int], tuple[float, ...], tuple[int, ...]]:
        """Run all slots for one round.

        ``overlap_value(peers)`` must return the VoC of the owning agent's
        current action against the actions of the given peer tuple; the slot
        reward is its increment between consecutive prefixes.  Returns the
        neighborhood set, per-slot rewards and the raw draw sequence.
        """
        drawn: list[int] = []
        rewards: list[float] = []
        prev = 0.0
        for k, slot in enumerate(self.slots):
            arm, prob = exp3_sample(slot, slot_rngs[k])
            peer = self.peers[arm]
            drawn.append(peer)
            current = overlap_value(tuple(drawn))
            reward = clamp01(current - prev)
            prev = current
            rewards.append(reward)
            rhat = estimate_reward(EstimatorInput(arm, prob, reward), slot.num_arms)
            exp3_update(slot, rhat)
        return frozenset(drawn), tuple(rewards), tuple(drawn)
