"""Set-function machinery: marginal gains, Value of Coordination, curvature,
and randomized property checkers for the submodularity conditions the
coverage utility is supposed to satisfy.

A grounded set function is any callable ``fn(pairs, deployment) -> float``
over sets of (agent, orientation) pairs, e.g. a partial application of
:func:`covgame.world.coverage_value`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

GroundedSetFunction = Callable[[frozenset, object], float]

# Tolerance separating genuine violations from float round-off in generic
# set functions; the coverage utility never needs it (same-denominator
# count comparisons are exact).
_SLACK = 1e-12


def marginal_gain(
    fn: GroundedSetFunction,
    element: Hashable,
    base_set: Iterable,
    deployment: object,
) -> float:
    """fn(base | {element}) - fn(base); zero when element is already in base."""
    base = frozenset(base_set)
    return fn(base | {element}, deployment) - fn(base, deployment)


def voc(
    fn: GroundedSetFunction,
    action: Hashable,
    neighbor_actions: Iterable,
    deployment: object,
) -> float:
    """Value of Coordination of an action given its neighbors' actions.

    fn({action}) minus the marginal gain of the action on top of the
    neighbor actions; for the coverage utility this is exactly the overlap
    |covered(action) & covered(neighbors)| / m.
    """
    single = fn(frozenset([action]), deployment)
    return single - marginal_gain(fn, action, neighbor_actions, deployment)


def curvature(
    fn: GroundedSetFunction,
    ground_set: Iterable,
    deployment: object,
) -> float | None:
    """Curvature of fn over the ground set, in [0, 1].

    1 - min_v (fn(V) - fn(V \\ {v})) / fn(v), the min taken over singletons
    with fn(v) > 0.  Returns None when no singleton has positive value
    (curvature undefined).  Zero means modular; one means some element is
    fully redundant.
    """
    ground = sorted(frozenset(ground_set))
    full = frozenset(ground)
    f_full = fn(full, deployment)
    best_ratio = None
    for v in ground:
        f_v = fn(frozenset([v]), deployment)
        if f_v <= 0.0:
            continue
        ratio = (f_full - fn(full - {v}, deployment)) / f_v
        if best_ratio is None or ratio < best_ratio:
            best_ratio = ratio
    if best_ratio is None:
        return None
    return min(1.0, max(0.0, 1.0 - best_ratio))


@dataclass(frozen=True)
class Violation:
    """Witness of one failed inequality."""

    kind: str
    sets: dict
    lhs: float
    rhs: float


@dataclass
class CheckReport:
    """Outcome of a randomized property check."""

    trials: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def _random_chain(ground: Sequence, rng: np.random.Generator) -> tuple[frozenset, frozenset]:
    """A random pair A subset-of B over the ground set."""
    in_b = rng.random(len(ground)) < rng.random()
    in_a = in_b & (rng.random(len(ground)) < rng.random())
    b_set = frozenset(g for g, keep in zip(ground, in_b) if keep)
    a_set = frozenset(g for g, keep in zip(ground, in_a) if keep)
    return a_set, b_set


def check_monotone_submodular(
    fn: GroundedSetFunction,
    ground_set: Iterable,
    deployment: object,
    trials: int,
    rng: np.random.Generator,
) -> CheckReport:
    """Randomized check of normalization, monotonicity and diminishing returns.

    Each trial draws a chain A subset-of B and an element s, then tests
    fn(A) <= fn(B) and fn(s|A) >= fn(s|B).  The first few violations are
    recorded with their witnesses.
    """
    ground = sorted(frozenset(ground_set))
    report = CheckReport(trials=trials)
    if not ground:
        return report
    norm = fn(frozenset(), deployment)
    if abs(norm) > _SLACK:
        report.violations.append(
            Violation("normalization", {"empty": frozenset()}, norm, 0.0)
        )
    for _ in range(trials):
        a_set, b_set = _random_chain(ground, rng)
        s = ground[int(rng.integers(len(ground)))]
        f_a = fn(a_set, deployment)
        f_b = fn(b_set, deployment)
        if f_a > f_b + _SLACK:
            report.violations.append(
                Violation("monotonicity", {"A": a_set, "B": b_set}, f_a, f_b)
            )
        gain_a = marginal_gain(fn, s, a_set, deployment)
        gain_b = marginal_gain(fn, s, b_set, deployment)
        if gain_a < gain_b - _SLACK:
            report.violations.append(
                Violation("submodularity", {"A": a_set, "B": b_set, "s": s}, gain_a, gain_b)
            )
        if len(report.violations) >= 10:
            break
    return report


def check_second_order_submodular(
    fn: GroundedSetFunction,
    ground_set: Iterable,
    deployment: object,
    trials: int,
    rng: np.random.Generator,
) -> CheckReport:
    """Randomized check of 2nd-order submodularity.

    Each trial draws disjoint A, B, C and an element s, then tests
    fn(s|C) - fn(s|A+C) >= fn(s|B+C) - fn(s|A+B+C).
    """
    ground = sorted(frozenset(ground_set))
    if len(ground) < 2:
        return CheckReport(trials=0)
    report = CheckReport(trials=trials)
    for _ in range(trials):
        labels = rng.integers(0, 4, size=len(ground))  # 0: A, 1: B, 2: C, 3: out
        a_set = frozenset(g for g, l in zip(ground, labels) if l == 0)
        b_set = frozenset(g for g, l in zip(ground, labels) if l == 1)
        c_set = frozenset(g for g, l in zip(ground, labels) if l == 2)
        s = ground[int(rng.integers(len(ground)))]
        lhs = marginal_gain(fn, s, c_set, deployment) - marginal_gain(fn, s, a_set | c_set, deployment)
        rhs = marginal_gain(fn, s, b_set | c_set, deployment) - marginal_gain(
            fn, s, a_set | b_set | c_set, deployment
        )
        if lhs < rhs - _SLACK:
            report.violations.append(
                Violation(
                    "second-order",
                    {"A": a_set, "B": b_set, "C": c_set, "s": s},
                    lhs,
                    rhs,
                )
            )
        if len(report.violations) >= 10:
            break
    return report


def neighbor_set_function(
    fn: GroundedSetFunction,
    action: Hashable,
    deployment: object,
) -> Callable[[frozenset, object], float]:
    """VoC of a fixed action as a set function of the neighbor-action set.

    The returned callable ignores its deployment argument (the deployment is
    baked in), so it can be fed straight back into the property checkers or
    into :func:`curvature` as a per-(agent, action, round) diagnostic.
    """

    def induced(neighbor_actions: frozenset, _dep: object = None) -> float:
        return voc(fn, action, neighbor_actions, deployment)

    return induced
