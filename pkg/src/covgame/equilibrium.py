"""Equilibrium diagnostics: exact expected payoffs under product strategies,
best responses, duality-gap certificates and a matrix-game value oracle.

The averaged defender strategy is a mixture of per-round products over an
astronomically large joint simplex; it is never materialized.  Its payoff
against every pure deployment is carried exactly by the engine's running
sums, so certificates need only a best-response computation on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .payoff import DEFAULT_ENUMERATION_CAP, best_response_to_attacker, payoff_table
from .world import Deployment, WorldConfig, coverage_tables

if TYPE_CHECKING:
    from .engine import AveragedStrategies, PrefixCheckpoint


def expected_utility_product(
    world: WorldConfig,
    per_agent_distributions: Sequence[np.ndarray],
    deployment: Deployment,
) -> float:
    """Exact expected utility when each agent draws independently.

    Coverage events are independent across agents under a product
    distribution, so the expectation is the mean over targets of
    1 - prod_i (1 - Pr[agent i covers the target]).
    """
    tables = coverage_tables(world)
    b = deployment.id
    miss = np.ones(tables.m)
    for i, dist in enumerate(per_agent_distributions):
        p = np.asarray(dist, dtype=np.float64)
        cover_prob = p @ tables.covered[i][:, b, :].astype(np.float64)
        miss *= 1.0 - cover_prob
    return float(np.mean(1.0 - miss))


@dataclass(frozen=True)
class EpsCertificate:
    """Empirical epsilon-NE certificate for an averaged strategy pair.

    eps_hat bounds how much either player could gain by a unilateral pure
    deviation; with exact=True the best-response side was enumerated and
    worst <= payoff_at_pair <= best holds.
    """

    best_response_value_vs_ybar: float
    worst_response_value_vs_xbar: float
    payoff_at_pair: float
    eps_hat: float
    exact: bool


def _certificate(
    ybar: np.ndarray,
    defender_payoffs: np.ndarray,
    world: WorldConfig,
    cap: int,
) -> EpsCertificate:
    tables = coverage_tables(world)
    best = best_response_to_attacker(tables, ybar, cap)
    worst = float(defender_payoffs.min())
    payoff = float(defender_payoffs @ ybar)
    return EpsCertificate(
        best_response_value_vs_ybar=best.value,
        worst_response_value_vs_xbar=worst,
        payoff_at_pair=payoff,
        eps_hat=best.value - worst,
        exact=best.exact,
    )


def eps_certificate(
    avg: "AveragedStrategies",
    world: WorldConfig,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> EpsCertificate:
    """Certificate for the final averaged pair (xbar_T, ybar_T)."""
    return _certificate(avg.attacker_avg, avg.defender_payoffs, world, cap)


def duality_gap_series(
    prefixes: Sequence["PrefixCheckpoint"],
    world: WorldConfig,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> list[tuple[int, EpsCertificate]]:
    """Certificates for the prefix averages at every stored checkpoint."""
    out = []
    for chk in prefixes:
        cert = _certificate(
            chk.attacker_strategy_sum / chk.t,
            chk.deployment_value_sums / chk.t,
            world,
            cap,
        )
        out.append((chk.t, cert))
    return out


def fit_gap_decay(series: Sequence[tuple[int, float]]) -> tuple[float, float]:
    """Least-squares slope of log(eps - floor) against log t.

    The floor is the plateau estimate: the mean of eps over the second half
    of the time range.  Points at or below the floor are excluded from the
    fit.  Returns (slope, floor).
    """
    ts = np.asarray([t for t, _ in series], dtype=np.float64)
    eps = np.asarray([e for _, e in series], dtype=np.float64)
    if ts.size < 3:
        raise ValueError("need at least three checkpoints to fit a decay slope")
    half = ts.max() / 2.0
    tail = eps[ts > half]
    floor = float(tail.mean()) if tail.size else float(eps[-1])
    keep = (eps - floor > 1e-12) & (ts <= half)
    if keep.sum() < 2:
        keep = eps - floor > 1e-12
    if keep.sum() < 2:
        raise ValueError("series has no decay left above the plateau floor")
    slope = float(np.polyfit(np.log(ts[keep]), np.log(eps[keep] - floor), 1)[0])
    return slope, floor


# ---------------------------------------------------------------------------
# Matrix-game value oracle: full-information Hedge self-play with the
# anytime rate sqrt(log K / t), certified by the pure-response duality gap.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixGameSolution:
    value: float
    gap: float
    iterations: int
    row_strategy: np.ndarray
    col_strategy: np.ndarray


def _hedge_core(G, tol, max_iters, check_every):
    nx, ny = G.shape
    cum_x = np.zeros(nx)
    cum_y = np.zeros(ny)
    xbar = np.zeros(nx)
    ybar = np.zeros(ny)
    log_nx = np.log(max(nx, 2))
    log_ny = np.log(max(ny, 2))
    best = np.inf
    worst = -np.inf
    done = max_iters
    for t in range(1, max_iters + 1):
        ex = np.sqrt(log_nx / t) * cum_x
        ex -= ex.max()
        x = np.exp(ex)
        x /= x.sum()
        ey = -np.sqrt(log_ny / t) * cum_y
        ey -= ey.max()
        y = np.exp(ey)
        y /= y.sum()
        cum_x += G @ y
        cum_y += x @ G
        xbar += x
        ybar += y
        if t % check_every == 0 or t == max_iters:
            best = (G @ (ybar / t)).max()
            worst = ((xbar / t) @ G).min()
            if best - worst <= tol:
                done = t
                break
    return best, worst, done, xbar / done, ybar / done


_compiled_hedge_core = None


def _hedge_core_compiled():
    """JIT-compile the self-play loop on first use; fall back to plain numpy."""
    global _compiled_hedge_core
    if _compiled_hedge_core is None:
        try:
            import numba

            _compiled_hedge_core = numba.njit(cache=False)(_hedge_core)
        except ImportError:  # pragma: no cover - numba is a declared dependency
            _compiled_hedge_core = _hedge_core
    return _compiled_hedge_core


def solve_matrix_game(
    matrix: np.ndarray,
    tolerance: float = 1e-3,
    max_iters: int = 5_000_000,
    check_every: int = 500,
) -> MatrixGameSolution:
    """Approximate value of a zero-sum matrix game (row max, column min).

    Runs Hedge self-play on both sides with the anytime rate and stops once
    the duality gap of the averaged strategies (best pure row response minus
    worst pure column response) certifies the tolerance; returns the
    midpoint value and the achieved gap.
    """
    G = np.ascontiguousarray(matrix, dtype=np.float64)
    if G.ndim != 2 or G.size == 0:
        raise ValueError("payoff matrix must be a nonempty 2-D array")
    core = _hedge_core_compiled()
    best, worst, iters, xbar, ybar = core(G, float(tolerance), int(max_iters), int(check_every))
    return MatrixGameSolution(
        value=0.5 * (best + worst),
        gap=best - worst,
        iterations=iters,
        row_strategy=xbar,
        col_strategy=ybar,
    )


def game_value(
    world: WorldConfig,
    tolerance: float = 1e-3,
    max_iters: int = 5_000_000,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> tuple[float, float]:
    """Reference value of the coverage game's full payoff matrix.

    Requires the joint-action space to fit under the enumeration cap;
    refuses explicitly otherwise (no silent surrogate for the value oracle).
    """
    table = payoff_table(coverage_tables(world), cap)
    sol = solve_matrix_game(table.matrix, tolerance=tolerance, max_iters=max_iters)
    return sol.value, sol.gap
