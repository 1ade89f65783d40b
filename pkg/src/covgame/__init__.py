"""Adversarial target-coverage game: bandit learning dynamics for a team of
bandwidth-constrained sensors against an adaptive deployment attacker, with
exact equilibrium diagnostics and a reproducible experiment harness."""

from .world import (
    ConfigError,
    CoverageTables,
    Deployment,
    SensorSpec,
    WorldConfig,
    coverage_set,
    coverage_tables,
    coverage_value,
    covers,
    reachable_peers,
    utility,
)
from .submodular import (
    CheckReport,
    check_monotone_submodular,
    check_second_order_submodular,
    curvature,
    marginal_gain,
    voc,
)
from .bandit import ActSel, EstimatorInput, Exp3State, NeiSel, estimate_reward, exp3_init, exp3_sample, exp3_update
from .payoff import DEFAULT_ENUMERATION_CAP, EnumerationCapExceeded, best_response_to_attacker, payoff_table
from .engine import (
    AveragedStrategies,
    GameConfig,
    GameResult,
    MetricSeries,
    RoundRecord,
    attacker_regret,
    baseline_neighbors,
    defender_regret,
    run_game,
)
from .equilibrium import (
    EpsCertificate,
    duality_gap_series,
    eps_certificate,
    expected_utility_product,
    fit_gap_decay,
    game_value,
    solve_matrix_game,
)
from .scenarios import generate_figure2_world, generate_figure3_world, load_config_file
from .harness import ExperimentSpec, make_spec, run_experiment, summarize

__version__ = "0.1.0"
