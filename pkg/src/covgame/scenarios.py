"""Scenario generators and the declarative world/experiment config format.

The two built-in scenarios mirror the evaluation setups: a three-sensor
team with unit bandwidth against twenty deployments, and a larger team
with heterogeneous bandwidth budgets used for the neighbor-strategy
comparison.  Geometry defaults are FOV radius 8, angle-of-view pi/3,
communication range 16, 16 orientations, in a 30 x 30 environment.
Knobs the source experiments leave unspecified (sensor count, deployment
count, targets per deployment) default to 8 / 20 / 60 and are plain
keyword arguments.
"""

from __future__ import annotations

import math
import sys
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .world import ConfigError, Deployment, SensorSpec, WorldConfig

DEFAULT_FOV_RADIUS = 8.0
DEFAULT_AOV = math.pi / 3.0
DEFAULT_COMM_RANGE = 16.0
DEFAULT_ORIENTATIONS = 16
DEFAULT_ENV_SIDE = 30.0
DEFAULT_DEPLOYMENTS = 20
DEFAULT_TARGETS_PER_DEPLOYMENT = 60

_WORLD_TAG_FIG2 = 2
_WORLD_TAG_FIG3 = 3
_WORLD_TAG_CONFIG = 9


def _scenario_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def _uniform_points(rng: np.random.Generator, n: int, width: float, height: float):
    pts = rng.uniform(low=(0.0, 0.0), high=(width, height), size=(n, 2))
    return [(float(x), float(y)) for x, y in pts]


def _uniform_deployments(
    rng: np.random.Generator, count: int, targets: int, width: float, height: float
) -> tuple[Deployment, ...]:
    return tuple(
        Deployment(id=b, targets=tuple(_uniform_points(rng, targets, width, height)))
        for b in range(count)
    )


def generate_figure2_world(
    seed: int,
    n_deployments: int = DEFAULT_DEPLOYMENTS,
    targets_per_deployment: int = DEFAULT_TARGETS_PER_DEPLOYMENT,
) -> WorldConfig:
    """Three sensors, bandwidth 1 each, against a 20-deployment attacker."""
    rng = _scenario_rng(seed, _WORLD_TAG_FIG2)
    positions = _uniform_points(rng, 3, DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE)
    sensors = tuple(
        SensorSpec(
            id=i,
            position=positions[i],
            fov_radius=DEFAULT_FOV_RADIUS,
            aov=DEFAULT_AOV,
            comm_range=DEFAULT_COMM_RANGE,
            bandwidth=1,
            orientations=DEFAULT_ORIENTATIONS,
        )
        for i in range(3)
    )
    deployments = _uniform_deployments(
        rng, n_deployments, targets_per_deployment, DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE
    )
    return WorldConfig(DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE, sensors, deployments)


def generate_figure3_world(
    seed: int,
    n_sensors: int = 8,
    n_deployments: int = DEFAULT_DEPLOYMENTS,
    targets_per_deployment: int = DEFAULT_TARGETS_PER_DEPLOYMENT,
) -> WorldConfig:
    """Heterogeneous-bandwidth team: alpha_i drawn uniformly from {1, 2, 3}."""
    rng = _scenario_rng(seed, _WORLD_TAG_FIG3)
    positions = _uniform_points(rng, n_sensors, DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE)
    bandwidths = rng.integers(1, 4, size=n_sensors)
    sensors = tuple(
        SensorSpec(
            id=i,
            position=positions[i],
            fov_radius=DEFAULT_FOV_RADIUS,
            aov=DEFAULT_AOV,
            comm_range=DEFAULT_COMM_RANGE,
            bandwidth=int(bandwidths[i]),
            orientations=DEFAULT_ORIENTATIONS,
        )
        for i in range(n_sensors)
    )
    deployments = _uniform_deployments(
        rng, n_deployments, targets_per_deployment, DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE
    )
    return WorldConfig(DEFAULT_ENV_SIDE, DEFAULT_ENV_SIDE, sensors, deployments)


# ---------------------------------------------------------------------------
# Declarative config files (TOML): sections [world], [sensors.<id>] or a
# generated [sensors] block, [deployments], and an optional [experiment].
# ---------------------------------------------------------------------------

_WORLD_KEYS = {"width", "height"}
_SENSOR_KEYS = {"position", "fov_radius", "aov", "comm_range", "bandwidth", "orientations"}
_SENSOR_GEN_KEYS = {
    "count",
    "placement_seed",
    "fov_radius",
    "aov",
    "comm_range",
    "bandwidth",
    "bandwidth_choices",
    "orientations",
}
_DEPLOYMENT_KEYS = {"count", "targets_per_deployment", "placement_seed", "points"}
_EXPERIMENT_KEYS = {
    "trials",
    "horizon",
    "strategies",
    "seed",
    "checkpoints",
    "snapshot_interval",
    "workers",
}


def _reject_unknown(section: str, table: dict, allowed: set[str]) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"[{section}] has unknown keys: {', '.join(unknown)}")


def _sensor_from_table(sensor_id: int, table: dict) -> SensorSpec:
    _reject_unknown(f"sensors.{sensor_id}", table, _SENSOR_KEYS)
    try:
        position = tuple(float(v) for v in table["position"])
    except KeyError:
        raise ConfigError(f"[sensors.{sensor_id}] is missing 'position'") from None
    if len(position) != 2:
        raise ConfigError(f"[sensors.{sensor_id}] position must be [x, y]")
    return SensorSpec(
        id=sensor_id,
        position=position,  # type: ignore[arg-type]
        fov_radius=float(table.get("fov_radius", DEFAULT_FOV_RADIUS)),
        aov=float(table.get("aov", DEFAULT_AOV)),
        comm_range=float(table.get("comm_range", DEFAULT_COMM_RANGE)),
        bandwidth=int(table.get("bandwidth", 1)),
        orientations=int(table.get("orientations", DEFAULT_ORIENTATIONS)),
    )


def _generated_sensors(table: dict, width: float, height: float) -> tuple[SensorSpec, ...]:
    _reject_unknown("sensors", table, _SENSOR_GEN_KEYS)
    if "count" not in table:
        raise ConfigError("[sensors] needs either numbered sensor tables or a 'count'")
    count = int(table["count"])
    rng = _scenario_rng(int(table.get("placement_seed", 0)), _WORLD_TAG_CONFIG)
    positions = _uniform_points(rng, count, width, height)
    choices = table.get("bandwidth_choices")
    if choices is not None:
        bandwidths = [int(b) for b in rng.choice(np.asarray(choices, dtype=np.int64), size=count)]
    else:
        bandwidths = [int(table.get("bandwidth", 1))] * count
    return tuple(
        SensorSpec(
            id=i,
            position=positions[i],
            fov_radius=float(table.get("fov_radius", DEFAULT_FOV_RADIUS)),
            aov=float(table.get("aov", DEFAULT_AOV)),
            comm_range=float(table.get("comm_range", DEFAULT_COMM_RANGE)),
            bandwidth=bandwidths[i],
            orientations=int(table.get("orientations", DEFAULT_ORIENTATIONS)),
        )
        for i in range(count)
    )


def _deployments_from_table(table: dict, width: float, height: float) -> tuple[Deployment, ...]:
    _reject_unknown("deployments", table, _DEPLOYMENT_KEYS)
    points = table.get("points")
    if points is not None:
        return tuple(
            Deployment(id=b, targets=tuple((float(x), float(y)) for x, y in dep))
            for b, dep in enumerate(points)
        )
    count = int(table.get("count", DEFAULT_DEPLOYMENTS))
    targets = int(table.get("targets_per_deployment", DEFAULT_TARGETS_PER_DEPLOYMENT))
    rng = _scenario_rng(int(table.get("placement_seed", 0)), _WORLD_TAG_CONFIG + 1)
    return _uniform_deployments(rng, count, targets, width, height)


def parse_world_config(data: dict[str, Any]) -> WorldConfig:
    """Build a WorldConfig from parsed TOML data, validating the schema."""
    world_tbl = data.get("world")
    if not isinstance(world_tbl, dict):
        raise ConfigError("config needs a [world] section")
    _reject_unknown("world", world_tbl, _WORLD_KEYS)
    try:
        width = float(world_tbl["width"])
        height = float(world_tbl["height"])
    except KeyError as missing:
        raise ConfigError(f"[world] is missing {missing}") from None

    sensors_tbl = data.get("sensors")
    if not isinstance(sensors_tbl, dict) or not sensors_tbl:
        raise ConfigError("config needs a [sensors] section")
    numbered = {k: v for k, v in sensors_tbl.items() if isinstance(v, dict)}
    scalar = {k: v for k, v in sensors_tbl.items() if not isinstance(v, dict)}
    if numbered and scalar:
        raise ConfigError("[sensors] mixes numbered sensor tables with generator keys")
    if numbered:
        try:
            ordered = sorted(numbered.items(), key=lambda kv: int(kv[0]))
        except ValueError:
            raise ConfigError("[sensors.<id>] table names must be integer ids") from None
        expected = list(range(len(ordered)))
        if [int(k) for k, _ in ordered] != expected:
            raise ConfigError(f"sensor ids must be exactly {expected}")
        sensors = tuple(_sensor_from_table(int(k), tbl) for k, tbl in ordered)
    else:
        sensors = _generated_sensors(scalar, width, height)

    dep_tbl = data.get("deployments")
    if not isinstance(dep_tbl, dict):
        raise ConfigError("config needs a [deployments] section")
    deployments = _deployments_from_table(dep_tbl, width, height)

    known_sections = {"world", "sensors", "deployments", "experiment"}
    _reject_unknown("<top level>", data, known_sections)
    return WorldConfig(width, height, sensors, deployments)


def parse_experiment_overrides(data: dict[str, Any]) -> dict[str, Any]:
    """Extract the optional [experiment] section as plain keyword overrides."""
    exp = data.get("experiment")
    if exp is None:
        return {}
    if not isinstance(exp, dict):
        raise ConfigError("[experiment] must be a table")
    _reject_unknown("experiment", exp, _EXPERIMENT_KEYS)
    out: dict[str, Any] = {}
    for key in ("trials", "horizon", "seed", "snapshot_interval", "workers"):
        if key in exp:
            out[key] = int(exp[key])
    if "strategies" in exp:
        out["strategies"] = tuple(str(s) for s in exp["strategies"])
    if "checkpoints" in exp:
        out["checkpoints"] = tuple(int(t) for t in exp["checkpoints"])
    return out


def load_config_file(path) -> tuple[WorldConfig, dict[str, Any]]:
    """Parse a TOML config file into (world, experiment overrides)."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config file {path} is not valid TOML: {err}") from None
    return parse_world_config(data), parse_experiment_overrides(data)
