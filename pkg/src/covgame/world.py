"""Geometric ground truth for the coverage game.

Sensors are fixed wedge-shaped field-of-view devices that pick one of K_i
discrete headings; the adversary picks one of finitely many target
deployments.  The team utility is the fraction of the chosen deployment's
targets that fall inside the union of the sensors' coverage wedges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

Point = tuple[float, float]


class ConfigError(ValueError):
    """Invalid world or experiment configuration."""


@dataclass(frozen=True)
class SensorSpec:
    """One sensing agent: position, wedge geometry, comms and action set.

    Orientation index k maps to heading angle 2*pi*k / orientations.
    """

    id: int
    position: Point
    fov_radius: float
    aov: float
    comm_range: float
    bandwidth: int
    orientations: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if self.orientations < 1:
            raise ConfigError(f"sensor {self.id}: orientations must be >= 1")
        if self.bandwidth < 0:
            raise ConfigError(f"sensor {self.id}: bandwidth must be >= 0")
        if not self.fov_radius > 0:
            raise ConfigError(f"sensor {self.id}: fov_radius must be > 0")
        if not 0.0 < self.aov <= TWO_PI:
            raise ConfigError(f"sensor {self.id}: aov must lie in (0, 2*pi]")
        if self.comm_range < 0:
            raise ConfigError(f"sensor {self.id}: comm_range must be >= 0")

    def heading(self, orientation_index: int) -> float:
        """Heading angle (radians) of the given orientation index."""
        return TWO_PI * orientation_index / self.orientations


@dataclass(frozen=True)
class Deployment:
    """One attacker pure strategy: a fixed arrangement of target points."""

    id: int
    targets: tuple[Point, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "targets", tuple((float(x), float(y)) for x, y in self.targets)
        )


@dataclass(frozen=True)
class WorldConfig:
    """Environment rectangle plus the sensor team and the deployment set Y."""

    env_width: float
    env_height: float
    sensors: tuple[SensorSpec, ...]
    deployments: tuple[Deployment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "deployments", tuple(self.deployments))
        if not self.env_width > 0 or not self.env_height > 0:
            raise ConfigError("environment rectangle must have positive size")
        if len(self.sensors) < 1:
            raise ConfigError("at least one sensor is required")
        if len(self.deployments) < 1:
            raise ConfigError("at least one deployment is required")
        for i, s in enumerate(self.sensors):
            if s.id != i:
                raise ConfigError(f"sensor ids must be 0..{len(self.sensors) - 1} in order")
        for j, d in enumerate(self.deployments):
            if d.id != j:
                raise ConfigError(f"deployment ids must be 0..{len(self.deployments) - 1} in order")
        m = len(self.deployments[0].targets)
        if m == 0:
            raise ConfigError("deployments must contain at least one target point")
        for d in self.deployments:
            if len(d.targets) != m:
                raise ConfigError("all deployments must place the same number of targets")
            for x, y in d.targets:
                if not (0.0 <= x <= self.env_width and 0.0 <= y <= self.env_height):
                    raise ConfigError(
                        f"deployment {d.id}: target ({x}, {y}) outside environment rectangle"
                    )

    @property
    def num_targets(self) -> int:
        """Target count m, shared by every deployment."""
        return len(self.deployments[0].targets)


def covers(sensor: SensorSpec, orientation_index: int, target: Point) -> bool:
    """True iff the target lies inside the sensor's wedge under this heading.

    Closed inequalities at both the range and the half-angle boundary; a
    target exactly at the sensor position is covered regardless of heading.
    """
    dx = target[0] - sensor.position[0]
    dy = target[1] - sensor.position[1]
    d2 = dx * dx + dy * dy
    if d2 > sensor.fov_radius * sensor.fov_radius:
        return False
    if d2 == 0.0:
        return True
    diff = (math.atan2(dy, dx) - sensor.heading(orientation_index)) % TWO_PI
    if diff > math.pi:
        diff = TWO_PI - diff
    return diff <= 0.5 * sensor.aov


def coverage_set(sensor: SensorSpec, orientation_index: int, deployment: Deployment) -> frozenset[int]:
    """Indices of the deployment's targets covered by this (sensor, heading)."""
    return frozenset(
        j for j, t in enumerate(deployment.targets) if covers(sensor, orientation_index, t)
    )


def coverage_value(
    world: WorldConfig,
    pairs: Iterable[tuple[int, int]],
    deployment: Deployment,
) -> float:
    """Fraction of targets covered by a set of (agent, orientation) pairs.

    This is the game's grounded set function f(., b): normalized, monotone,
    submodular and 2nd-order submodular.  Duplicate agents are allowed; the
    value is the plain union of their wedges.
    """
    covered: set[int] = set()
    for agent, k in pairs:
        covered |= coverage_set(world.sensors[agent], k, deployment)
    return len(covered) / len(deployment.targets)


def utility(world: WorldConfig, joint_action: Mapping[int, int], deployment: Deployment) -> float:
    """Team utility f(A, b) for a (possibly partial) joint action."""
    return coverage_value(world, joint_action.items(), deployment)


def reachable_peers(world: WorldConfig) -> dict[int, frozenset[int]]:
    """Candidate neighbor sets M_i.

    j is in M_i iff j != i and dist(pos_i, pos_j) <= comm_range_i (the
    receiver's own range), so M_i need not be symmetric.
    """
    out: dict[int, frozenset[int]] = {}
    for s in world.sensors:
        xi, yi = s.position
        peers = []
        for other in world.sensors:
            if other.id == s.id:
                continue
            dx = other.position[0] - xi
            dy = other.position[1] - yi
            if math.hypot(dx, dy) <= s.comm_range:
                peers.append(other.id)
        out[s.id] = frozenset(peers)
    return out


class CoverageTables:
    """Precomputed coverage structure for one world.

    Tabulates coverage_set over every (agent, orientation, deployment) once,
    exposing it as int bitmasks (fast unions in the round loop) and as float
    matrices (probability-of-coverage matvecs).  Built from the scalar
    ``covers`` predicate so tables and definition can never disagree.
    """

    def __init__(self, world: WorldConfig):
        self.world = world
        self.m = world.num_targets
        self.num_deployments = len(world.deployments)
        self.arm_counts = tuple(s.orientations for s in world.sensors)
        n = len(world.sensors)
        # masks[i][k][b]: bit j set iff agent i under orientation k covers
        # target j of deployment b.
        self.masks: list[list[list[int]]] = []
        # covered[i]: bool array (K_i, |Y|, m) with the same content.
        self.covered: list[np.ndarray] = []
        for i in range(n):
            sensor = world.sensors[i]
            per_k: list[list[int]] = []
            arr = np.zeros((sensor.orientations, self.num_deployments, self.m), dtype=bool)
            for k in range(sensor.orientations):
                per_b: list[int] = []
                for b, dep in enumerate(world.deployments):
                    mask = 0
                    for j, t in enumerate(dep.targets):
                        if covers(sensor, k, t):
                            mask |= 1 << j
                            arr[k, b, j] = True
                    per_b.append(mask)
                per_k.append(per_b)
            self.masks.append(per_k)
            self.covered.append(arr)
        # cover_flat[i]: float64 (K_i, |Y|*m), used for p_i @ C products.
        self.cover_flat = [
            arr.reshape(arr.shape[0], -1).astype(np.float64) for arr in self.covered
        ]

    def joint_mask(self, joint_action: Sequence[int], deployment_id: int) -> int:
        """Union bitmask of all agents' coverage under a full joint action."""
        u = 0
        for i, k in enumerate(joint_action):
            u |= self.masks[i][k][deployment_id]
        return u

    def joint_covered_count(self, joint_action: Sequence[int], deployment_id: int) -> int:
        return self.joint_mask(joint_action, deployment_id).bit_count()

    def joint_utility(self, joint_action: Sequence[int], deployment_id: int) -> float:
        """f(A, b) via the tabulated masks."""
        return self.joint_covered_count(joint_action, deployment_id) / self.m


_TABLE_CACHE: dict[WorldConfig, CoverageTables] = {}


def coverage_tables(world: WorldConfig) -> CoverageTables:
    """Per-process cache so repeated runs on one world build tables once."""
    tables = _TABLE_CACHE.get(world)
    if tables is None:
        tables = CoverageTables(world)
        _TABLE_CACHE[world] = tables
    return tables
