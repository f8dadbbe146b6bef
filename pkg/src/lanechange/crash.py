"""Crash probability of the ego against each surrounding vehicle at a waypoint.

For a waypoint reached by the ego after ``t_e`` seconds, a surrounding vehicle
collides if it travels at the speed needed to cover its own distance to the
waypoint in the same time and ends up in the waypoint's lane. The two events
come from the two model layers and are multiplied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .grid import GridPosition, RoadGrid, segment_length
from .markov import (MAX_SPEED_MPH, LayeredVehicleModel, lane_transition_prob, speed_bin,
                     speed_transition_prob)
from .paths import Path

MPH = 0.44704  # m/s


class ZeroSpeed(ValueError):
    pass


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    start: GridPosition
    speed_mph: float
    model: LayeredVehicleModel = field(default_factory=LayeredVehicleModel.default)

    def __post_init__(self):
        if not 0.0 <= self.speed_mph <= MAX_SPEED_MPH:
            raise ValueError(f"vehicle {self.id}: speed {self.speed_mph} mph outside [0, {MAX_SPEED_MPH:g}]")


@dataclass(frozen=True)
class EgoState:
    start: GridPosition
    goal: GridPosition
    speed_mph: float

    def __post_init__(self):
        if not 0.0 < self.speed_mph <= MAX_SPEED_MPH:
            raise ValueError(f"ego speed {self.speed_mph} mph outside (0, {MAX_SPEED_MPH:g}]")


@dataclass(frozen=True)
class WaypointRisk:
    waypoint: GridPosition
    per_vehicle: Mapping[str, float]

    def no_crash(self) -> dict[str, float]:
        return {k: 1.0 - p for k, p in self.per_vehicle.items()}


class RequiredSpeed(NamedTuple):
    mph: float
    reachable: bool


def markov_steps(t_e: float, time_step_s: float = 1.0) -> int:
    """Number of chain steps for an elapsed time; rounds half up."""
    return max(0, int(math.floor(t_e / time_step_s + 0.5)))


def cumulative_distances(grid: RoadGrid, path: Path) -> list[float]:
    """Along-path distance from the start to every waypoint (start = 0)."""
    out = [0.0]
    w = path.waypoints
    for a, b in zip(w, w[1:]):
        out.append(out[-1] + segment_length(grid, a, b))
    return out


def travel_time(grid: RoadGrid, path: Path, waypoint_index: int, ego: EgoState) -> float:
    if waypoint_index < 1 or waypoint_index >= len(path.waypoints):
        raise IndexError(f"waypoint index {waypoint_index} must be in 1..{len(path.waypoints) - 1}")
    if ego.speed_mph <= 0:
        raise ZeroSpeed("ego speed must be positive")
    return cumulative_distances(grid, path)[waypoint_index] / (ego.speed_mph * MPH)


def required_speed(grid: RoadGrid, vehicle: VehicleSpec, waypoint: tuple[int, int], t_e: float) -> RequiredSpeed:
    if t_e <= 0:
        raise ValueError("t_e must be positive")
    mph = grid.center_distance(vehicle.start, waypoint) / t_e / MPH
    reachable = waypoint[0] >= vehicle.start[0] and mph <= MAX_SPEED_MPH
    return RequiredSpeed(mph, reachable)


def crash_probability(grid: RoadGrid, vehicle: VehicleSpec, waypoint: tuple[int, int], t_e: float,
                      time_step_s: float = 1.0) -> float:
    need = required_speed(grid, vehicle, waypoint, t_e)
    if not need.reachable:
        return 0.0
    k = markov_steps(t_e, time_step_s)
    target = speed_bin(need.mph)
    p_speed = speed_transition_prob(vehicle.model, speed_bin(vehicle.speed_mph), target, k)
    if p_speed == 0.0:
        return 0.0
    p_lane = lane_transition_prob(vehicle.model, target, vehicle.start.lane, waypoint[1], k)
    return min(1.0, max(0.0, p_speed * p_lane))


def waypoint_risk(grid: RoadGrid, vehicles: Sequence[VehicleSpec], waypoint: GridPosition, t_e: float,
                  time_step_s: float = 1.0) -> WaypointRisk:
    return WaypointRisk(waypoint, {v.id: crash_probability(grid, v, waypoint, t_e, time_step_s)
                                   for v in vehicles})
