"""Waypoint rewards, the discounted path reward and best-path selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .crash import EgoState, VehicleSpec, cumulative_distances, MPH, waypoint_risk, WaypointRisk
from .grid import RoadGrid
from .paths import Path, PathSet, length_reward as _length_reward

DEFAULT_GAMMA = 0.9


class EmptyScenario(ValueError):
    pass


class NoPaths(ValueError):
    pass


@dataclass(frozen=True)
class PathEvaluation:
    path_id: int
    waypoints: tuple
    waypoint_rewards: tuple[float, ...]
    cumulative_reward: float
    length_reward: float
    length_m: float
    gamma: float

    @property
    def g(self) -> int:
        return len(self.waypoint_rewards)

    @property
    def display_rewards(self) -> tuple[float, ...]:
        """Per-waypoint values as tabulated for the chosen path.

        The waypoint reached after q moves is weighted by gamma**q, so the start
        shows 1. This is a reporting convention; the cumulative reward keeps
        its own exponents.
        """
        return tuple(self.gamma ** q * r for q, r in enumerate(self.waypoint_rewards))


def waypoint_reward(risk: WaypointRisk) -> float:
    """Mean no-crash probability over surrounding vehicles."""
    w = len(risk.per_vehicle)
    if w == 0:
        raise EmptyScenario("waypoint reward is undefined without surrounding vehicles")
    return sum(1.0 - p for p in risk.per_vehicle.values()) / w


def cumulative_reward(length_reward: float, waypoint_rewards: Sequence[float], gamma: float) -> float:
    """(r_t / 3 + (1/g) * sum_{k=2..g} gamma**k * r_k) * 100 with 1-based waypoint k.

    ``waypoint_rewards[0]`` belongs to the start and never enters the sum.
    """
    g = len(waypoint_rewards)
    if g < 1:
        raise ValueError("a path has at least one waypoint")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    discounted = sum(gamma ** k * waypoint_rewards[k - 1] for k in range(2, g + 1))
    return (length_reward / 3.0 + discounted / g) * 100.0


def evaluate_path(grid: RoadGrid, pathset: PathSet, p: Path, ego: EgoState, vehicles: Sequence[VehicleSpec],
                  gamma: float = DEFAULT_GAMMA, time_step_s: float = 1.0,
                  empty_road: bool = False, cache: dict | None = None) -> PathEvaluation:
    """Score one path. ``cache`` memoises waypoint rewards by (cell, distance) across paths."""
    if not vehicles and not empty_road:
        raise EmptyScenario("no surrounding vehicles; use empty-road mode")
    speed = ego.speed_mph * MPH
    rewards = [1.0]
    for q, d in enumerate(cumulative_distances(grid, p)[1:], start=1):
        if empty_road:
            rewards.append(1.0)
            continue
        key = (p.waypoints[q], d)
        r = cache.get(key) if cache is not None else None
        if r is None:
            r = waypoint_reward(waypoint_risk(grid, vehicles, p.waypoints[q], d / speed, time_step_s))
            if cache is not None:
                cache[key] = r
        rewards.append(r)
    r_t = _length_reward(pathset, p)
    return PathEvaluation(
        path_id=p.id,
        waypoints=p.waypoints,
        waypoint_rewards=tuple(rewards),
        cumulative_reward=cumulative_reward(r_t, rewards, gamma),
        length_reward=r_t,
        length_m=pathset.length_of(p),
        gamma=gamma,
    )


def select_best_path(evaluations: Sequence[PathEvaluation]) -> PathEvaluation:
    """Highest cumulative reward; ties go to the smallest path id."""
    if not evaluations:
        raise NoPaths("nothing to select from")
    return min(evaluations, key=lambda e: (-e.cumulative_reward, e.path_id))
