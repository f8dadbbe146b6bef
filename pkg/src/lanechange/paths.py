"""Directed grid graph and exhaustive path enumeration for the ego vehicle.

The search is a backtracking DFS over the permissible actions. Two constraints
are enforced while expanding (not after the fact):

* no cell is visited twice within a path;
* two pure-lateral actions never follow each other.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .grid import Action, GridPosition, RoadGrid, action_between

# Expansion order fixes path ids.
ACTION_ORDER = (
    Action.FORWARD,
    Action.DIAGONAL_RIGHT,
    Action.DIAGONAL_LEFT,
    Action.LATERAL_RIGHT,
    Action.LATERAL_LEFT,
)


class NoPath(RuntimeError):
    pass


@dataclass(frozen=True)
class Path:
    id: int
    waypoints: tuple[GridPosition, ...]

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def actions(self) -> tuple[Action, ...]:
        w = self.waypoints
        return tuple(action_between(a, b) for a, b in zip(w, w[1:]))

    def __str__(self) -> str:
        return "->".join(str(p) for p in self.waypoints)


@dataclass(frozen=True)
class PathSet:
    grid: RoadGrid
    paths: tuple[Path, ...]
    lengths_m: tuple[float, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __getitem__(self, path_id: int) -> Path:
        return self.paths[path_id]

    @cached_property
    def shortest_length_m(self) -> float:
        return min(self.lengths_m)

    @cached_property
    def longest_length_m(self) -> float:
        return max(self.lengths_m)

    def length_of(self, p: Path) -> float:
        return self.lengths_m[p.id]


def path_length(grid: RoadGrid, p: Path | Sequence[tuple[int, int]]) -> float:
    """Sum of segment lengths along the path, in meters.

    Computed from the action counts so that paths made of the same steps in a
    different order get bit-identical lengths.
    """
    waypoints = p.waypoints if isinstance(p, Path) else tuple(p)
    counts: Counter = Counter()
    for a, b in zip(waypoints, waypoints[1:]):
        act = action_between(a, b)
        if act is Action.FORWARD:
            counts["forward"] += 1
        elif act.is_lateral:
            counts["lateral"] += 1
        else:
            counts["diagonal"] += 1
    return (counts["forward"] * grid.cell_length_m
            + counts["lateral"] * grid.cell_width_m
            + counts["diagonal"] * grid.diagonal_m)


def enumerate_paths(grid: RoadGrid, start: tuple[int, int], goal: tuple[int, int],
                    actions: Iterable[Action] = ACTION_ORDER) -> PathSet:
    """All simple paths from ``start`` to ``goal`` under the lateral-pair filter.

    ``actions`` restricts the edge set; expansion always follows ACTION_ORDER.
    """
    start = grid.require(start)
    goal = grid.require(goal)
    allowed = set(actions)
    moves = [(a.delta, a.is_lateral) for a in ACTION_ORDER if a in allowed]
    rows, lanes = grid.rows, grid.lanes

    found: list[tuple[GridPosition, ...]] = []
    trail = [start]
    visited = {start}

    def expand(i: int, j: int, after_lateral: bool) -> None:
        if (i, j) == goal:
            found.append(tuple(trail))
            return
        for (di, dj), lateral in moves:
            if lateral and after_lateral:
                continue
            ni, nj = i + di, j + dj
            if not (0 <= ni < rows and 0 <= nj < lanes):
                continue
            nxt = GridPosition(ni, nj)
            if nxt in visited:
                continue
            visited.add(nxt)
            trail.append(nxt)
            expand(ni, nj, lateral)
            trail.pop()
            visited.discard(nxt)

    expand(start.row, start.lane, False)
    if not found:
        raise NoPath(f"no admissible path from {start} to {goal}")
    paths = tuple(Path(k, w) for k, w in enumerate(found))
    return PathSet(grid, paths, tuple(path_length(grid, p) for p in paths))


def length_reward(pathset: PathSet, p: Path) -> float:
    """1 for the shortest path, falling linearly with the excess length.

    Goes negative once a path is more than twice as long as the shortest one.
    """
    shortest = pathset.shortest_length_m
    if shortest == 0.0:
        return 1.0
    return 1.0 - (pathset.length_of(p) - shortest) / shortest
