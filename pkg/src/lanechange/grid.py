"""Road lattice: cell coordinates, the five ego actions and segment lengths.

Rows grow in the direction of travel, lanes grow to the right. Distances are
measured between cell centers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple


class OutOfBounds(ValueError):
    pass


class NotAdjacent(ValueError):
    pass


class GridPosition(NamedTuple):
    row: int
    lane: int

    def __str__(self) -> str:
        return f"({self.row},{self.lane})"


class Action(enum.Enum):
    FORWARD = (1, 0)
    LATERAL_RIGHT = (0, 1)
    LATERAL_LEFT = (0, -1)
    DIAGONAL_RIGHT = (1, 1)
    DIAGONAL_LEFT = (1, -1)

    @property
    def delta(self) -> tuple[int, int]:
        return self.value

    @property
    def is_lateral(self) -> bool:
        return self.value[0] == 0


LATERAL_ACTIONS = frozenset({Action.LATERAL_RIGHT, Action.LATERAL_LEFT})

_BY_DELTA = {a.delta: a for a in Action}


@dataclass(frozen=True)
class RoadGrid:
    rows: int = 6
    lanes: int = 5
    cell_length_m: float = 10.0
    cell_width_m: float = 4.0

    def __post_init__(self):
        if self.rows < 1 or self.lanes < 1:
            raise ValueError(f"grid needs at least one row and lane, got {self.rows}x{self.lanes}")
        if not (self.cell_length_m > 0 and self.cell_width_m > 0):
            raise ValueError("cell dimensions must be positive")

    def contains(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.rows and 0 <= pos[1] < self.lanes

    def require(self, pos: tuple[int, int]) -> GridPosition:
        if not self.contains(pos):
            raise OutOfBounds(f"cell {tuple(pos)} outside {self.rows}x{self.lanes} grid")
        return GridPosition(*pos)

    @property
    def diagonal_m(self) -> float:
        return math.hypot(self.cell_length_m, self.cell_width_m)

    def center_distance(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Euclidean distance between two cell centers, in meters."""
        return math.hypot((b[0] - a[0]) * self.cell_length_m, (b[1] - a[1]) * self.cell_width_m)


def apply_action(grid: RoadGrid, pos: GridPosition, action: Action) -> GridPosition:
    grid.require(pos)
    di, dj = action.delta
    return grid.require((pos[0] + di, pos[1] + dj))


def action_between(src: tuple[int, int], dst: tuple[int, int]) -> Action:
    try:
        return _BY_DELTA[(dst[0] - src[0], dst[1] - src[1])]
    except KeyError:
        raise NotAdjacent(f"no permissible action from {tuple(src)} to {tuple(dst)}") from None


def segment_length(grid: RoadGrid, src: tuple[int, int], dst: tuple[int, int]) -> float:
    """Length of one step, in meters.

    Symmetric in its arguments: a reversed step (e.g. a backward diagonal) has
    the same length as its forward counterpart even though the ego can't take it.
    """
    di, dj = abs(dst[0] - src[0]), abs(dst[1] - src[1])
    if (di, dj) == (1, 0):
        return grid.cell_length_m
    if (di, dj) == (0, 1):
        return grid.cell_width_m
    if (di, dj) == (1, 1):
        return grid.diagonal_m
    raise NotAdjacent(f"{tuple(src)} and {tuple(dst)} are not one step apart")
