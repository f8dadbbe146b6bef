"""Row-stochastic matrices and the two-layer vehicle model.

The first layer moves a vehicle between twelve 5 mph speed ranges; the second
layer, one chain per speed range, moves it between lanes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-9
N_SPEED_RANGES = 12
SPEED_STEP_MPH = 5.0
MAX_SPEED_MPH = 60.0
SPEED_LABELS = "ABCDEFGHIJKL"


class NotStochastic(ValueError):
    def __init__(self, message: str, row: int | None = None, row_sum: float | None = None):
        super().__init__(message)
        self.row = row
        self.row_sum = row_sum


class SpeedOutOfRange(ValueError):
    pass


class StochasticMatrix:
    """Immutable square matrix whose rows are probability distributions."""

    __slots__ = ("_values", "_powers")

    def __init__(self, values):
        arr = np.array(values, dtype=float)
        validate(arr)
        arr.setflags(write=False)
        self._values = arr
        self._powers: dict[int, np.ndarray] = {0: _frozen(np.eye(arr.shape[0])), 1: arr}

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.shape[0]

    def __getitem__(self, idx):
        return self._values[idx]

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix):
            return NotImplemented
        return np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self):
        return f"StochasticMatrix(n={self.n})"

    def tolist(self) -> list[list[float]]:
        return self._values.tolist()

    def power(self, k: int) -> np.ndarray:
        """k-step transition matrix (cached, read-only)."""
        if k < 0:
            raise ValueError("matrix power needs k >= 0")
        cached = self._powers.get(k)
        if cached is None:
            cached = _frozen(np.linalg.matrix_power(self._values, k))
            self._powers[k] = cached
        return cached


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def validate(m) -> np.ndarray:
    """Check squareness, entry range and row sums; return the matrix as an array.

    Raises NotStochastic naming the first offending row.
    """
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise NotStochastic(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NotStochastic("matrix has non-finite entries")
    for i, row in enumerate(arr):
        bad = np.flatnonzero((row < 0.0) | (row > 1.0))
        if bad.size:
            raise NotStochastic(f"row {i} has entry {row[bad[0]]!r} outside [0, 1] at column {bad[0]}",
                                row=i, row_sum=float(row.sum()))
        s = float(row.sum())
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise NotStochastic(f"row {i} sums to {s!r}, not 1", row=i, row_sum=s)
    return arr


def power(m: StochasticMatrix, k: int) -> StochasticMatrix:
    return StochasticMatrix(m.power(k))


@dataclass(frozen=True, order=True)
class SpeedRange:
    index: int

    def __post_init__(self):
        if not 0 <= self.index < N_SPEED_RANGES:
            raise ValueError(f"speed range index {self.index} not in 0..{N_SPEED_RANGES - 1}")

    @property
    def label(self) -> str:
        return SPEED_LABELS[self.index]

    @property
    def bounds_mph(self) -> tuple[float, float]:
        lo = SPEED_STEP_MPH * self.index
        return lo, lo + SPEED_STEP_MPH


def speed_bin(v_mph: float) -> SpeedRange:
    """Half-open 5 mph bins; exactly 60 mph falls into the top bin."""
    if not (0.0 <= v_mph <= MAX_SPEED_MPH):
        raise SpeedOutOfRange(f"speed {v_mph!r} mph outside [0, {MAX_SPEED_MPH:g}]")
    return SpeedRange(min(int(math.floor(v_mph / SPEED_STEP_MPH)), N_SPEED_RANGES - 1))


# Three-state chain used as a textbook example.
EXAMPLE_3STATE = (
    (0.5, 0.25, 0.25),
    (0.4, 0.4, 0.2),
    (0.3, 0.3, 0.4),
)


def _default_speed_rows() -> tuple[tuple[float, ...], ...]:
    rows = np.zeros((N_SPEED_RANGES, N_SPEED_RANGES))
    rows[0, :2] = (0.85, 0.15)
    rows[1, :3] = (0.01, 0.8, 0.19)
    rows[2, 2:4] = (0.99, 0.01)
    for i in range(3, N_SPEED_RANGES - 1):
        rows[i, i - 1:i + 2] = (0.01, 0.98, 0.01)
    rows[-1, -2:] = (0.01, 0.99)
    return tuple(tuple(r) for r in rows.tolist())


DEFAULT_SPEED_MATRIX = _default_speed_rows()

DEFAULT_LANE_MATRIX = (
    (0.8, 0.2, 0.0, 0.0, 0.0),
    (0.1, 0.7, 0.2, 0.0, 0.0),
    (0.0, 0.3, 0.6, 0.1, 0.0),
    (0.0, 0.0, 0.2, 0.7, 0.1),
    (0.0, 0.0, 0.0, 0.4, 0.6),
)


@dataclass(frozen=True)
class LayeredVehicleModel:
    speed_matrix: StochasticMatrix
    lane_matrices: tuple[StochasticMatrix, ...]

    def __post_init__(self):
        if self.speed_matrix.n != N_SPEED_RANGES:
            raise ValueError(f"speed matrix must be {N_SPEED_RANGES}x{N_SPEED_RANGES}, got n={self.speed_matrix.n}")
        if len(self.lane_matrices) != N_SPEED_RANGES:
            raise ValueError(f"need one lane matrix per speed range ({N_SPEED_RANGES}), got {len(self.lane_matrices)}")
        dims = {q.n for q in self.lane_matrices}
        if len(dims) != 1:
            raise ValueError(f"lane matrices disagree on dimension: {sorted(dims)}")

    @property
    def lanes(self) -> int:
        return self.lane_matrices[0].n

    @classmethod
    def default(cls) -> "LayeredVehicleModel":
        return _DEFAULT_MODEL

    @classmethod
    def from_lists(cls, speed_matrix: Sequence | None = None,
                   lane_matrices: Sequence | None = None) -> "LayeredVehicleModel":
        sm = StochasticMatrix(speed_matrix) if speed_matrix is not None else _DEFAULT_MODEL.speed_matrix
        if lane_matrices is None:
            lm = _DEFAULT_MODEL.lane_matrices
        else:
            lm = tuple(StochasticMatrix(q) for q in lane_matrices)
        return cls(sm, lm)


_DEFAULT_MODEL = LayeredVehicleModel(
    StochasticMatrix(DEFAULT_SPEED_MATRIX),
    (StochasticMatrix(DEFAULT_LANE_MATRIX),) * N_SPEED_RANGES,
)


def speed_transition_prob(model: LayeredVehicleModel, src: SpeedRange, dst: SpeedRange, steps: int) -> float:
    return float(model.speed_matrix.power(steps)[src.index, dst.index])


def lane_transition_prob(model: LayeredVehicleModel, speed: SpeedRange, from_lane: int, to_lane: int,
                         steps: int) -> float:
    return float(model.lane_matrices[speed.index].power(steps)[from_lane, to_lane])
