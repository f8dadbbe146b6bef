"""Monte Carlo check of chain evolution against exact matrix powers.

Samples are drawn in fixed-size chunks, each with its own child seed spawned
from the user seed, so a report depends only on (seed, samples) and not on the
number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .markov import LayeredVehicleModel, StochasticMatrix

CHUNK = 1 << 15


@dataclass(frozen=True)
class ChainSampleReport:
    start_state: int
    horizon: int
    samples: int
    seed: int
    empirical_distribution: tuple[float, ...]
    reference_distribution: tuple[float, ...]
    max_abs_error: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LayeredSampleReport:
    start_speed_bin: int
    start_lane: int
    horizon: int
    samples: int
    seed: int
    joint_empirical: tuple[tuple[float, ...], ...]
    joint_reference: tuple[tuple[float, ...], ...]
    speed_empirical: tuple[float, ...]
    speed_reference: tuple[float, ...]
    lane_empirical: tuple[float, ...]
    lane_reference: tuple[float, ...]
    joint_max_abs_error: float
    speed_max_abs_error: float
    lane_max_abs_error: float

    @property
    def max_abs_error(self) -> float:
        return max(self.joint_max_abs_error, self.speed_max_abs_error, self.lane_max_abs_error)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_abs_error"] = self.max_abs_error
        return d


def _cumulative(rows: np.ndarray) -> np.ndarray:
    """Row-wise CDF with the tail pinned to exactly 1 from the last positive entry on."""
    cum = np.cumsum(rows, axis=-1)
    last = rows.shape[-1] - 1 - np.argmax((rows > 0)[..., ::-1], axis=-1)
    cols = np.arange(rows.shape[-1])
    cum[cols >= last[..., None]] = 1.0
    return cum


def _draw(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    return (cum_rows <= u[:, None]).sum(axis=1)


def _chunks(samples: int, seed: int):
    sizes = [CHUNK] * (samples // CHUNK)
    if samples % CHUNK:
        sizes.append(samples % CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(sizes, seeds))


def _run(job, chunks, workers: int):
    if workers <= 1:
        parts = [job(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, chunks))
    return sum(parts)


def sample_chain(m: StochasticMatrix, start: int, horizon: int, samples: int, seed: int = 0,
                 workers: int = 1) -> ChainSampleReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if not 0 <= start < m.n:
        raise ValueError(f"start state {start} outside 0..{m.n - 1}")
    cum = _cumulative(m.values)

    def job(chunk):
        size, ss = chunk
        rng = np.random.default_rng(ss)
        state = np.full(size, start)
        for _ in range(horizon):
            state = _draw(cum[state], rng.random(size))
        return np.bincount(state, minlength=m.n)

    counts = _run(job, _chunks(samples, seed), workers)
    empirical = counts / samples
    reference = m.power(horizon)[start]
    return ChainSampleReport(start, horizon, samples, seed, tuple(empirical.tolist()),
                             tuple(reference.tolist()), float(np.abs(empirical - reference).max()))


def layered_transition_matrix(model: LayeredVehicleModel) -> np.ndarray:
    """Exact one-step matrix of the joint (speed range, lane) chain.

    State s * lanes + l; speed moves first, then the lane under the new range.
    """
    P = model.speed_matrix.values
    L = model.lanes
    Q = np.stack([q.values for q in model.lane_matrices])
    # T[(s,l),(s',l')] = P[s,s'] * Q[s'][l,l']
    T = np.einsum("ab,bij->aibj", P, Q)
    return T.reshape(P.shape[0] * L, P.shape[0] * L)


def sample_layered(model: LayeredVehicleModel, start_speed_bin: int, start_lane: int, horizon: int, samples: int,
                   seed: int = 0, workers: int = 1) -> LayeredSampleReport:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n_speed, n_lane = model.speed_matrix.n, model.lanes
    if not (0 <= start_speed_bin < n_speed and 0 <= start_lane < n_lane):
        raise ValueError("start state outside the model")
    cum_speed = _cumulative(model.speed_matrix.values)
    cum_lane = _cumulative(np.stack([q.values for q in model.lane_matrices]))

    def job(chunk):
        size, ss = chunk
        rng = np.random.default_rng(ss)
        speed = np.full(size, start_speed_bin)
        lane = np.full(size, start_lane)
        for _ in range(horizon):
            speed = _draw(cum_speed[speed], rng.random(size))
            lane = _draw(cum_lane[speed, lane], rng.random(size))
        return np.bincount(speed * n_lane + lane, minlength=n_speed * n_lane)

    counts = _run(job, _chunks(samples, seed), workers)
    joint = (counts / samples).reshape(n_speed, n_lane)
    T = layered_transition_matrix(model)
    ref = np.linalg.matrix_power(T, horizon)[start_speed_bin * n_lane + start_lane].reshape(n_speed, n_lane)
    speed_ref = model.speed_matrix.power(horizon)[start_speed_bin]
    return LayeredSampleReport(
        start_speed_bin, start_lane, horizon, samples, seed,
        tuple(map(tuple, joint.tolist())), tuple(map(tuple, ref.tolist())),
        tuple(joint.sum(axis=1).tolist()), tuple(speed_ref.tolist()),
        tuple(joint.sum(axis=0).tolist()), tuple(ref.sum(axis=0).tolist()),
        float(np.abs(joint - ref).max()),
        float(np.abs(joint.sum(axis=1) - speed_ref).max()),
        float(np.abs(joint.sum(axis=0) - ref.sum(axis=0)).max()),
    )
