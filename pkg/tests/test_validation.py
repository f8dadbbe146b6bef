import numpy as np
import pytest

from lanechange.markov import DEFAULT_LANE_MATRIX, DEFAULT_SPEED_MATRIX, EXAMPLE_3STATE, LayeredVehicleModel, \
    StochasticMatrix
from lanechange.validation import CHUNK, layered_transition_matrix, sample_chain, sample_layered


def test_identity_is_point_mass():
    rep = sample_chain(StochasticMatrix(np.eye(4)), 2, 7, 5000, seed=3)
    assert rep.empirical_distribution == (0.0, 0.0, 1.0, 0.0)
    assert rep.max_abs_error == 0.0


def test_example_chain_two_steps():
    rep = sample_chain(StochasticMatrix(EXAMPLE_3STATE), 0, 2, 100_000, seed=11)
    assert rep.empirical_distribution[0] == pytest.approx(0.425, abs=0.01)
    assert rep.reference_distribution[0] == pytest.approx(0.425, abs=1e-12)


def test_lane_matrix_first_row():
    rep = sample_chain(StochasticMatrix(DEFAULT_LANE_MATRIX), 0, 1, 100_000, seed=5)
    assert np.allclose(rep.empirical_distribution, (0.8, 0.2, 0, 0, 0), atol=0.01)
    assert rep.empirical_distribution[2:] == (0.0, 0.0, 0.0)


def test_zero_probability_states_never_drawn():
    m = StochasticMatrix([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    rep = sample_chain(m, 0, 4, 10_000, seed=0)
    assert rep.empirical_distribution == (0.0, 1.0, 0.0)


def test_deterministic_and_worker_independent():
    m = StochasticMatrix(DEFAULT_SPEED_MATRIX)
    n = 3 * CHUNK + 17
    a = sample_chain(m, 6, 5, n, seed=42)
    assert a == sample_chain(m, 6, 5, n, seed=42)
    assert a == sample_chain(m, 6, 5, n, seed=42, workers=4)
    assert a != sample_chain(m, 6, 5, n, seed=43)


def test_argument_checks():
    m = StochasticMatrix(EXAMPLE_3STATE)
    with pytest.raises(ValueError):
        sample_chain(m, 3, 1, 10)
    with pytest.raises(ValueError):
        sample_chain(m, 0, 1, 0)
    with pytest.raises(ValueError):
        sample_layered(LayeredVehicleModel.default(), 12, 0, 1, 10)


def test_layered_matrix_is_stochastic_product():
    model = LayeredVehicleModel.default()
    T = layered_transition_matrix(model)
    assert T.shape == (60, 60)
    assert np.allclose(T.sum(axis=1), 1)
    # (D, lane 0) -> (D, lane 1): stay in D, then move one lane
    assert T[3 * 5 + 0, 3 * 5 + 1] == pytest.approx(0.98 * 0.2)


def test_layered_horizon_zero():
    rep = sample_layered(LayeredVehicleModel.default(), 3, 1, 0, 1000)
    assert rep.joint_empirical[3][1] == 1.0
    assert rep.max_abs_error == 0.0


def test_layered_speed_marginal():
    model = LayeredVehicleModel.default()
    rep = sample_layered(model, 3, 1, 3, 100_000, seed=9)
    ref = model.speed_matrix.power(3)[3]
    assert np.abs(np.array(rep.speed_empirical) - ref).max() <= 0.01
    assert rep.max_abs_error <= 0.01


def test_identity_speed_layer_collapses():
    q = StochasticMatrix(DEFAULT_LANE_MATRIX)
    model = LayeredVehicleModel(StochasticMatrix(np.eye(12)), (q,) * 12)
    layered = sample_layered(model, 4, 2, 3, 50_000, seed=1)
    assert np.allclose(layered.lane_reference, q.power(3)[2])
    assert np.abs(np.array(layered.lane_empirical) - q.power(3)[2]).max() <= 0.01
    assert sum(layered.speed_empirical[:4]) == 0.0
