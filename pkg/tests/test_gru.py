# -*- coding: utf-8 -*-
"""GRU网络测试"""

import math

import numpy as np
import pytest

from birnn_app.core.gru import GruParams, backward, forward, gru_cell, init_params, rollout, sigmoid
from birnn_app.utils.errors import ShapeMismatchError


def _scalar_sigmoid(a):
    return 1.0 / (1.0 + math.exp(-a))


def test_zero_params_give_zero_outputs():
    theta = init_params(6, seed=0).zeros_like()
    inputs = np.random.default_rng(0).normal(size=(20, 2))
    outputs = rollout(theta, inputs)
    assert outputs.shape == (20, 5)
    assert np.all(outputs == 0.0)


def test_output_bias_passes_through():
    theta = init_params(6, seed=0)
    theta.W_y[:] = 0.0
    theta.b_y[:] = np.arange(5.0)
    outputs = rollout(theta, np.ones((7, 2)))
    assert np.array_equal(outputs, np.tile(np.arange(5.0), (7, 1)))


def test_scalar_cell_matches_closed_form():
    rng = np.random.default_rng(42)
    for _ in range(100):
        w = rng.uniform(-2.0, 2.0, size=11)
        theta = GruParams(
            W_r=np.array([[w[0]]]), W_z=np.array([[w[1]]]), W_h=np.array([[w[2]]]),
            R_r=np.array([[w[3]]]), R_z=np.array([[w[4]]]), R_h=np.array([[w[5]]]),
            b_r=np.array([w[6]]), b_z=np.array([w[7]]), b_h=np.array([w[8]]),
            W_y=np.array([[w[9]]]), b_y=np.array([w[10]]),
        )
        u, h = rng.uniform(-3.0, 3.0), rng.uniform(-1.0, 1.0)
        r = _scalar_sigmoid(w[0] * u + w[3] * h + w[6])
        z = _scalar_sigmoid(w[1] * u + w[4] * h + w[7])
        h_tilde = math.tanh(w[2] * u + r * (w[5] * h) + w[8])
        h_next = (1.0 - z) * h_tilde + z * h
        y = w[9] * h_next + w[10]
        cell_h, cell_y = gru_cell(theta, np.array([u]), np.array([h]))
        assert cell_h[0] == pytest.approx(h_next, abs=1e-12)
        assert cell_y[0] == pytest.approx(y, abs=1e-12)
        outputs, _ = forward(theta, np.array([[u]]), np.array([h]))
        assert outputs[0, 0] == pytest.approx(y, abs=1e-12)


def test_rollout_composes_cells():
    theta = init_params(8, seed=3)
    inputs = np.random.default_rng(1).normal(size=(32, 2))
    h0 = np.random.default_rng(2).uniform(-0.5, 0.5, size=8)
    outputs, cache = forward(theta, inputs, h0)
    h = h0
    for k in range(32):
        h, y = gru_cell(theta, inputs[k], h)
        np.testing.assert_allclose(outputs[k], y, atol=1e-12, rtol=0)
        np.testing.assert_allclose(cache.H[k + 1], h, atol=1e-12, rtol=0)


def test_hidden_state_stays_bounded():
    theta = init_params(16, seed=9).scale(5.0)
    inputs = np.random.default_rng(4).normal(scale=10.0, size=(200, 2))
    _, cache = forward(theta, inputs, np.full(16, 0.9))
    assert np.all(np.abs(cache.H) <= 1.0)


def test_sigmoid_is_stable_at_extremes():
    values = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(values))
    np.testing.assert_allclose(values, [0.0, 0.5, 1.0], atol=1e-15)


def test_backward_matches_finite_differences():
    theta = init_params(4, seed=11)
    theta.b_r[:] = 0.1
    theta.b_z[:] = -0.2
    theta.b_y[:] = 0.3
    rng = np.random.default_rng(5)
    inputs = rng.normal(size=(12, 2))
    weights = rng.normal(size=(12, 5))

    def objective(params):
        outputs, _ = forward(params, inputs)
        return float(np.sum(weights * outputs ** 2))

    outputs, cache = forward(theta, inputs)
    analytic = backward(theta, cache, 2.0 * weights * outputs).to_vector()
    base = theta.to_vector()
    h = 1e-5
    numeric = np.empty_like(base)
    for i in range(base.size):
        step = np.zeros_like(base)
        step[i] = h
        numeric[i] = (objective(theta.from_vector(base + step))
                      - objective(theta.from_vector(base - step))) / (2.0 * h)
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_init_is_deterministic_and_bounded():
    a = init_params(32, seed=7)
    b = init_params(32, seed=7)
    assert np.array_equal(a.to_vector(), b.to_vector())
    assert not np.array_equal(a.to_vector(), init_params(32, seed=8).to_vector())
    input_bound = math.sqrt(6.0 / (2 + 32))
    output_bound = math.sqrt(6.0 / (32 + 5))
    assert np.max(np.abs(a.W_r)) <= input_bound
    assert np.max(np.abs(a.R_h)) <= 1.0 / math.sqrt(32)
    assert np.max(np.abs(a.W_y)) <= output_bound
    assert np.all(a.b_h == 0.0) and np.all(a.b_y == 0.0)
    a.validate()
    with pytest.raises(ValueError):
        init_params(0, seed=1)


def test_shapes_and_errors():
    theta = init_params(5, seed=1)
    shapes = theta.expected_shapes()
    assert shapes['W_r'] == (5, 2)
    assert shapes['R_z'] == (5, 5)
    assert shapes['W_y'] == (5, 5)
    assert theta.to_vector().size == 3 * (5 * 2 + 5 * 5 + 5) + 5 * 5 + 5
    with pytest.raises(ShapeMismatchError):
        forward(theta, np.zeros((4, 3)))
    with pytest.raises(ShapeMismatchError):
        forward(theta, np.zeros((0, 2)))
    with pytest.raises(ShapeMismatchError):
        forward(theta, np.zeros((4, 2)), np.zeros(3))
    broken = theta.copy()
    broken.W_y = np.zeros((4, 5))
    with pytest.raises(ShapeMismatchError):
        broken.validate()


def test_params_dict_round_trip():
    theta = init_params(3, seed=2)
    restored = GruParams.from_dict(theta.to_dict())
    assert np.array_equal(restored.to_vector(), theta.to_vector())
