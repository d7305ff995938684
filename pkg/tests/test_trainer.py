# -*- coding: utf-8 -*-
"""训练流程测试"""

import itertools
import math

import numpy as np
import pytest

from birnn_app.core import trainer
from birnn_app.core.gru import init_params
from birnn_app.core.losses import LossWeights, Standardizer
from birnn_app.core.trainer import Adam, Checkpoint, EarlyStopping, TrainConfig, _clip, train
from birnn_app.utils.errors import LossConfigError, NonFiniteGradientError, ShapeMismatchError

from conftest import make_episode


def _config(**overrides):
    values = dict(eta=0.01, kappa_max=30, kappa_val=5, rho_val=3, n_hu=4, seed=1,
                  weights=LossWeights(0.5, 0.25, 0.25, 0.5))
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def episodes(params):
    train_eps = [make_episode(params, n_steps=24, seed=1), make_episode(params, n_steps=20, seed=2)]
    val_eps = [make_episode(params, n_steps=24, seed=3)]
    return train_eps, val_eps


def test_early_stopping_on_rising_validation_error(monkeypatch, params, episodes):
    counter = itertools.count(1)
    monkeypatch.setattr(trainer, 'validation_mse', lambda *args: float(next(counter)))
    result = train(_config(kappa_max=1000, kappa_val=5, rho_val=20), *episodes, params)
    assert result.stop_reason == 'early-stopping'
    assert len(result.history) == 105
    assert result.history[-1]['iter'] == 105
    assert result.best_iteration == 5
    assert result.best_val_mse == 1.0


def test_best_params_follow_minimum_validation_error(params, episodes):
    result = train(_config(), *episodes, params)
    checked = [row['val_mse'] for row in result.history if not math.isnan(row['val_mse'])]
    assert len(checked) == len(result.history) // 5
    assert result.best_val_mse == min(checked)
    best_row = next(row for row in result.history if row['val_mse'] == result.best_val_mse)
    assert best_row['iter'] == result.best_iteration
    recomputed = trainer.validation_mse(result.best_params, episodes[1], result.standardizer)
    assert recomputed == pytest.approx(result.best_val_mse, rel=1e-12)


def test_training_is_deterministic(params, episodes):
    a = train(_config(kappa_max=10), *episodes, params)
    b = train(_config(kappa_max=10), *episodes, params)
    assert np.array_equal(a.best_params.to_vector(), b.best_params.to_vector())
    assert [row['loss'] for row in a.history] == [row['loss'] for row in b.history]


def test_training_reduces_loss(params, episodes):
    result = train(_config(kappa_max=60, rho_val=100, eta=0.02), *episodes, params)
    assert result.history[-1]['loss'] < result.history[0]['loss']


def test_history_rows(params, episodes):
    result = train(_config(kappa_max=5), *episodes, params)
    row = result.history[0]
    assert set(row) == {'iter', 'loss', 'L_D', 'L_B', 'L_A', 'val_mse', 'clipped'}
    assert math.isnan(row['val_mse'])
    assert not math.isnan(result.history[4]['val_mse'])
    assert result.stop_reason == 'max-iterations'


def test_divergence_stops_training(monkeypatch, params, episodes):
    def exploding(*args, **kwargs):
        raise NonFiniteGradientError('W_h')

    monkeypatch.setattr(trainer, 'value_and_gradient', exploding)
    result = train(_config(), *episodes, params)
    assert result.stop_reason == 'diverged'
    assert result.history == []
    assert np.array_equal(result.best_params.to_vector(), init_params(4, seed=1).to_vector())


def test_invalid_configuration(params, episodes):
    with pytest.raises(LossConfigError):
        train(_config(kappa_val=50), *episodes, params)
    with pytest.raises(LossConfigError):
        train(_config(eta=0.0), *episodes, params)
    with pytest.raises(LossConfigError):
        train(_config(), [], episodes[1], params)


def test_adam_first_step_moves_by_learning_rate():
    theta = init_params(3, seed=0)
    grad = theta.zeros_like()
    grad.W_r[:] = 2.0
    grad.b_y[:] = -0.5
    optimizer = Adam(theta, eta=0.1)
    updated = optimizer.step(theta, grad)
    np.testing.assert_allclose(updated.W_r - theta.W_r, -0.1, atol=1e-6)
    np.testing.assert_allclose(updated.b_y - theta.b_y, 0.1, atol=1e-6)
    assert np.array_equal(updated.R_z, theta.R_z)


def test_gradient_clipping():
    grad = init_params(3, seed=0).scale(100.0)
    clipped, norm, flag = _clip(grad, 10.0)
    assert flag and norm > 10.0
    assert clipped.global_norm() == pytest.approx(10.0)
    small = grad.scale(1e-4)
    same, _, flag = _clip(small, 10.0)
    assert not flag and same is small


def test_early_stopping_counts_failures():
    theta = init_params(2, seed=0)
    stopper = EarlyStopping(patience=2)
    assert stopper.update(1.0, theta, 5)
    assert not stopper.update(1.0, theta, 10)
    assert not stopper.should_stop
    assert not stopper.update(2.0, theta, 15)
    assert stopper.should_stop
    assert stopper.best_iteration == 5


def test_checkpoint_round_trip(params, episodes):
    std = Standardizer.fit(episodes[0])
    checkpoint = Checkpoint(params=init_params(4, seed=2), standardizer=std, train_config=_config(),
                            model_params=params, best_iteration=7, config_hash='abc')
    data = checkpoint.to_dict()
    assert data['n_hu'] == 4 and data['seed'] == 1
    restored = Checkpoint.from_dict(data)
    assert np.array_equal(restored.params.to_vector(), checkpoint.params.to_vector())
    assert restored.train_config == checkpoint.train_config
    assert restored.model_params == params
    data['n_hu'] = 5
    with pytest.raises(ShapeMismatchError):
        Checkpoint.from_dict(data)
    data['format'] = 'other'
    with pytest.raises(ShapeMismatchError):
        Checkpoint.from_dict(data)
