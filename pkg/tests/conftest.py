# -*- coding: utf-8 -*-
"""测试公共夹具"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from birnn_app.core.compartmental import ModelParams  # noqa: E402
from birnn_app.core.gru import init_params  # noqa: E402
from birnn_app.core.losses import Episode, Standardizer, build_episode  # noqa: E402
from birnn_app.core.scenario import ScenarioConfig, generate_scenario  # noqa: E402
from birnn_app.core.virtual_patient import nominal_params  # noqa: E402


@pytest.fixture
def params() -> ModelParams:
    return nominal_params()


@pytest.fixture
def short_scenario():
    """两天、无扰动的场景"""
    config = ScenarioConfig(days=2, time_jitter_min=0, size_jitter=0.0, duration_jitter_min=0, seed=3)
    return generate_scenario(config)


def make_episode(params: ModelParams, n_steps: int = 32, seed: int = 0) -> Episode:
    """带进餐与胰岛素脉冲的短序列，实测血糖取线性模型轨迹加扰动"""
    rng = np.random.default_rng(seed)
    inputs = np.zeros((n_steps, 2))
    inputs[:, 0] = params.U_b
    inputs[3, 0] += 2.0
    inputs[5:12, 1] = 4.0
    episode = build_episode(inputs, np.zeros(n_steps), params)
    glucose = params.G_b + np.cumsum(rng.normal(0.0, 1.5, size=n_steps))
    return Episode(inputs=inputs, glucose_meas=glucose, aux_states=episode.aux_states, y0_ref=episode.y0_ref)


@pytest.fixture
def small_problem(params):
    """n_hu = 8，单条 32 步序列"""
    episode = make_episode(params)
    std = Standardizer.fit([episode])
    theta = init_params(8, seed=5)
    return theta, params, [episode], std


def unit_standardizer() -> Standardizer:
    return Standardizer(mean=np.zeros(7), std=np.ones(7))
