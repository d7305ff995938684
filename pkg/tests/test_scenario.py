# -*- coding: utf-8 -*-
"""场景生成测试"""

import numpy as np
import pytest

from birnn_app.core.scenario import MealEvent, ScenarioConfig, generate_scenario, nominal_protocols
from birnn_app.utils.constants import MINUTES_PER_DAY
from birnn_app.utils.errors import ScheduleError


def test_validation_protocol_shape():
    _, validation, _ = nominal_protocols()
    scenario = generate_scenario(validation)
    assert scenario.n_minutes == 14 * MINUTES_PER_DAY == 20160
    assert len(scenario.meal_log) == 42
    assert scenario.inputs.shape == (20160, 2)


def test_nominal_protocol_defaults():
    train, validation, test = nominal_protocols()
    meals = [(m.start, m.size, m.duration) for m in validation.nominal_meals]
    assert meals == [(420, 60.0, 30), (720, 60.0, 30), (1080, 80.0, 40)]
    assert (train.days, validation.days, test.days) == (14, 14, 7)
    assert len({train.seed, validation.seed, test.seed}) == 3
    with pytest.raises(ValueError):
        nominal_protocols(seeds=(1, 1, 2))


def test_zero_jitter_reproduces_nominal_events():
    config = ScenarioConfig(days=2, time_jitter_min=0, size_jitter=0.0, duration_jitter_min=0,
                            bolus_error_range=0.0, bolus_delay_range_min=(5, 5), seed=11)
    scenario = generate_scenario(config)
    nominal = list(config.nominal_meals) * 2
    assert scenario.meal_log == nominal
    assert len(scenario.bolus_log) == 6
    for i, bolus in enumerate(scenario.bolus_log):
        assert bolus.time == scenario.meal_absolute_start(i) + 5
        assert bolus.amount == pytest.approx(nominal[i].size / config.carb_ratio_g_per_u)


def test_same_seed_is_deterministic():
    config = ScenarioConfig(days=3, seed=42)
    a = generate_scenario(config)
    b = generate_scenario(config)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.meal_log == b.meal_log
    assert a.bolus_log == b.bolus_log


def test_distinct_seeds_give_distinct_schedules():
    a = generate_scenario(ScenarioConfig(days=2, seed=1))
    b = generate_scenario(ScenarioConfig(days=2, seed=2))
    assert a.meal_log != b.meal_log


def test_jitter_bounds_hold_over_many_draws():
    config = ScenarioConfig(days=1)
    for seed in range(1000):
        scenario = generate_scenario(ScenarioConfig(days=1, seed=seed))
        for meal, nominal in zip(scenario.meal_log, config.nominal_meals):
            assert abs(meal.start - nominal.start) <= config.time_jitter_min
            assert abs(meal.size / nominal.size - 1.0) <= config.size_jitter + 1e-12
            assert abs(meal.duration - nominal.duration) <= config.duration_jitter_min


def test_carbohydrate_and_insulin_mass_is_conserved():
    config = ScenarioConfig(days=3, seed=9)
    scenario = generate_scenario(config)
    total_carbs = sum(m.size for m in scenario.meal_log)
    assert scenario.inputs[:, 1].sum() == pytest.approx(total_carbs, rel=1e-12)
    total_bolus = sum(b.amount for b in scenario.bolus_log)
    basal = config.basal_rate_u_per_min * scenario.n_minutes
    assert scenario.inputs[:, 0].sum() == pytest.approx(basal + total_bolus, rel=1e-12)


def test_meals_never_overlap():
    scenario = generate_scenario(ScenarioConfig(days=5, time_jitter_min=60, seed=4))
    starts = [scenario.meal_absolute_start(i) for i in range(len(scenario.meal_log))]
    order = np.argsort(starts)
    for a, b in zip(order, order[1:]):
        assert starts[a] + scenario.meal_log[a].duration <= starts[b]


def test_unsatisfiable_schedule_raises():
    crowded = (MealEvent(400, 50.0, 120), MealEvent(420, 50.0, 120))
    config = ScenarioConfig(days=1, nominal_meals=crowded, time_jitter_min=0, duration_jitter_min=0)
    with pytest.raises(ScheduleError):
        generate_scenario(config)


def test_event_log_records_prng():
    scenario = generate_scenario(ScenarioConfig(days=1, seed=5))
    log = scenario.event_log()
    assert log['provenance']['prng']['algorithm'] == 'PCG64'
    assert len(log['meals']) == 3
    assert 'size_factor' in log['meals'][0]
