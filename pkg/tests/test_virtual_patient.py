# -*- coding: utf-8 -*-
"""虚拟患者测试"""

import numpy as np
import pytest

from birnn_app.core.compartmental import basal_inputs, build_linear_model, equilibrium_state, state_trajectory
from birnn_app.core.identification import MeasuredSeries, fit_rls
from birnn_app.core.scenario import Scenario, ScenarioConfig, generate_scenario
from birnn_app.core.virtual_patient import VirtualPatientConfig, generate_cohort, simulate_patient
from birnn_app.utils.constants import MINUTES_PER_DAY
from birnn_app.utils.errors import UnstableConfigurationError


def _basal_scenario(params, days):
    return Scenario(inputs=basal_inputs(params, days * MINUTES_PER_DAY), meal_log=[], bolus_log=[])


def test_degenerate_patient_equals_linear_model(params, short_scenario):
    trace = simulate_patient(VirtualPatientConfig(base_params=params), short_scenario)
    linear = state_trajectory(build_linear_model(params), equilibrium_state(params), short_scenario.inputs)
    np.testing.assert_allclose(trace.states, linear, atol=1e-12, rtol=0)
    assert np.array_equal(trace.measured_glucose, trace.states[:, 0])


def test_circadian_response_is_periodic(params):
    config = VirtualPatientConfig(base_params=params, circadian_amplitude=0.3, nonlinearity_gain=0.5)
    trace = simulate_patient(config, _basal_scenario(params, 5))
    day3 = trace.states[3 * MINUTES_PER_DAY:4 * MINUTES_PER_DAY, 0]
    day4 = trace.states[4 * MINUTES_PER_DAY:5 * MINUTES_PER_DAY, 0]
    assert np.max(np.abs(day3 - day4)) < 1e-6
    assert np.ptp(day4) > 1.0


def test_effective_p2_follows_sinusoid(params):
    config = VirtualPatientConfig(base_params=params, circadian_amplitude=0.2, circadian_phase_min=60.0)
    p2 = config.effective_p2(np.array([60.0, 420.0, 780.0, 1500.0]))
    np.testing.assert_allclose(p2, params.p2 * np.array([1.0, 1.2, 1.0, 1.0]), rtol=0, atol=1e-9)


def test_cgm_noise_statistics(params):
    config = VirtualPatientConfig(base_params=params, cgm_noise_std_mgdl=5.0, seed=13)
    trace = simulate_patient(config, _basal_scenario(params, 7))
    noise = trace.measured_glucose - trace.states[:, 0]
    assert abs(noise.mean()) < 0.2
    assert noise.std() == pytest.approx(5.0, abs=0.2)
    again = simulate_patient(config, _basal_scenario(params, 7))
    assert np.array_equal(again.measured_glucose, trace.measured_glucose)


def test_linear_mismatch_grows_with_circadian_amplitude(params, short_scenario):
    test_scenario = generate_scenario(ScenarioConfig(days=2, seed=17))
    errors = []
    for amplitude in (0.0, 0.15, 0.3):
        config = VirtualPatientConfig(base_params=params, circadian_amplitude=amplitude)
        train = simulate_patient(config, short_scenario)
        fitted = fit_rls([MeasuredSeries(short_scenario.inputs, train.measured_glucose)])
        truth = simulate_patient(config, test_scenario)
        predicted = state_trajectory(build_linear_model(fitted), equilibrium_state(fitted), test_scenario.inputs)
        errors.append(float(np.sqrt(np.mean((predicted[:, 0] - truth.states[:, 0]) ** 2))))
    assert errors[0] < 0.5
    assert errors[0] < errors[1] < errors[2]


def test_blow_up_is_reported(params):
    inputs = basal_inputs(params, 10)
    inputs[0, 1] = 1e9
    with pytest.raises(UnstableConfigurationError):
        simulate_patient(VirtualPatientConfig(base_params=params), Scenario(inputs, [], []))


def test_invalid_configuration_rejected(params, short_scenario):
    with pytest.raises(ValueError):
        simulate_patient(VirtualPatientConfig(base_params=params, circadian_amplitude=1.5), short_scenario)


def test_cohort_generation(params):
    template = VirtualPatientConfig(base_params=params, circadian_amplitude=0.3, cgm_noise_std_mgdl=2.0)
    cohort = generate_cohort(template, n_patients=10, spread=0.2, seed=7)
    assert len(cohort) == 10
    assert len({patient.seed for patient in cohort}) == 10
    for patient in cohort:
        patient.validate()
        p = patient.base_params
        assert p.U_b == params.U_b
        assert 0.8 * params.p1 <= p.p1 <= 1.2 * params.p1
        assert 0.8 * params.G_b <= p.G_b <= 1.2 * params.G_b
        assert patient.circadian_amplitude == 0.3
    again = generate_cohort(template, n_patients=10, spread=0.2, seed=7)
    assert [c.to_dict() for c in cohort] == [c.to_dict() for c in again]


def test_config_dict_round_trip(params):
    config = VirtualPatientConfig(base_params=params, circadian_amplitude=0.1, seed=4)
    assert VirtualPatientConfig.from_dict(config.to_dict()) == config
