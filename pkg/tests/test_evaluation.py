# -*- coding: utf-8 -*-
"""评估指标与报告测试"""

import math

import numpy as np
import pytest

from birnn_app.core.evaluation import (EvalReport, PatientMetrics, evaluate_cohort, evaluate_patient,
                                       generalization_gap, gof, gof_details, predict_linear, rmse, summarize)
from birnn_app.core.gru import init_params
from birnn_app.core.losses import Standardizer, build_episode
from birnn_app.core.trainer import Checkpoint, TrainConfig
from birnn_app.core.virtual_patient import VirtualPatientConfig, simulate_patient
from birnn_app.utils.constants import EVAL_TRACE_COLUMNS
from birnn_app.utils.errors import DegenerateDataError, ShapeMismatchError


@pytest.fixture
def evaluation_case(params, short_scenario):
    truth = simulate_patient(VirtualPatientConfig(base_params=params), short_scenario)
    episode = build_episode(short_scenario.inputs, truth.measured_glucose, params, true_states=truth.states)
    checkpoint = Checkpoint(params=init_params(4, seed=3), standardizer=Standardizer.fit([episode]),
                            train_config=TrainConfig(n_hu=4), model_params=params)
    return checkpoint, episode


def test_rmse():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    assert rmse([100.0, 120.0, 90.0], [102.5, 122.5, 92.5]) == pytest.approx(2.5)
    with pytest.raises(ShapeMismatchError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(DegenerateDataError):
        rmse([], [])


def test_gof_reference_values():
    y = np.array([0.0, 6.0, 12.0, 3.0, 9.0])
    assert gof(y, y) == pytest.approx(100.0)
    assert gof(y, np.full(5, y.mean())) == pytest.approx(0.0)
    value, skipped = gof_details([0.0, 6.0, 12.0], [1.0, 6.0, 13.0])
    assert value == pytest.approx(83.3333333, rel=1e-6)
    assert skipped == 1


def test_gof_on_constant_measurement_is_degenerate():
    with pytest.raises(DegenerateDataError):
        gof([5.0, 5.0, 5.0], [4.0, 5.0, 6.0])


def test_summarize_uses_linear_percentiles():
    assert summarize([4.2]) == {'median': 4.2, 'p25': 4.2, 'p75': 4.2}
    summary = summarize([1.0, 2.0, 3.0, 4.0])
    assert summary == {'median': 2.5, 'p25': 1.75, 'p75': 3.25}


def test_linear_prediction_recovers_degenerate_patient(params, evaluation_case):
    checkpoint, episode = evaluation_case
    metrics, traces = evaluate_patient(checkpoint, params, episode, 'patient_03', true_params=params)
    assert metrics.patient_id == 'patient_03'
    assert metrics.rmse_linear == pytest.approx(0.0, abs=1e-9)
    assert metrics.gof_linear == pytest.approx(100.0, abs=1e-6)
    assert list(traces.columns) == EVAL_TRACE_COLUMNS
    assert len(traces) == episode.n_steps
    np.testing.assert_allclose(traces['iob_linear'], traces['iob_true'], atol=1e-9)
    np.testing.assert_allclose(traces['glucose_linear'], predict_linear(params, episode.inputs)[:, 0])


def test_traces_without_ground_truth(params, evaluation_case):
    checkpoint, episode = evaluation_case
    episode.true_states = None
    _, traces = evaluate_patient(checkpoint, params, episode)
    assert traces['iob_true'].isna().all()
    np.testing.assert_array_equal(traces['glucose_true'], episode.glucose_meas)


def test_cohort_report_is_deterministic(params, evaluation_case):
    checkpoint, episode = evaluation_case
    first = evaluate_cohort([checkpoint] * 2, [params] * 2, [episode] * 2).to_dict()
    second = evaluate_cohort([checkpoint] * 2, [params] * 2, [episode] * 2).to_dict()
    assert first == second
    assert [p['patient_id'] for p in first['patients']] == ['patient_00', 'patient_01']
    assert first['n_patients'] == 2
    assert first['percentile_method'] == 'linear'


def test_cohort_requires_matching_counts(params, evaluation_case):
    checkpoint, episode = evaluation_case
    with pytest.raises(ShapeMismatchError):
        evaluate_cohort([checkpoint] * 2, [params], [episode] * 2)


def test_wins_count_strict_improvements():
    patients = [
        PatientMetrics('patient_00', 1.0, 2.0, 80.0, 70.0),
        PatientMetrics('patient_01', 1.0, 1.0, 75.0, 75.0),
        PatientMetrics('patient_02', 3.0, 2.0, 60.0, 65.0, extra={'gap_with_bio': 0.1}),
    ]
    report = EvalReport(patients=patients)
    assert report.birnn_wins == 1
    assert report.cohort['gof_birnn']['median'] == 75.0
    assert report.cohort['gap_with_bio']['median'] == 0.1
    assert report.to_dict()['patients'][2]['gap_with_bio'] == 0.1


def test_generalization_gap_is_zero_on_same_data(evaluation_case):
    checkpoint, episode = evaluation_case
    assert generalization_gap(checkpoint.params, checkpoint.standardizer, [episode], [episode]) == 0.0
