# -*- coding: utf-8 -*-
"""命令行测试"""

import json

import pandas as pd
import pytest

from birnn_app.cli.commands import build_parser, main
from birnn_app.core.exporter import ArtifactExporter
from birnn_app.core.virtual_patient import VirtualPatientConfig
from birnn_app.utils.constants import APP_VERSION, PIPELINE_STAGES, TRAJECTORY_COLUMNS

SUBCOMMANDS = ['generate', 'simulate', 'fit-linear', 'train', 'evaluate', 'simulate-model', 'run']


@pytest.mark.parametrize('command', SUBCOMMANDS)
def test_subcommand_help(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, '--help'])
    assert exc.value.code == 0
    assert command in capsys.readouterr().out


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(['generate', '--out', 'x', '--bogus'])
    assert exc.value.code == 2


def test_stage_choices():
    args = build_parser().parse_args(['run', '--stage', 'fit-linear'])
    assert args.stage == 'fit-linear'
    assert args.stage in PIPELINE_STAGES
    with pytest.raises(SystemExit):
        build_parser().parse_args(['run', '--stage', 'deploy'])


def test_simulate_model_requires_one_source():
    with pytest.raises(SystemExit) as exc:
        main(['simulate-model', '--inputs', 'a.csv', '--out', 'b.csv'])
    assert exc.value.code == 2


def test_single_patient_workflow(tmp_path, params):
    log = ['--log-file', str(tmp_path / 'cli.log')]
    data_dir = tmp_path / 'data'
    scenario_cfg = tmp_path / 'scenario.json'
    scenario_cfg.write_text(json.dumps({'days': 2}), encoding='utf-8')
    patient_file = tmp_path / 'patient.json'
    patient = VirtualPatientConfig(base_params=params, circadian_amplitude=0.1, cgm_noise_std_mgdl=1.0, seed=3)
    assert ArtifactExporter().export_patient('patient_00', patient, str(patient_file), 'manual')

    assert main(log + ['generate', '--config', str(scenario_cfg), '--out', str(data_dir), '--seed', '5']) == 0
    assert (data_dir / 'scenario_train.csv').is_file()
    assert (data_dir / 'events_train.json').is_file()

    assert main(log + ['simulate', '--patient', str(patient_file),
                       '--scenario', str(data_dir / 'scenario_train.csv'),
                       '--out', str(data_dir / 'trace_train.csv')]) == 0
    trace = pd.read_csv(data_dir / 'trace_train.csv', comment='#')
    assert len(trace) == 2 * 1440

    linear = tmp_path / 'linear.json'
    assert main(log + ['fit-linear', '--data', str(data_dir), '--out', str(linear)]) == 0
    fitted = json.loads(linear.read_text(encoding='utf-8'))
    assert set(fitted['model_params']) >= {'p0', 'p1', 'p2', 'p3', 'p4', 'p5', 'G_b', 'U_b'}

    trajectory = tmp_path / 'trajectory.csv'
    assert main(log + ['simulate-model', '--params', str(linear), '--inputs',
                       str(data_dir / 'scenario_train.csv'), '--out', str(trajectory)]) == 0
    frame = pd.read_csv(trajectory, comment='#')
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert trajectory.read_text(encoding='utf-8').startswith('# config_hash: ')


def test_runtime_failure_exits_with_one(tmp_path):
    code = main(['--log-file', str(tmp_path / 'cli.log'), 'fit-linear', '--data', str(tmp_path / 'missing'),
                 '--out', str(tmp_path / 'out.json')])
    assert code == 1


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(['--version'])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == f'birnn {APP_VERSION}'
