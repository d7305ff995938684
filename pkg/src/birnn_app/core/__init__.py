#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
核心业务逻辑模块
"""

from .compartmental import ModelParams, LinearModel, build_linear_model, simulate
from .scenario import ScenarioConfig, Scenario, generate_scenario, nominal_protocols
from .virtual_patient import VirtualPatientConfig, simulate_patient, generate_cohort
from .identification import fit_rls
from .gru import GruParams, gru_cell, rollout, init_params
from .losses import Standardizer, Episode, LossWeights, augmented_loss, gradient
from .trainer import TrainConfig, Checkpoint, train
from .evaluation import EvalReport, rmse, gof, evaluate_cohort
from .config_manager import ConfigManager, ExperimentConfig
from .file_manager import FileManager
from .exporter import ArtifactExporter
from .pipeline import Pipeline, run_pipeline

__all__ = [
    'ModelParams', 'LinearModel', 'build_linear_model', 'simulate',
    'ScenarioConfig', 'Scenario', 'generate_scenario', 'nominal_protocols',
    'VirtualPatientConfig', 'simulate_patient', 'generate_cohort',
    'fit_rls',
    'GruParams', 'gru_cell', 'rollout', 'init_params',
    'Standardizer', 'Episode', 'LossWeights', 'augmented_loss', 'gradient',
    'TrainConfig', 'Checkpoint', 'train',
    'EvalReport', 'rmse', 'gof', 'evaluate_cohort',
    'ConfigManager', 'ExperimentConfig',
    'FileManager',
    'ArtifactExporter',
    'Pipeline', 'run_pipeline'
]
