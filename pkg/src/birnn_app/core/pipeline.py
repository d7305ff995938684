#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验流水线模块
generate → simulate → fit-linear → train → evaluate，
各阶段的产物都写入磁盘并带配置哈希，后续阶段可单独重跑。
"""

import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..utils.constants import DATA_SPLITS, PIPELINE_STAGES
from ..utils.errors import BirnnError, StageError
from .compartmental import ModelParams
from .config_manager import ExperimentConfig
from .evaluation import EvalReport, evaluate_cohort, generalization_gap
from .exporter import ArtifactExporter
from .file_manager import FileManager
from .identification import MeasuredSeries, fit_rls
from .losses import Episode, build_episode
from .scenario import Scenario, generate_scenario
from .trainer import Checkpoint, TrainConfig, train
from .virtual_patient import generate_cohort, simulate_patient

logger = logging.getLogger(__name__)

ABLATION_VARIANT = 'no_bio'


def patient_ids(n_patients: int) -> List[str]:
  return [f'patient_{i:02d}' for i in range(n_patients)]


def load_episode(files: FileManager, directory: Path, split: str, p: ModelParams) -> Episode:
  """读取某一划分的场景与地面真值，用生理参数 p 生成辅助状态"""
  inputs = files.read_inputs(str(directory / f'scenario_{split}.csv'))
  trace = files.read_trace(str(directory / f'trace_{split}.csv'))
  return build_episode(inputs, trace.measured_glucose, p, true_states=trace.states)


def fit_patient(files: FileManager, directory: Path, ridge: float = 0.0) -> ModelParams:
  """在训练划分上辨识线性模型"""
  inputs = files.read_inputs(str(directory / 'scenario_train.csv'))
  trace = files.read_trace(str(directory / 'trace_train.csv'))
  return fit_rls([MeasuredSeries(inputs=inputs, glucose_meas=trace.measured_glucose)], ridge=ridge)


def train_patient(files: FileManager, directory: Path, p: ModelParams, config: TrainConfig,
                  config_hash: str) -> Tuple[Checkpoint, List[Dict[str, Any]]]:
  """训练单个患者的 BI-RNN，返回检查点与训练历史"""
  train_eps = [load_episode(files, directory, 'train', p)]
  val_eps = [load_episode(files, directory, 'validation', p)]
  result = train(config, train_eps, val_eps, p)
  checkpoint = Checkpoint(params=result.best_params, standardizer=result.standardizer,
                          train_config=config, model_params=p,
                          best_iteration=result.best_iteration, config_hash=config_hash)
  return checkpoint, result.history


def evaluate_artifacts(files: FileManager, exporter: ArtifactExporter,
                       expected_hash: Optional[str] = None, force: bool = False,
                       ablation: bool = False) -> EvalReport:
  """
  读取检查点、线性拟合与测试数据并写出对比报告

  Args:
      files: 文件管理器（决定各目录）
      exporter: 产物导出器
      expected_hash: 期望的配置哈希，None 只要求各输入彼此一致
      force: 允许混合哈希的输入
      ablation: 同时评估去掉生物损失的对照检查点

  Raises:
      ProvenanceError: 输入的配置哈希不一致
      FileNotFoundError: 缺少产物
  """
  ids = files.list_patients()
  if not ids:
    raise FileNotFoundError(f"数据目录中没有患者: {files.paths.data_dir}")

  inputs = []
  for pid in ids:
    inputs += [files.checkpoint_path(pid), files.linear_path(pid), files.patient_path(pid),
               files.scenario_path(pid, 'test'), files.trace_path(pid, 'test')]
    if ablation:
      inputs += [files.checkpoint_path(pid, ABLATION_VARIANT), files.trace_path(pid, 'train')]
  config_hash = files.check_provenance([str(p) for p in inputs], expected_hash, force)

  ckpts, fits, tests, truths = [], [], [], []
  for pid in ids:
    ckpts.append(files.read_checkpoint(str(files.checkpoint_path(pid))))
    fits.append(files.read_model_params(str(files.linear_path(pid))))
    truths.append(files.read_patient(str(files.patient_path(pid))).base_params)
    tests.append(load_episode(files, files.patient_dir(pid), 'test', fits[-1]))
  report = evaluate_cohort(ckpts, fits, tests, patient_ids=ids, true_params=truths)

  if ablation:
    for pid, ckpt, fit, test_ep, metrics in zip(ids, ckpts, fits, tests, report.patients):
      train_ep = load_episode(files, files.patient_dir(pid), 'train', fit)
      plain = files.read_checkpoint(str(files.checkpoint_path(pid, ABLATION_VARIANT)))
      metrics.extra['gap_with_bio'] = generalization_gap(ckpt.params, ckpt.standardizer, [train_ep], [test_ep])
      metrics.extra['gap_without_bio'] = generalization_gap(plain.params, plain.standardizer,
                                                            [train_ep], [test_ep])
      logger.info(f"{pid}: 泛化差距 有生物损失 {metrics.extra['gap_with_bio']:.5f}, "
                  f"无生物损失 {metrics.extra['gap_without_bio']:.5f}")

  if not exporter.export_report(report, str(files.report_dir()), config_hash):
    raise OSError(f"报告写出失败: {files.report_dir()}")
  return report


class Pipeline:
  """实验流水线类"""

  def __init__(self, experiment: ExperimentConfig, force: bool = False):
    """
    初始化流水线

    Args:
        experiment: 实验配置
        force: 允许读取配置哈希不一致的产物
    """
    self.logger = logging.getLogger(__name__)
    self.experiment = experiment
    self.force = force
    self.config_hash = experiment.config_hash
    self.files = FileManager(experiment.paths)
    self.exporter = ArtifactExporter()
    self.report: Optional[EvalReport] = None
    self._stages = {
        'generate': self._generate,
        'simulate': self._simulate,
        'fit-linear': self._fit_linear,
        'train': self._train,
        'evaluate': self._evaluate,
    }

  def run(self, stage: Optional[str] = None) -> Optional[EvalReport]:
    """
    从 stage 开始执行到最后一个阶段

    Args:
        stage: 起始阶段，None 从头执行

    Returns:
        评估报告

    Raises:
        StageError: 任一阶段失败
    """
    if stage is not None and stage not in PIPELINE_STAGES:
      raise ValueError(f"未知阶段: {stage}，可选 {PIPELINE_STAGES}")
    start = PIPELINE_STAGES.index(stage) if stage else 0
    self.logger.info(f"流水线开始: 配置哈希 {self.config_hash}, 起始阶段 {PIPELINE_STAGES[start]}")
    for name in PIPELINE_STAGES[start:]:
      started = time.perf_counter()
      self.logger.info(f"[{name}] 阶段开始")
      try:
        self._stages[name]()
      except StageError:
        raise
      except (BirnnError, OSError, ValueError, KeyError) as e:
        self.logger.error(f"[{name}] 阶段失败: {str(e)}")
        raise StageError(name, str(e)) from e
      self.logger.info(f"[{name}] 阶段完成, 用时 {time.perf_counter() - started:.2f} 秒")
    return self.report

  def _require(self, ok: bool, stage: str, what: str) -> None:
    if not ok:
      raise StageError(stage, f"写出 {what} 失败")

  def _patients(self, stage: str) -> List[str]:
    ids = self.files.list_patients()
    if not ids:
      raise StageError(stage, f"数据目录缺失或为空: {self.experiment.paths.data_dir}")
    return ids

  def _check(self, stage: str, paths: List[Path]) -> None:
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
      raise StageError(stage, f"缺少上游产物: {missing}")
    self.files.check_provenance([str(p) for p in paths], self.config_hash, self.force)

  def _generate(self) -> None:
    cohort_cfg = self.experiment.cohort
    cohort = generate_cohort(cohort_cfg.template, cohort_cfg.n_patients, cohort_cfg.spread, cohort_cfg.seed)
    ids = patient_ids(len(cohort))
    scenarios = {split: generate_scenario(self.experiment.protocols[split]) for split in DATA_SPLITS}
    self._require(self.exporter.export_cohort(ids, cohort, str(self.files.cohort_path()), self.config_hash),
                  'generate', 'cohort.json')
    for pid, patient in zip(ids, cohort):
      self._require(self.exporter.export_patient(pid, patient, str(self.files.patient_path(pid)),
                                                 self.config_hash), 'generate', pid)
      for split, scenario in scenarios.items():
        self._require(self.exporter.export_scenario(scenario, str(self.files.patient_dir(pid)), split,
                                                    self.config_hash), 'generate', f'{pid}/{split}')

  def _simulate(self) -> None:
    for pid in self._patients('simulate'):
      patient_file = self.files.patient_path(pid)
      scenario_files = [self.files.scenario_path(pid, split) for split in DATA_SPLITS]
      self._check('simulate', [patient_file] + scenario_files)
      patient = self.files.read_patient(str(patient_file))
      for offset, split in enumerate(DATA_SPLITS):
        inputs = self.files.read_inputs(str(self.files.scenario_path(pid, split)))
        scenario = Scenario(inputs=inputs, meal_log=[], bolus_log=[])
        # 各划分的CGM噪声使用独立种子
        trace = simulate_patient(replace(patient, seed=patient.seed + offset), scenario)
        self._require(self.exporter.export_trace(trace, str(self.files.trace_path(pid, split)),
                                                 self.config_hash), 'simulate', f'{pid}/{split}')

  def _fit_linear(self) -> None:
    for pid in self._patients('fit-linear'):
      self._check('fit-linear', [self.files.scenario_path(pid, 'train'), self.files.trace_path(pid, 'train')])
      params = fit_patient(self.files, self.files.patient_dir(pid), self.experiment.rls_ridge)
      self._require(self.exporter.export_model_params(params, str(self.files.linear_path(pid)),
                                                      self.config_hash, extra={'patient_id': pid}),
                    'fit-linear', pid)

  def _train(self) -> None:
    config = self.experiment.train
    for pid in self._patients('train'):
      self._check('train', [self.files.linear_path(pid)]
                  + [self.files.trace_path(pid, s) for s in ('train', 'validation')])
      p = self.files.read_model_params(str(self.files.linear_path(pid)))
      variants = [('', config)]
      if self.experiment.ablation_without_biological:
        variants.append((ABLATION_VARIANT, replace(config, weights=replace(config.weights, alpha_B=0.0))))
      for variant, variant_config in variants:
        self.logger.info(f"训练 {pid} {variant or '(主模型)'}")
        checkpoint, history = train_patient(self.files, self.files.patient_dir(pid), p, variant_config,
                                            self.config_hash)
        self._require(self.exporter.export_checkpoint(checkpoint, str(self.files.checkpoint_path(pid, variant))),
                      'train', f'{pid} 检查点')
        self._require(self.exporter.export_history(history, str(self.files.history_path(pid, variant)),
                                                   self.config_hash), 'train', f'{pid} 训练历史')

  def _evaluate(self) -> None:
    self.report = evaluate_artifacts(self.files, self.exporter, self.config_hash, self.force,
                                     self.experiment.ablation_without_biological)


def run_pipeline(config: ExperimentConfig, stage: Optional[str] = None, force: bool = False) -> Optional[EvalReport]:
  """执行实验流水线（见 Pipeline.run）"""
  return Pipeline(config, force=force).run(stage)
