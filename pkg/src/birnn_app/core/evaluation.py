#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
评估模块
测试指标 (RMSE, GoF)、由预测状态重建 IOB/Ra，以及 BI-RNN 与线性模型在
整个队列上的对比报告
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..utils.constants import EVAL_TRACE_COLUMNS, GOF_DEGENERATE_THRESHOLD, SAMPLING_TIME_MIN
from ..utils.errors import DegenerateDataError, ShapeMismatchError
from ..utils.helpers import percentile
from .compartmental import ModelParams, build_linear_model, equilibrium_state, iob, ra, state_trajectory
from .gru import GruParams, rollout
from .losses import Episode, Standardizer, data_loss
from .trainer import Checkpoint

logger = logging.getLogger(__name__)

METRICS = ('rmse_birnn', 'rmse_linear', 'gof_birnn', 'gof_linear')


def _paired(y_meas, y_pred) -> Tuple[np.ndarray, np.ndarray]:
  y_meas = np.asarray(y_meas, dtype=np.float64).ravel()
  y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
  if y_meas.shape != y_pred.shape:
    raise ShapeMismatchError(f"长度不一致: {y_meas.shape} vs {y_pred.shape}")
  if y_meas.size == 0:
    raise DegenerateDataError("空序列无法计算指标")
  return y_meas, y_pred


def rmse(y_meas, y_pred) -> float:
  """均方根误差 [mg/dL]"""
  y_meas, y_pred = _paired(y_meas, y_pred)
  return float(np.sqrt(np.mean((y_meas - y_pred) ** 2)))


def gof_details(y_meas, y_pred) -> Tuple[float, int]:
  """
  拟合优度及被跳过的退化样本数

  (100/N)·Σ (1 − |y_k − ŷ_k| / |y_k − ȳ|)，ȳ 为实测均值；
  |y_k − ȳ| < 1e-9 的样本跳过并相应减小 N。

  Raises:
      DegenerateDataError: 全部样本退化
  """
  y_meas, y_pred = _paired(y_meas, y_pred)
  spread = np.abs(y_meas - y_meas.mean())
  counted = spread >= GOF_DEGENERATE_THRESHOLD
  skipped = int(np.count_nonzero(~counted))
  if not np.any(counted):
    raise DegenerateDataError("实测序列恒定，GoF 无定义")
  ratios = np.abs(y_meas[counted] - y_pred[counted]) / spread[counted]
  return float(100.0 * np.mean(1.0 - ratios)), skipped


def gof(y_meas, y_pred) -> float:
  """拟合优度 [%]"""
  return gof_details(y_meas, y_pred)[0]


def summarize(values: Sequence[float]) -> Dict[str, float]:
  """中位数与 25/75 百分位（线性插值）"""
  return {'median': percentile(values, 50), 'p25': percentile(values, 25), 'p75': percentile(values, 75)}


def predict_birnn(params: GruParams, std: Standardizer, inputs: np.ndarray) -> np.ndarray:
  """网络开环预测，返回物理单位状态 (N, 5)"""
  return std.destandardize_states(rollout(params, std.standardize_inputs(inputs)))


def predict_linear(p: ModelParams, inputs: np.ndarray) -> np.ndarray:
  """线性模型自平衡点开环仿真，返回与输入对齐的状态 (N, 5)"""
  return state_trajectory(build_linear_model(p), equilibrium_state(p), inputs)


def generalization_gap(params: GruParams, std: Standardizer, train_eps: Sequence[Episode],
                       test_eps: Sequence[Episode]) -> float:
  """泛化差距：测试MSE − 训练MSE（标准化血糖）"""
  return data_loss(params, test_eps, std) - data_loss(params, train_eps, std)


@dataclass
class PatientMetrics:
  """单个患者的测试指标"""

  patient_id: str
  rmse_birnn: float
  rmse_linear: float
  gof_birnn: float
  gof_linear: float
  gof_skipped: int = 0
  extra: Dict[str, float] = field(default_factory=dict)

  def to_dict(self) -> Dict[str, Any]:
    data = asdict(self)
    extra = data.pop('extra')
    data.update(extra)
    return data


@dataclass
class EvalReport:
  """队列对比报告"""

  patients: List[PatientMetrics]
  traces: Dict[str, pd.DataFrame] = field(default_factory=dict)

  @property
  def cohort(self) -> Dict[str, Dict[str, float]]:
    summary = {m: summarize([getattr(p, m) for p in self.patients]) for m in METRICS}
    extra_keys = sorted({k for p in self.patients for k in p.extra})
    for key in extra_keys:
      values = [p.extra[key] for p in self.patients if key in p.extra]
      summary[key] = summarize(values)
    return summary

  @property
  def birnn_wins(self) -> int:
    return sum(1 for p in self.patients if p.gof_birnn > p.gof_linear)

  def to_dict(self) -> Dict[str, Any]:
    return {
        'patients': [p.to_dict() for p in self.patients],
        'cohort': self.cohort,
        'percentile_method': 'linear',
        'birnn_wins': self.birnn_wins,
        'n_patients': len(self.patients),
    }


def evaluate_patient(checkpoint: Checkpoint, linear_fit: ModelParams, episode: Episode,
                     patient_id: str = 'patient_00',
                     true_params: Optional[ModelParams] = None) -> Tuple[PatientMetrics, pd.DataFrame]:
  """
  单个患者的开环对比

  Args:
      checkpoint: BI-RNN检查点
      linear_fit: RLS辨识的线性模型参数
      episode: 测试序列
      patient_id: 患者标识
      true_params: 真实生理参数，用于计算真实 IOB/Ra；None 时使用 linear_fit

  Returns:
      (指标, 轨迹表)
  """
  birnn_states = predict_birnn(checkpoint.params, checkpoint.standardizer, episode.inputs)
  linear_states = predict_linear(linear_fit, episode.inputs)
  measured = episode.glucose_meas
  gof_birnn, skipped = gof_details(measured, birnn_states[:, 0])
  gof_linear, _ = gof_details(measured, linear_states[:, 0])
  if skipped:
    logger.info(f"{patient_id}: GoF 跳过 {skipped} 个退化样本")
  metrics = PatientMetrics(
      patient_id=patient_id,
      rmse_birnn=rmse(measured, birnn_states[:, 0]),
      rmse_linear=rmse(measured, linear_states[:, 0]),
      gof_birnn=gof_birnn,
      gof_linear=gof_linear,
      gof_skipped=skipped,
  )

  true_states = episode.true_states
  truth_params = true_params if true_params is not None else linear_fit
  glucose_true = true_states[:, 0] if true_states is not None else measured
  n = episode.n_steps
  nan = np.full(n, np.nan)
  traces = pd.DataFrame({
      't_min': np.arange(n) * SAMPLING_TIME_MIN,
      'glucose_true': glucose_true,
      'glucose_birnn': birnn_states[:, 0],
      'glucose_linear': linear_states[:, 0],
      'iob_true': iob(true_states, truth_params) if true_states is not None else nan,
      'iob_birnn': iob(birnn_states, checkpoint.model_params),
      'iob_linear': iob(linear_states, linear_fit),
      'ra_true': ra(true_states, truth_params) if true_states is not None else nan,
      'ra_birnn': ra(birnn_states, checkpoint.model_params),
      'ra_linear': ra(linear_states, linear_fit),
  }, columns=EVAL_TRACE_COLUMNS)
  logger.info(f"{patient_id}: GoF BI-RNN {gof_birnn:.2f}% / 线性 {gof_linear:.2f}%, "
              f"RMSE {metrics.rmse_birnn:.2f} / {metrics.rmse_linear:.2f} mg/dL")
  return metrics, traces


def evaluate_cohort(ckpts: Sequence[Checkpoint], linear_fits: Sequence[ModelParams],
                    test_data: Sequence[Episode], patient_ids: Optional[Sequence[str]] = None,
                    true_params: Optional[Sequence[ModelParams]] = None) -> EvalReport:
  """
  队列评估

  Raises:
      ShapeMismatchError: 检查点、线性拟合与测试数据的患者数不一致
  """
  n = len(ckpts)
  if n == 0 or len(linear_fits) != n or len(test_data) != n:
    raise ShapeMismatchError(f"患者数不一致: 检查点 {n}, 线性拟合 {len(linear_fits)}, 测试数据 {len(test_data)}")
  if patient_ids is None:
    patient_ids = [f'patient_{i:02d}' for i in range(n)]
  if true_params is not None and len(true_params) != n:
    raise ShapeMismatchError("真实参数数量与患者数不一致")

  patients, traces = [], {}
  for i in range(n):
    truth = true_params[i] if true_params is not None else None
    metrics, trace = evaluate_patient(ckpts[i], linear_fits[i], test_data[i], patient_ids[i], truth)
    patients.append(metrics)
    traces[patient_ids[i]] = trace
  report = EvalReport(patients=patients, traces=traces)
  cohort = report.cohort
  logger.info(f"队列评估完成: BI-RNN 在 {report.birnn_wins}/{n} 名患者上 GoF 更高, "
              f"中位 GoF {cohort['gof_birnn']['median']:.2f}% vs {cohort['gof_linear']['median']:.2f}%")
  return report
