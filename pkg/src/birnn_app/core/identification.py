#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
线性模型参数辨识模块
以正则化最小二乘 (RLS) 拟合离散房室模型的一步血糖预测误差
"""

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import lfilter

from ..utils.constants import NOMINAL_PARAMS, SAMPLING_TIME_MIN
from ..utils.errors import ConvergenceError, DegenerateDataError
from .compartmental import ModelParams

logger = logging.getLogger(__name__)

# p1..p5 的箱约束
LOWER_BOUNDS = np.array([1e-6, 1e-6, 1e-6, 2.0, 2.0])
UPPER_BOUNDS = np.array([1.0, 1e3, 1e2, 1e3, 1e3])
PARAM_NAMES = ('p1', 'p2', 'p3', 'p4', 'p5')


class MeasuredData(Protocol):
  """辨识所需的数据：输入 (N, 2) 与实测血糖 (N,)"""

  inputs: np.ndarray
  glucose_meas: np.ndarray


@dataclass
class MeasuredSeries:
  inputs: np.ndarray
  glucose_meas: np.ndarray


def compartment_chain(x: np.ndarray, tau: float, T: float, x0: float) -> Tuple[np.ndarray, np.ndarray]:
  """
  二级房室链的欧拉离散响应

  s_{k+1} = (1 − T/τ)·s_k + (T/τ)·x_k,  q_{k+1} = (1 − T/τ)·q_k + (T/τ)·s_k

  Args:
      x: 输入序列
      tau: 时间常数
      T: 采样时间
      x0: 两个房室的初值

  Returns:
      (q, s) 与输入对齐的序列（第k个元素为施加 x_k 之前的值）
  """
  a = 1.0 - T / tau
  b = T / tau
  upstream = lfilter([b], [1.0, -a], x, zi=[a * x0])[0]
  s = np.concatenate(([x0], upstream[:-1]))
  downstream = lfilter([b], [1.0, -a], s, zi=[a * x0])[0]
  q = np.concatenate(([x0], downstream[:-1]))
  return q, s


def fasting_basal_pair(episodes: Sequence[MeasuredData]) -> Tuple[float, float]:
  """
  从首餐之前的空腹段估计 (G_b, U_b)

  Raises:
      DegenerateDataError: 没有任何空腹样本
  """
  glucose, insulin = [], []
  for episode in episodes:
    carbs = np.asarray(episode.inputs)[:, 1]
    meal_idx = np.flatnonzero(carbs > 0.0)
    end = int(meal_idx[0]) if meal_idx.size else carbs.shape[0]
    if end > 0:
      glucose.append(np.asarray(episode.glucose_meas)[:end])
      insulin.append(np.asarray(episode.inputs)[:end, 0])
  if not glucose:
    raise DegenerateDataError("序列开头没有空腹段")
  return float(np.mean(np.concatenate(glucose))), float(np.mean(np.concatenate(insulin)))


def _one_step_residuals(theta: np.ndarray, episodes: Sequence[MeasuredData], G_b: float,
                        U_b: float, T: float) -> np.ndarray:
  p1, p2, p3, p4, p5 = theta
  p0 = p1 * G_b + p2 * U_b
  residuals = []
  for episode in episodes:
    inputs = np.asarray(episode.inputs, dtype=np.float64)
    glucose = np.asarray(episode.glucose_meas, dtype=np.float64)
    y2, _ = compartment_chain(inputs[:, 0], p4, T, U_b)
    y4, _ = compartment_chain(inputs[:, 1], p5, T, 0.0)
    predicted = (1.0 - T * p1) * glucose[:-1] - T * p2 * y2[:-1] + T * p3 * y4[:-1] + T * p0
    residuals.append(glucose[1:] - predicted)
  return np.concatenate(residuals)


def fit_rls(episodes: Sequence[MeasuredData], T: float = SAMPLING_TIME_MIN, ridge: float = 0.0,
            initial: Optional[ModelParams] = None, max_nfev: int = 2000) -> ModelParams:
  """
  正则化最小二乘辨识

  目标: mean(一步血糖预测残差²) + ridge·Σ((θ − θ0)/θ0)²，θ = (p1..p5)，
  θ0 为初值；箱约束保证 p1..p5 为正，p0 由空腹基础对推出。

  Args:
      episodes: 训练序列
      T: 采样时间
      ridge: 正则化权重 (≥ 0)
      initial: 初值与正则中心，None 使用名义参数
      max_nfev: 函数评估上限

  Returns:
      辨识得到的 ModelParams

  Raises:
      DegenerateDataError: 空序列列表或输入恒定
      ConvergenceError: 达到迭代上限仍未收敛
  """
  if ridge < 0.0:
    raise ValueError(f"ridge 不能为负: {ridge}")
  episodes = [e for e in episodes if np.asarray(e.glucose_meas).shape[0] >= 2]
  if not episodes:
    raise DegenerateDataError("没有可用于辨识的序列")

  stacked = np.vstack([np.asarray(e.inputs, dtype=np.float64) for e in episodes])
  if np.all(np.ptp(stacked, axis=0) == 0.0):
    raise DegenerateDataError("所有序列的输入恒定，参数不可辨识")

  G_b, U_b = fasting_basal_pair(episodes)
  if initial is None:
    theta0 = np.array([NOMINAL_PARAMS[name] for name in PARAM_NAMES])
  else:
    theta0 = np.array([getattr(initial, name) for name in PARAM_NAMES])
  theta0 = np.clip(theta0, LOWER_BOUNDS, UPPER_BOUNDS)

  n_samples = sum(np.asarray(e.glucose_meas).shape[0] - 1 for e in episodes)
  data_scale = 1.0 / np.sqrt(n_samples)
  ridge_scale = np.sqrt(ridge)

  def residuals(theta: np.ndarray) -> np.ndarray:
    data = _one_step_residuals(theta, episodes, G_b, U_b, T) * data_scale
    if ridge == 0.0:
      return data
    return np.concatenate([data, ridge_scale * (theta - theta0) / theta0])

  result = least_squares(
      residuals, theta0, jac='3-point', bounds=(LOWER_BOUNDS, UPPER_BOUNDS),
      x_scale='jac', ftol=1e-12, xtol=1e-12, gtol=1e-12, max_nfev=max_nfev
  )
  if result.status == 0:
    raise ConvergenceError(f"least_squares 在 {result.nfev} 次评估后停止: {result.message}")

  p1, p2, p3, p4, p5 = (float(v) for v in result.x)
  params = ModelParams.from_basal(p1, p2, p3, p4, p5, G_b, U_b)
  params.validate()
  logger.info(f"RLS辨识完成: cost={result.cost:.4e}, nfev={result.nfev}, "
              f"p=({', '.join(f'{v:.5g}' for v in result.x)}), G_b={G_b:.3f}, U_b={U_b:.5f}")
  return params
