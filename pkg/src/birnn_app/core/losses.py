#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
增广损失模块
标准化器、训练序列 (Episode)、数据损失、生物损失、辅助损失及其
通过沿时间反向传播得到的精确梯度。

所有损失在标准化单位下计算；生物损失与非负损失先把网络输出还原为物理单位，
再按状态通道的标准差逐分量归一化。
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Self

from ..utils.constants import (DEFAULT_LOSS_WEIGHTS, DEFAULT_SUBSET_FRACTION, STANDARDIZER_CHANNELS,
                               STD_FLOOR)
from ..utils.errors import LossConfigError, NonFiniteGradientError, ShapeMismatchError
from .compartmental import LinearModel, ModelParams, build_linear_model, equilibrium_state, state_trajectory
from .gru import GruParams, backward, forward, rollout

logger = logging.getLogger(__name__)

Subsets = List[np.ndarray]


@dataclass
class Standardizer:
  """逐通道均值/标准差，通道顺序 (u, r, y1, y2, y3, y4, y5)"""

  mean: np.ndarray
  std: np.ndarray

  @classmethod
  def fit(cls, episodes: Sequence['Episode']) -> Self:
    """
    在训练序列的全部时间步上汇总估计（总体标准差）

    Raises:
        LossConfigError: 没有训练数据
    """
    if not episodes:
      raise LossConfigError("无法在空序列列表上拟合标准化器")
    stacked = np.vstack([e.channels() for e in episodes])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    floored = std < STD_FLOOR
    if np.any(floored):
      names = [STANDARDIZER_CHANNELS[i] for i in np.flatnonzero(floored)]
      logger.warning(f"通道 {names} 近似恒定，标准差下限取 {STD_FLOOR:g}")
      std = np.where(floored, STD_FLOOR, std)
    logger.info(f"标准化器拟合完成: {stacked.shape[0]} 个时间步")
    return cls(mean=mean, std=std)

  @property
  def input_mean(self) -> np.ndarray:
    return self.mean[:2]

  @property
  def input_std(self) -> np.ndarray:
    return self.std[:2]

  @property
  def y_mean(self) -> np.ndarray:
    return self.mean[2:]

  @property
  def y_std(self) -> np.ndarray:
    return self.std[2:]

  def apply(self, data: np.ndarray) -> np.ndarray:
    return (np.asarray(data, dtype=np.float64) - self.mean) / self.std

  def invert(self, data: np.ndarray) -> np.ndarray:
    return np.asarray(data, dtype=np.float64) * self.std + self.mean

  def standardize_inputs(self, inputs: np.ndarray) -> np.ndarray:
    return (np.asarray(inputs, dtype=np.float64) - self.input_mean) / self.input_std

  def standardize_states(self, states: np.ndarray) -> np.ndarray:
    return (np.asarray(states, dtype=np.float64) - self.y_mean) / self.y_std

  def destandardize_states(self, outputs: np.ndarray) -> np.ndarray:
    return np.asarray(outputs, dtype=np.float64) * self.y_std + self.y_mean

  def to_dict(self) -> Dict[str, Any]:
    return {'channels': list(STANDARDIZER_CHANNELS), 'mean': self.mean.tolist(), 'std': self.std.tolist()}

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    mean = np.asarray(data['mean'], dtype=np.float64)
    std = np.asarray(data['std'], dtype=np.float64)
    if mean.shape != (7,) or std.shape != (7,) or np.any(std <= 0.0):
      raise ShapeMismatchError("标准化器需要7个通道且标准差为正")
    return cls(mean=mean, std=std)


@dataclass
class Episode:
  """一段训练/验证/测试序列"""

  inputs: np.ndarray         # (N, 2) 物理单位
  glucose_meas: np.ndarray   # (N,)   mg/dL
  aux_states: np.ndarray     # (N, 4) 辨识线性模型给出的 y2..y5
  y0_ref: np.ndarray         # (5,)   平衡状态
  true_states: Optional[np.ndarray] = None

  def __post_init__(self):
    n = np.asarray(self.inputs).shape[0]
    if (np.asarray(self.inputs).shape != (n, 2) or np.asarray(self.glucose_meas).shape != (n,)
            or np.asarray(self.aux_states).shape != (n, 4)
            or np.asarray(self.y0_ref).shape != (5,)):
      raise ShapeMismatchError("Episode 各序列长度或维度不一致")
    if self.true_states is not None and np.asarray(self.true_states).shape != (n, 5):
      raise ShapeMismatchError("true_states 形状应为 (N, 5)")

  @property
  def n_steps(self) -> int:
    return int(self.inputs.shape[0])

  def channels(self) -> np.ndarray:
    """(N, 7) 的标准化通道矩阵：u, r, 实测 y1, 辅助 y2..y5"""
    return np.column_stack([self.inputs, self.glucose_meas, self.aux_states])


def build_episode(inputs: np.ndarray, glucose_meas: np.ndarray, params: ModelParams,
                  true_states: Optional[np.ndarray] = None) -> Episode:
  """用辨识得到的线性模型在相同输入上仿真，生成辅助状态 y2..y5"""
  inputs = np.asarray(inputs, dtype=np.float64)
  y0 = equilibrium_state(params)
  states = state_trajectory(build_linear_model(params), y0, inputs)
  return Episode(inputs=inputs, glucose_meas=np.asarray(glucose_meas, dtype=np.float64),
                 aux_states=states[:, 1:].copy(), y0_ref=y0, true_states=true_states)


@dataclass(frozen=True)
class LossWeights:
  """增广损失权重 α_D, α_B, α_A 与子集比例 ξ"""

  alpha_D: float = DEFAULT_LOSS_WEIGHTS[0]
  alpha_B: float = DEFAULT_LOSS_WEIGHTS[1]
  alpha_A: float = DEFAULT_LOSS_WEIGHTS[2]
  xi: float = DEFAULT_SUBSET_FRACTION

  def validate(self) -> None:
    """
    Raises:
        LossConfigError: 权重为负、全为零、ξ 越界，或 ξ = 0 而 α_A > 0
    """
    alphas = (self.alpha_D, self.alpha_B, self.alpha_A)
    if min(alphas) < 0.0 or not all(math.isfinite(a) for a in alphas):
      raise LossConfigError(f"损失权重必须为非负有限值: {alphas}")
    if max(alphas) == 0.0:
      raise LossConfigError("至少一个损失权重必须为正")
    if not 0.0 <= self.xi <= 1.0:
      raise LossConfigError(f"ξ 必须位于 [0, 1], 实际为 {self.xi}")
    if self.xi == 0.0 and self.alpha_A > 0.0:
      raise LossConfigError("ξ = 0 时随机子集为空，辅助损失无定义")

  def as_tuple(self) -> Tuple[float, float, float]:
    return (self.alpha_D, self.alpha_B, self.alpha_A)


def subset_size(n_steps: int, xi: float) -> int:
  """⌈ξN⌉"""
  return min(n_steps, int(math.ceil(xi * n_steps)))


def draw_subsets(episodes: Sequence[Episode], xi: float, rng: np.random.Generator) -> Subsets:
  """
  为每个序列无放回抽取 ⌈ξN⌉ 个时间下标

  Raises:
      LossConfigError: ξ 不在 (0, 1]
  """
  if not 0.0 < xi <= 1.0:
    raise LossConfigError(f"ξ = {xi} 时子集为空")
  subsets = []
  for episode in episodes:
    n = episode.n_steps
    subsets.append(np.sort(rng.choice(n, size=subset_size(n, xi), replace=False)))
  return subsets


def data_term(outputs: np.ndarray, episode: Episode, std: Standardizer) -> Tuple[float, np.ndarray]:
  """单序列数据损失：标准化血糖的均方误差"""
  target = (episode.glucose_meas - std.y_mean[0]) / std.y_std[0]
  residual = outputs[:, 0] - target
  n = outputs.shape[0]
  grad = np.zeros_like(outputs)
  grad[:, 0] = 2.0 * residual / n
  return float(np.sum(residual * residual) / n), grad


def biological_term(outputs: np.ndarray, episode: Episode, std: Standardizer,
                    model: LinearModel) -> Tuple[float, np.ndarray]:
  """
  单序列生物损失

  (1/N)·Σ_{k=0}^{N−2} ‖(A_d·ŷ_k + B_d·u_k + E_d − ŷ_{k+1}) / σ_y‖²，ŷ 为物理单位
  """
  n = outputs.shape[0]
  if n < 2:
    raise LossConfigError(f"生物损失需要至少2个时间步, 实际为 {n}")
  physical = std.destandardize_states(outputs)
  residual = (physical[:-1] @ model.A_d.T + episode.inputs[:-1] @ model.B_d.T + model.E_d
              - physical[1:])
  normalized = residual / std.y_std
  weight = 2.0 * normalized / std.y_std / n
  d_physical = np.zeros_like(outputs)
  d_physical[:-1] += weight @ model.A_d
  d_physical[1:] -= weight
  return float(np.sum(normalized * normalized) / n), d_physical * std.y_std


def state_term(outputs: np.ndarray, episode: Episode, std: Standardizer,
               subset: np.ndarray) -> Tuple[float, np.ndarray]:
  """状态损失：子集上 ‖y_ψ − ŷ_ψ‖²/|Ñ|（标准化单位）"""
  m = subset.shape[0]
  target = (episode.aux_states[subset] - std.y_mean[1:]) / std.y_std[1:]
  diff = outputs[subset, 1:] - target
  grad = np.zeros_like(outputs)
  grad[subset, 1:] = 2.0 * diff / m
  return float(np.sum(diff * diff) / m), grad


def zero_term(outputs: np.ndarray, std: Standardizer, y0: np.ndarray) -> Tuple[float, np.ndarray]:
  """初值损失：‖y_0(p) − ŷ_0‖²（标准化单位）"""
  diff = outputs[0] - std.standardize_states(y0)
  grad = np.zeros_like(outputs)
  grad[0] = 2.0 * diff
  return float(np.sum(diff * diff)), grad


def positivity_term(outputs: np.ndarray, std: Standardizer, subset: np.ndarray) -> Tuple[float, np.ndarray]:
  """非负损失：子集上 ‖max(0, −ŷ_ψ)/σ_ψ‖²/|Ñ|，ŷ_ψ 为物理单位"""
  m = subset.shape[0]
  # 物理值除以 σ_ψ 等于标准化输出加 μ_ψ/σ_ψ
  shifted = outputs[subset, 1:] + std.y_mean[1:] / std.y_std[1:]
  violation = np.maximum(0.0, -shifted)
  grad = np.zeros_like(outputs)
  grad[subset, 1:] = -2.0 * violation / m
  return float(np.sum(violation * violation) / m), grad


def _check_episodes(episodes: Sequence[Episode]) -> None:
  if not episodes:
    raise LossConfigError("序列列表为空")


def _check_finite(grad: GruParams) -> None:
  for name, value in grad.items():
    if not np.all(np.isfinite(value)):
      raise NonFiniteGradientError(name)


def _resolve_subsets(episodes: Sequence[Episode], xi: float, rng: Optional[np.random.Generator],
                     subsets: Optional[Subsets]) -> Subsets:
  if subsets is not None:
    if len(subsets) != len(episodes):
      raise LossConfigError(f"子集数 {len(subsets)} 与序列数 {len(episodes)} 不一致")
    return [np.asarray(s, dtype=np.int64) for s in subsets]
  if rng is None:
    raise LossConfigError("辅助损失需要随机数发生器或预先抽取的子集")
  return draw_subsets(episodes, xi, rng)


def _evaluate(params: GruParams, p: ModelParams, episodes: Sequence[Episode], std: Standardizer,
              weights: LossWeights, subsets: Optional[Subsets],
              with_gradient: bool) -> Tuple[float, List[float], Optional[GruParams]]:
  _check_episodes(episodes)
  n_episodes = len(episodes)
  short = any(e.n_steps < 2 for e in episodes)
  if short and weights.alpha_B > 0.0:
    raise LossConfigError("生物损失需要每个序列至少2个时间步")
  model = build_linear_model(p)
  y0 = equilibrium_state(p)

  sums = np.zeros(3)
  grad = params.zeros_like() if with_gradient else None
  for index, episode in enumerate(episodes):
    if with_gradient:
      outputs, cache = forward(params, std.standardize_inputs(episode.inputs))
    else:
      outputs = rollout(params, std.standardize_inputs(episode.inputs))
    d_outputs = np.zeros_like(outputs)

    value, d_data = data_term(outputs, episode, std)
    sums[0] += value
    d_outputs += weights.alpha_D * d_data

    if not short:
      value, d_bio = biological_term(outputs, episode, std, model)
      sums[1] += value
      d_outputs += weights.alpha_B * d_bio

    if subsets is not None:
      subset = subsets[index]
      l_s, d_s = state_term(outputs, episode, std, subset)
      l_0, d_0 = zero_term(outputs, std, y0)
      l_p, d_p = positivity_term(outputs, std, subset)
      sums[2] += (l_s + l_0 + l_p) / 3.0
      d_outputs += weights.alpha_A * (d_s + d_0 + d_p) / 3.0

    if with_gradient:
      episode_grad = backward(params, cache, d_outputs / n_episodes)
      for name, value in episode_grad.items():
        setattr(grad, name, getattr(grad, name) + value)

  components = sums / n_episodes
  if short:
    components[1] = np.nan
  if subsets is None:
    components[2] = np.nan
  total = sum(a * c for a, c in zip(weights.as_tuple(), components) if a > 0.0)
  if with_gradient:
    _check_finite(grad)
  return float(total), [float(c) for c in components], grad


def _subsets_for(weights: LossWeights, episodes: Sequence[Episode], rng: Optional[np.random.Generator],
                 subsets: Optional[Subsets]) -> Optional[Subsets]:
  if weights.xi == 0.0 or (weights.alpha_A == 0.0 and subsets is None and rng is None):
    return None
  return _resolve_subsets(episodes, weights.xi, rng, subsets)


def data_loss(params: GruParams, episodes: Sequence[Episode], std: Standardizer) -> float:
  """
  数据损失 L_D：各序列标准化血糖均方误差的序列平均

  Raises:
      LossConfigError: 序列列表为空
  """
  _check_episodes(episodes)
  values = [data_term(rollout(params, std.standardize_inputs(e.inputs)), e, std)[0] for e in episodes]
  return float(np.mean(values))


def biological_loss(params: GruParams, p: ModelParams, episodes: Sequence[Episode],
                    std: Standardizer) -> float:
  """
  生物损失 L_B

  Raises:
      LossConfigError: 序列列表为空或存在少于2步的序列
  """
  _check_episodes(episodes)
  model = build_linear_model(p)
  values = [biological_term(rollout(params, std.standardize_inputs(e.inputs)), e, std, model)[0]
            for e in episodes]
  return float(np.mean(values))


def auxiliary_components(params: GruParams, p: ModelParams, episodes: Sequence[Episode],
                         std: Standardizer, xi: float, rng: Optional[np.random.Generator] = None,
                         subsets: Optional[Subsets] = None) -> Tuple[float, float, float]:
  """辅助损失的三个分量 (ℓS, ℓ0, ℓ+)，各自做序列平均"""
  _check_episodes(episodes)
  if xi == 0.0:
    raise LossConfigError("ξ = 0 时随机子集为空，辅助损失无定义")
  subsets = _resolve_subsets(episodes, xi, rng, subsets)
  y0 = equilibrium_state(p)
  sums = np.zeros(3)
  for episode, subset in zip(episodes, subsets):
    outputs = rollout(params, std.standardize_inputs(episode.inputs))
    sums += (state_term(outputs, episode, std, subset)[0],
             zero_term(outputs, std, y0)[0],
             positivity_term(outputs, std, subset)[0])
  l_s, l_0, l_p = sums / len(episodes)
  return float(l_s), float(l_0), float(l_p)


def auxiliary_loss(params: GruParams, p: ModelParams, episodes: Sequence[Episode], std: Standardizer,
                   xi: float, rng: Optional[np.random.Generator] = None,
                   subsets: Optional[Subsets] = None) -> float:
  """
  辅助损失 L_A = mean_e (ℓS + ℓ0 + ℓ+)/3

  Args:
      xi: 子集比例
      rng: 抽取子集用的随机数发生器（每次调用重新抽取）
      subsets: 预先抽取的子集，给出时忽略 rng

  Raises:
      LossConfigError: ξ = 0 或序列列表为空
  """
  return float(sum(auxiliary_components(params, p, episodes, std, xi, rng, subsets)) / 3.0)


def augmented_loss(params: GruParams, p: ModelParams, episodes: Sequence[Episode], std: Standardizer,
                   weights: LossWeights, rng: Optional[np.random.Generator] = None,
                   subsets: Optional[Subsets] = None) -> Tuple[float, List[float]]:
  """
  增广损失 α_D·L_D + α_B·L_B + α_A·L_A

  Returns:
      (总损失, [L_D, L_B, L_A])；无法计算的分量记为 NaN
  """
  weights.validate()
  total, components, _ = _evaluate(params, p, episodes, std, weights,
                                   _subsets_for(weights, episodes, rng, subsets), with_gradient=False)
  return total, components


def value_and_gradient(params: GruParams, p: ModelParams, episodes: Sequence[Episode],
                       std: Standardizer, weights: LossWeights,
                       rng: Optional[np.random.Generator] = None,
                       subsets: Optional[Subsets] = None) -> Tuple[float, List[float], GruParams]:
  """
  增广损失及其对 θ 的精确梯度（同一次子集抽样）

  Returns:
      (总损失, [L_D, L_B, L_A], 梯度)

  Raises:
      LossConfigError: 权重或序列无效
      NonFiniteGradientError: 梯度出现非有限值
  """
  weights.validate()
  total, components, grad = _evaluate(params, p, episodes, std, weights,
                                      _subsets_for(weights, episodes, rng, subsets), with_gradient=True)
  return total, components, grad


def gradient(params: GruParams, p: ModelParams, episodes: Sequence[Episode], std: Standardizer,
             weights: LossWeights, rng: Optional[np.random.Generator] = None,
             subsets: Optional[Subsets] = None) -> GruParams:
  """增广损失的梯度"""
  return value_and_gradient(params, p, episodes, std, weights, rng, subsets)[2]
