#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
BI-RNN训练模块
全批量 Adam 优化、全局范数梯度裁剪与基于验证集的早停
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from typing_extensions import Self

from ..utils.constants import (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, CHECKPOINT_FORMAT,
                               DEFAULT_HIDDEN_UNITS, DEFAULT_LEARNING_RATE, DEFAULT_MAX_ITERATIONS,
                               DEFAULT_VALIDATION_INTERVAL, DEFAULT_VALIDATION_PATIENCE,
                               GRADIENT_CLIP_NORM, INIT_SCHEME)
from ..utils.errors import LossConfigError, NonFiniteGradientError, ShapeMismatchError
from ..utils.helpers import make_rng
from .compartmental import ModelParams
from .gru import GruParams, init_params
from .losses import Episode, LossWeights, Standardizer, data_loss, value_and_gradient

logger = logging.getLogger(__name__)

SUBSET_STREAM = 11


@dataclass(frozen=True)
class TrainConfig:
  """训练配置"""

  eta: float = DEFAULT_LEARNING_RATE
  kappa_max: int = DEFAULT_MAX_ITERATIONS
  kappa_val: int = DEFAULT_VALIDATION_INTERVAL
  rho_val: int = DEFAULT_VALIDATION_PATIENCE
  weights: LossWeights = field(default_factory=LossWeights)
  seed: int = 0
  n_hu: int = DEFAULT_HIDDEN_UNITS
  clip_norm: float = GRADIENT_CLIP_NORM

  def validate(self) -> None:
    """
    Raises:
        LossConfigError: 配置违反不变量
    """
    if not self.eta > 0.0:
      raise LossConfigError(f"学习率必须为正, 实际为 {self.eta}")
    if self.kappa_val < 1 or self.kappa_val > self.kappa_max:
      raise LossConfigError(f"需要 1 ≤ κ_val ≤ κ_max, 实际为 {self.kappa_val}, {self.kappa_max}")
    if self.rho_val < 1:
      raise LossConfigError(f"ρ_val 至少为1, 实际为 {self.rho_val}")
    if self.n_hu < 1 or not self.clip_norm > 0.0:
      raise LossConfigError("隐藏单元数与裁剪阈值必须为正")
    self.weights.validate()

  def to_dict(self) -> Dict[str, Any]:
    return asdict(self)

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    values = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
    if isinstance(values.get('weights'), dict):
      values['weights'] = LossWeights(**values['weights'])
    return cls(**values)


class Adam:
  """Adam 优化器，每个参数张量维护一阶/二阶矩"""

  def __init__(self, template: GruParams, eta: float, beta1: float = ADAM_BETA1,
               beta2: float = ADAM_BETA2, epsilon: float = ADAM_EPSILON):
    self.eta = eta
    self.beta1 = beta1
    self.beta2 = beta2
    self.epsilon = epsilon
    self.t = 0
    self.m = template.zeros_like()
    self.v = template.zeros_like()

  def step(self, params: GruParams, grad: GruParams) -> GruParams:
    self.t += 1
    correction1 = 1.0 - self.beta1 ** self.t
    correction2 = 1.0 - self.beta2 ** self.t
    updated = {}
    for name, g in grad.items():
      m = self.beta1 * getattr(self.m, name) + (1.0 - self.beta1) * g
      v = self.beta2 * getattr(self.v, name) + (1.0 - self.beta2) * g * g
      setattr(self.m, name, m)
      setattr(self.v, name, v)
      step = self.eta * (m / correction1) / (np.sqrt(v / correction2) + self.epsilon)
      updated[name] = getattr(params, name) - step
    return GruParams(**updated)


class EarlyStopping:
  """保存验证MSE严格下降时的参数，连续 patience 次未改进后停止"""

  def __init__(self, patience: int):
    self.patience = patience
    self.best_value = math.inf
    self.best_params: Optional[GruParams] = None
    self.best_iteration = 0
    self.failures = 0

  def update(self, value: float, params: GruParams, iteration: int) -> bool:
    if value < self.best_value:
      self.best_value = value
      self.best_params = params.copy()
      self.best_iteration = iteration
      self.failures = 0
      return True
    self.failures += 1
    return False

  @property
  def should_stop(self) -> bool:
    return self.failures >= self.patience


@dataclass
class TrainResult:
  """训练结果：最佳参数 θ*、逐迭代历史与所用标准化器"""

  best_params: GruParams
  history: List[Dict[str, Any]]
  standardizer: Standardizer
  best_iteration: int
  best_val_mse: float
  stop_reason: str


@dataclass
class Checkpoint:
  """训练产物：网络参数、标准化器、训练配置与所依赖的生理参数"""

  params: GruParams
  standardizer: Standardizer
  train_config: TrainConfig
  model_params: ModelParams
  best_iteration: int = 0
  config_hash: str = ''

  def to_dict(self) -> Dict[str, Any]:
    return {
        'format': CHECKPOINT_FORMAT,
        'config_hash': self.config_hash,
        'n_hu': self.params.n_hu,
        'seed': self.train_config.seed,
        'init_scheme': INIT_SCHEME,
        'best_iteration': self.best_iteration,
        'weights': self.params.to_dict(),
        'standardizer': self.standardizer.to_dict(),
        'train_config': self.train_config.to_dict(),
        'model_params': self.model_params.to_dict(),
    }

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    """
    Raises:
        ShapeMismatchError: 格式标记不符或权重形状错误
    """
    if data.get('format') != CHECKPOINT_FORMAT:
      raise ShapeMismatchError(f"未知的检查点格式: {data.get('format')}")
    params = GruParams.from_dict(data['weights'])
    if params.n_hu != int(data['n_hu']):
      raise ShapeMismatchError(f"n_hu={data['n_hu']} 与权重形状 {params.n_hu} 不一致")
    return cls(
        params=params,
        standardizer=Standardizer.from_dict(data['standardizer']),
        train_config=TrainConfig.from_dict(data['train_config']),
        model_params=ModelParams.from_dict(data['model_params']),
        best_iteration=int(data.get('best_iteration', 0)),
        config_hash=str(data.get('config_hash', '')),
    )


def validation_mse(params: GruParams, episodes: Sequence[Episode], std: Standardizer) -> float:
  """验证集上的标准化血糖均方误差"""
  return data_loss(params, episodes, std)


def _clip(grad: GruParams, max_norm: float):
  norm = grad.global_norm()
  if norm > max_norm:
    return grad.scale(max_norm / norm), norm, True
  return grad, norm, False


def train(config: TrainConfig, train_eps: Sequence[Episode], val_eps: Sequence[Episode],
          p: ModelParams, standardizer: Optional[Standardizer] = None) -> TrainResult:
  """
  训练 BI-RNN

  Args:
      config: 训练配置
      train_eps: 训练序列
      val_eps: 验证序列
      p: 辨识得到的生理参数（训练中保持不变）
      standardizer: 标准化器，None 时在训练序列上拟合

  Returns:
      TrainResult

  Raises:
      LossConfigError: 配置无效或训练/验证集为空
  """
  config.validate()
  if not train_eps or not val_eps:
    raise LossConfigError("训练集与验证集都不能为空")
  std = standardizer if standardizer is not None else Standardizer.fit(train_eps)
  weights = config.weights
  logger.info(f"生物损失与非负损失在物理单位下计算后按状态标准差归一化; "
              f"α = {weights.as_tuple()}, ξ = {weights.xi}")

  params = init_params(config.n_hu, config.seed)
  initial = params.copy()
  subset_rng = make_rng(config.seed, stream=SUBSET_STREAM)
  optimizer = Adam(params, config.eta)
  stopper = EarlyStopping(config.rho_val)
  history: List[Dict[str, Any]] = []
  stop_reason = 'max-iterations'

  for iteration in range(1, config.kappa_max + 1):
    try:
      loss, components, grad = value_and_gradient(params, p, train_eps, std, weights, rng=subset_rng)
    except NonFiniteGradientError as e:
      logger.error(f"第 {iteration} 次迭代梯度非有限 ({e.parameter})，终止训练")
      stop_reason = 'diverged'
      break
    if not math.isfinite(loss):
      logger.error(f"第 {iteration} 次迭代损失非有限，终止训练")
      stop_reason = 'diverged'
      break

    grad, norm, clipped = _clip(grad, config.clip_norm)
    if clipped:
      logger.debug(f"第 {iteration} 次迭代梯度范数 {norm:.3e} 被裁剪到 {config.clip_norm}")
    params = optimizer.step(params, grad)

    val = math.nan
    if iteration % config.kappa_val == 0:
      val = validation_mse(params, val_eps, std)
      if not math.isfinite(val):
        logger.error(f"第 {iteration} 次迭代验证MSE非有限，终止训练")
        stop_reason = 'diverged'
        break
      improved = stopper.update(val, params, iteration)
      logger.info(f"迭代 {iteration}: loss={loss:.6f}, 验证MSE={val:.6f}, "
                  f"改进={'是' if improved else '否'}, 未改进次数={stopper.failures}/{config.rho_val}")

    history.append({
        'iter': iteration, 'loss': loss,
        'L_D': components[0], 'L_B': components[1], 'L_A': components[2],
        'val_mse': val, 'clipped': int(clipped),
    })
    if stopper.should_stop:
      stop_reason = 'early-stopping'
      break

  if stopper.best_params is None:
    logger.warning("没有任何有效的验证检查，返回初始参数")
    best, best_val = initial, math.nan
  else:
    best, best_val = stopper.best_params, stopper.best_value
  logger.info(f"训练结束 ({stop_reason}): {len(history)} 次迭代, 最佳迭代 {stopper.best_iteration}, "
              f"最佳验证MSE {best_val:.6f}")
  return TrainResult(best_params=best, history=history, standardizer=std,
                     best_iteration=stopper.best_iteration, best_val_mse=best_val,
                     stop_reason=stop_reason)
