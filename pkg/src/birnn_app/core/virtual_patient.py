#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
虚拟患者模块
替代商业仿真器的非线性时变地面真值生成器：
在房室模型基础上加入胰岛素敏感性的昼夜正弦调制、胰岛素作用饱和项
以及可选的CGM高斯噪声。
"""

import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, List

import numpy as np
from typing_extensions import Self

from ..utils.constants import BLOWUP_THRESHOLD, MINUTES_PER_DAY, NOMINAL_PARAMS, SAMPLING_TIME_MIN
from ..utils.errors import UnstableConfigurationError
from ..utils.helpers import make_rng
from .compartmental import ModelParams, build_linear_model
from .scenario import Scenario

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VirtualPatientConfig:
  """虚拟患者配置"""

  base_params: ModelParams
  circadian_amplitude: float = 0.0
  circadian_phase_min: float = 0.0
  nonlinearity_gain: float = 0.0
  cgm_noise_std_mgdl: float = 0.0
  seed: int = 0

  def validate(self) -> None:
    self.base_params.validate()
    if not 0.0 <= self.circadian_amplitude < 1.0:
      raise ValueError(f"circadian_amplitude 必须位于 [0, 1), 实际为 {self.circadian_amplitude}")
    if self.cgm_noise_std_mgdl < 0.0 or self.nonlinearity_gain < 0.0:
      raise ValueError("噪声标准差与饱和增益不能为负")
    if self.nonlinearity_gain > 0.0 and self.base_params.U_b <= 0.0:
      raise ValueError("启用饱和项时 U_b 必须为正")

  def effective_p2(self, minutes: np.ndarray) -> np.ndarray:
    """p2(t) = p2·(1 + a·sin(2π(t mod 1440 − φ)/1440))"""
    phase = (np.mod(minutes, MINUTES_PER_DAY) - self.circadian_phase_min) / MINUTES_PER_DAY
    return self.base_params.p2 * (1.0 + self.circadian_amplitude * np.sin(2.0 * math.pi * phase))

  def to_dict(self) -> Dict[str, Any]:
    data = asdict(self)
    data['base_params'] = self.base_params.to_dict()
    return data

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    values = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
    values['base_params'] = ModelParams.from_dict(data['base_params'])
    return cls(**values)


@dataclass
class GroundTruthTrace:
  """地面真值轨迹：真实状态 y_0..y_{N−1}、实测血糖与有效 p2"""

  states: np.ndarray
  measured_glucose: np.ndarray
  p2_eff: np.ndarray

  @property
  def n_minutes(self) -> int:
    return int(self.states.shape[0])


def fasting_state(config: VirtualPatientConfig, p2_start: float) -> np.ndarray:
  """患者自身的空腹稳态（退化配置下等于线性模型平衡点）"""
  p = config.base_params
  drain = p2_start * p.U_b / (1.0 + config.nonlinearity_gain)
  glucose = p.G_b + (p.p2 * p.U_b - drain) / p.p1
  return np.array([max(glucose, 0.0), p.U_b, p.U_b, 0.0, 0.0], dtype=np.float64)


def simulate_patient(config: VirtualPatientConfig, scenario: Scenario) -> GroundTruthTrace:
  """
  在场景输入上仿真虚拟患者

  血糖方程中的 −p2·y2 被替换为 −p2(t)·y2/(1 + g·y2/U_b)，其余与离散房室模型一致；
  血糖下限钳制在 0。

  Args:
      config: 患者配置
      scenario: 输入场景

  Returns:
      GroundTruthTrace

  Raises:
      UnstableConfigurationError: 任一状态绝对值超过 1e6
  """
  config.validate()
  p = config.base_params
  T = SAMPLING_TIME_MIN
  model = build_linear_model(p, T)
  inputs = np.asarray(scenario.inputs, dtype=np.float64)
  n_minutes = inputs.shape[0]

  minutes = np.arange(n_minutes, dtype=np.float64) * T
  p2_eff = config.effective_p2(minutes)
  gain = config.nonlinearity_gain
  inv_basal = 1.0 / p.U_b if gain > 0.0 else 0.0

  states = np.empty((n_minutes, 5), dtype=np.float64)
  y = fasting_state(config, float(p2_eff[0]))
  for k in range(n_minutes):
    states[k] = y
    y2 = y[1]
    y_next = model.step(y, inputs[k])
    # 用饱和、时变的胰岛素作用替换线性作用项
    y_next[0] += T * (p.p2 * y2 - p2_eff[k] * y2 / (1.0 + gain * y2 * inv_basal))
    if y_next[0] < 0.0:
      y_next[0] = 0.0
    if not np.all(np.abs(y_next) <= BLOWUP_THRESHOLD):
      raise UnstableConfigurationError(f"第 {k + 1} 分钟状态发散: {y_next}")
    y = y_next

  measured = states[:, 0].copy()
  if config.cgm_noise_std_mgdl > 0.0:
    rng = make_rng(config.seed, stream=1)
    measured += rng.normal(0.0, config.cgm_noise_std_mgdl, size=n_minutes)

  logger.info(f"虚拟患者仿真完成: {n_minutes} 分钟, 血糖范围 "
              f"[{states[:, 0].min():.1f}, {states[:, 0].max():.1f}] mg/dL")
  return GroundTruthTrace(states=states, measured_glucose=measured, p2_eff=p2_eff)


def nominal_params() -> ModelParams:
  """名义生理参数（p0 由基础一致性推出）"""
  n = NOMINAL_PARAMS
  return ModelParams.from_basal(n['p1'], n['p2'], n['p3'], n['p4'], n['p5'], n['G_b'], n['U_b'])


def generate_cohort(template: VirtualPatientConfig, n_patients: int = 10, spread: float = 0.2,
                    seed: int = 0) -> List[VirtualPatientConfig]:
  """
  生成虚拟患者队列

  p1..p5 与 G_b 在模板值附近做 ±spread 的均匀乘性扰动，U_b 保持一致
  （整个队列使用相同输入），p0 由基础一致性重新推出。

  Args:
      template: 队列中心配置
      n_patients: 患者数
      spread: 相对扰动幅度
      seed: 队列种子

  Returns:
      患者配置列表
  """
  if n_patients < 1 or not 0.0 <= spread < 1.0:
    raise ValueError(f"队列参数无效: n_patients={n_patients}, spread={spread}")
  rng = make_rng(seed, stream=2)
  base = template.base_params
  cohort = []
  for i in range(n_patients):
    f = rng.uniform(1.0 - spread, 1.0 + spread, size=6)
    params = ModelParams.from_basal(
        base.p1 * f[0], base.p2 * f[1], base.p3 * f[2], base.p4 * f[3], base.p5 * f[4],
        base.G_b * f[5], base.U_b)
    patient_seed = int(rng.integers(0, 2**31 - 1))
    cohort.append(VirtualPatientConfig(
        base_params=params,
        circadian_amplitude=template.circadian_amplitude,
        circadian_phase_min=template.circadian_phase_min,
        nonlinearity_gain=template.nonlinearity_gain,
        cgm_noise_std_mgdl=template.cgm_noise_std_mgdl,
        seed=patient_seed,
    ))
  logger.info(f"生成虚拟患者队列: {n_patients} 人, 扰动 ±{spread:.0%}, seed={seed}")
  return cohort
