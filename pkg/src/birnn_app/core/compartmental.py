#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
房室模型核心模块
五状态线性血糖-胰岛素模型：连续矩阵、前向欧拉离散化、开环仿真、
平衡点以及胰岛素在体量 (IOB) 与葡萄糖出现率 (Ra) 的计算

状态 y = [y1 血糖 mg/dL, y2 y3 胰岛素房室 U/min, y4 y5 碳水房室 g/min]，
输入 u = [胰岛素 U, 碳水 g]，均为每个采样分钟内的量。
"""

import logging
from dataclasses import dataclass, asdict, field
from typing import Any, Dict

import numpy as np
from typing_extensions import Self

from ..utils.constants import BASAL_TOLERANCE, SAMPLING_TIME_MIN
from ..utils.errors import InvalidParamsError, ShapeMismatchError

logger = logging.getLogger(__name__)

N_STATES = 5
N_INPUTS = 2


@dataclass(frozen=True)
class ModelParams:
  """生理参数 p0..p5 与基础对 (G_b, U_b)"""

  p0: float  # 内源性葡萄糖生成 mg/(dL·min)
  p1: float  # 葡萄糖效能 1/min
  p2: float  # 胰岛素敏感性 mg/(dL·U)
  p3: float  # 碳水系数 mg/(dL·g)
  p4: float  # 胰岛素吸收时间常数 min
  p5: float  # 进餐吸收时间常数 min
  G_b: float  # 基础血糖 mg/dL
  U_b: float  # 基础胰岛素输注率 U/min

  @classmethod
  def from_basal(cls, p1: float, p2: float, p3: float, p4: float, p5: float,
                 G_b: float, U_b: float) -> Self:
    """
    由基础对推导 p0，使空腹时状态1处于平衡

    Returns:
        满足基础一致性的参数
    """
    p0 = p1 * G_b + p2 * U_b
    return cls(p0=p0, p1=p1, p2=p2, p3=p3, p4=p4, p5=p5, G_b=G_b, U_b=U_b)

  def basal_residual(self) -> float:
    """p0 − p1·G_b − p2·U_b"""
    return self.p0 - self.p1 * self.G_b - self.p2 * self.U_b

  def validate(self) -> None:
    """
    校验参数不变量

    Raises:
        InvalidParamsError: 正值约束或基础一致性不满足
    """
    values = asdict(self)
    if not all(np.isfinite(v) for v in values.values()):
      raise InvalidParamsError(f"存在非有限值: {values}")
    for name in ('p1', 'p2', 'p3', 'p4', 'p5'):
      if values[name] <= 0.0:
        raise InvalidParamsError(f"{name} 必须为正, 实际为 {values[name]}")
    if self.p0 < 0.0:
      raise InvalidParamsError(f"p0 不能为负, 实际为 {self.p0}")
    if self.G_b < 0.0 or self.U_b < 0.0:
      raise InvalidParamsError(f"基础对不能为负: G_b={self.G_b}, U_b={self.U_b}")
    residual = self.basal_residual()
    if abs(residual) > BASAL_TOLERANCE:
      raise InvalidParamsError(f"基础一致性不满足, p0 − p1·G_b − p2·U_b = {residual:.3e}")

  def to_dict(self) -> Dict[str, float]:
    return {k: float(v) for k, v in asdict(self).items()}

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    keys = ('p0', 'p1', 'p2', 'p3', 'p4', 'p5', 'G_b', 'U_b')
    missing = [k for k in keys if k not in data]
    if missing:
      raise InvalidParamsError(f"缺少参数字段: {missing}")
    return cls(**{k: float(data[k]) for k in keys})


@dataclass(frozen=True)
class LinearModel:
  """连续矩阵 A, B, E, C 及其欧拉离散 A_d, B_d, E_d"""

  A: np.ndarray
  B: np.ndarray
  E: np.ndarray
  C: np.ndarray
  A_d: np.ndarray
  B_d: np.ndarray
  E_d: np.ndarray
  T: float
  params: ModelParams = field(repr=False)

  def step(self, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """y_{k+1} = A_d·y_k + B_d·u_k + E_d"""
    return self.A_d @ y + self.B_d @ u + self.E_d


def _frozen(array: np.ndarray) -> np.ndarray:
  array.setflags(write=False)
  return array


def build_linear_model(params: ModelParams, T: float = SAMPLING_TIME_MIN) -> LinearModel:
  """
  构建线性模型

  Args:
      params: 生理参数
      T: 采样时间 [min]

  Returns:
      含连续与离散矩阵的 LinearModel

  Raises:
      InvalidParamsError: 参数或采样时间无效
  """
  params.validate()
  if not T > 0.0:
    raise InvalidParamsError(f"采样时间必须为正, 实际为 {T}")

  A = np.zeros((N_STATES, N_STATES), dtype=np.float64)
  A[0, 0] = -params.p1
  A[0, 1] = -params.p2
  A[0, 3] = params.p3
  A[1, 1] = -1.0 / params.p4
  A[1, 2] = 1.0 / params.p4
  A[2, 2] = -1.0 / params.p4
  A[3, 3] = -1.0 / params.p5
  A[3, 4] = 1.0 / params.p5
  A[4, 4] = -1.0 / params.p5

  B = np.zeros((N_STATES, N_INPUTS), dtype=np.float64)
  B[2, 0] = 1.0 / params.p4
  B[4, 1] = 1.0 / params.p5

  E = np.zeros(N_STATES, dtype=np.float64)
  E[0] = params.p0

  C = np.zeros((1, N_STATES), dtype=np.float64)
  C[0, 0] = 1.0

  A_d = T * A + np.eye(N_STATES)
  B_d = T * B
  E_d = T * E

  return LinearModel(
      A=_frozen(A), B=_frozen(B), E=_frozen(E), C=_frozen(C),
      A_d=_frozen(A_d), B_d=_frozen(B_d), E_d=_frozen(E_d),
      T=float(T), params=params
  )


def equilibrium_state(params: ModelParams) -> np.ndarray:
  """
  空腹平衡状态 y0 = [G_b, U_b, U_b, 0, 0]

  Raises:
      InvalidParamsError: 参数违反不变量（包括基础一致性）
  """
  params.validate()
  return np.array([params.G_b, params.U_b, params.U_b, 0.0, 0.0], dtype=np.float64)


def basal_inputs(params: ModelParams, n_steps: int) -> np.ndarray:
  """恒定基础输入序列 (U_b, 0)，形状 (n_steps, 2)"""
  inputs = np.zeros((n_steps, N_INPUTS), dtype=np.float64)
  inputs[:, 0] = params.U_b
  return inputs


def simulate(model: LinearModel, y0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
  """
  离散开环仿真

  Args:
      model: 线性模型
      y0: 初始状态 (5,)
      inputs: 输入序列 (N, 2)，第k行为 u_k

  Returns:
      状态 y_1..y_N，形状 (N, 5)
  """
  inputs = np.asarray(inputs, dtype=np.float64)
  y = np.asarray(y0, dtype=np.float64).copy()
  if inputs.ndim != 2 or inputs.shape[1] != N_INPUTS or inputs.shape[0] == 0:
    raise ShapeMismatchError(f"输入序列形状应为 (N>0, 2), 实际为 {inputs.shape}")
  if y.shape != (N_STATES,):
    raise ShapeMismatchError(f"初始状态形状应为 (5,), 实际为 {y.shape}")

  states = np.empty((inputs.shape[0], N_STATES), dtype=np.float64)
  for k in range(inputs.shape[0]):
    y = model.step(y, inputs[k])
    states[k] = y
  return states


def state_trajectory(model: LinearModel, y0: np.ndarray, inputs: np.ndarray) -> np.ndarray:
  """与输入对齐的状态序列 y_0..y_{N−1}（第k行为施加 u_k 之前的状态）"""
  rolled = simulate(model, y0, inputs)
  return np.vstack([np.asarray(y0, dtype=np.float64)[None, :], rolled[:-1]])


def iob(state: np.ndarray, params: ModelParams) -> np.ndarray:
  """胰岛素在体量 IOB = p4·(y2 + y3) [U]，支持 (5,) 或 (N, 5)"""
  state = np.asarray(state, dtype=np.float64)
  return params.p4 * (state[..., 1] + state[..., 2])


def ra(state: np.ndarray, params: ModelParams) -> np.ndarray:
  """葡萄糖出现率 Ra = p3·y4 [mg/(dL·min)]，支持 (5,) 或 (N, 5)"""
  state = np.asarray(state, dtype=np.float64)
  return params.p3 * state[..., 3]
