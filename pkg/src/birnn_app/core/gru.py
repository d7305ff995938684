#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
GRU状态空间网络核心模块
单层GRU + 全连接输出层：单步计算、序列前向展开、沿时间反向传播 (BPTT)
以及参数初始化。时间递推在 numba 编译的内核中执行。

    r_k = σ(W_r u_k + R_r h_k + b_r)
    z_k = σ(W_z u_k + R_z h_k + b_z)
    h̃_k = tanh(W_h u_k + r_k ∘ (R_h h_k) + b_h)
    h_{k+1} = (1 − z_k) ∘ h̃_k + z_k ∘ h_k
    y_k = W_y h_{k+1} + b_y
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np
from numba import njit
from typing_extensions import Self

from ..utils.constants import NETWORK_INPUTS, NETWORK_OUTPUTS
from ..utils.errors import ShapeMismatchError
from ..utils.helpers import make_rng

logger = logging.getLogger(__name__)

INIT_STREAM = 10


@dataclass
class GruParams:
  """网络参数 θ"""

  W_r: np.ndarray
  W_z: np.ndarray
  W_h: np.ndarray
  R_r: np.ndarray
  R_z: np.ndarray
  R_h: np.ndarray
  b_r: np.ndarray
  b_z: np.ndarray
  b_h: np.ndarray
  W_y: np.ndarray
  b_y: np.ndarray

  NAMES = ('W_r', 'W_z', 'W_h', 'R_r', 'R_z', 'R_h', 'b_r', 'b_z', 'b_h', 'W_y', 'b_y')

  @property
  def n_hu(self) -> int:
    return int(self.R_r.shape[0])

  @property
  def n_u(self) -> int:
    return int(self.W_r.shape[1])

  @property
  def n_y(self) -> int:
    return int(self.W_y.shape[0])

  def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
    n_hu, n_u, n_y = self.n_hu, self.n_u, self.n_y
    shapes = {}
    for gate in ('r', 'z', 'h'):
      shapes[f'W_{gate}'] = (n_hu, n_u)
      shapes[f'R_{gate}'] = (n_hu, n_hu)
      shapes[f'b_{gate}'] = (n_hu,)
    shapes['W_y'] = (n_y, n_hu)
    shapes['b_y'] = (n_y,)
    return shapes

  def validate(self) -> None:
    """
    校验形状与有限性

    Raises:
        ShapeMismatchError: 形状不一致或含非有限值
    """
    for name, shape in self.expected_shapes().items():
      value = getattr(self, name)
      if value.shape != shape:
        raise ShapeMismatchError(f"{name} 形状应为 {shape}, 实际为 {value.shape}")
      if not np.all(np.isfinite(value)):
        raise ShapeMismatchError(f"{name} 含非有限值")

  def items(self) -> Iterator[Tuple[str, np.ndarray]]:
    for name in self.NAMES:
      yield name, getattr(self, name)

  def copy(self) -> Self:
    return type(self)(**{name: value.copy() for name, value in self.items()})

  def zeros_like(self) -> Self:
    return type(self)(**{name: np.zeros_like(value) for name, value in self.items()})

  def to_vector(self) -> np.ndarray:
    return np.concatenate([value.ravel() for _, value in self.items()])

  def from_vector(self, vector: np.ndarray) -> Self:
    """按本对象的形状把扁平向量还原为参数"""
    arrays, offset = {}, 0
    for name, value in self.items():
      size = value.size
      arrays[name] = np.asarray(vector[offset:offset + size], dtype=np.float64).reshape(value.shape).copy()
      offset += size
    if offset != vector.size:
      raise ShapeMismatchError(f"向量长度 {vector.size} 与参数总数 {offset} 不一致")
    return type(self)(**arrays)

  def global_norm(self) -> float:
    return float(np.sqrt(sum(float(np.sum(value * value)) for _, value in self.items())))

  def scale(self, factor: float) -> Self:
    return type(self)(**{name: value * factor for name, value in self.items()})

  def to_dict(self) -> Dict[str, Any]:
    return {name: value.tolist() for name, value in self.items()}

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    params = cls(**{name: np.asarray(data[name], dtype=np.float64) for name in cls.NAMES})
    params.validate()
    return params


@dataclass
class GruCache:
  """前向展开保存的中间量，供反向传播使用"""

  inputs: np.ndarray
  H: np.ndarray
  R: np.ndarray
  Z: np.ndarray
  Q: np.ndarray
  H_tilde: np.ndarray


def sigmoid(x: np.ndarray) -> np.ndarray:
  """数值稳定的逐元素 sigmoid"""
  x = np.asarray(x, dtype=np.float64)
  out = np.empty_like(x)
  positive = x >= 0.0
  out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
  e = np.exp(x[~positive])
  out[~positive] = e / (1.0 + e)
  return out


@njit(cache=True)
def _sigmoid_scalar(a):
  if a >= 0.0:
    return 1.0 / (1.0 + math.exp(-a))
  e = math.exp(a)
  return e / (1.0 + e)


@njit(cache=True)
def _forward_kernel(XR, XZ, XH, R_r, R_z, R_h, h0):
  N, n = XR.shape
  H = np.empty((N + 1, n))
  Rg = np.empty((N, n))
  Zg = np.empty((N, n))
  Q = np.empty((N, n))
  Ht = np.empty((N, n))
  for i in range(n):
    H[0, i] = h0[i]
  for k in range(N):
    for i in range(n):
      ar = XR[k, i]
      az = XZ[k, i]
      q = 0.0
      for j in range(n):
        hj = H[k, j]
        ar += R_r[i, j] * hj
        az += R_z[i, j] * hj
        q += R_h[i, j] * hj
      r = _sigmoid_scalar(ar)
      z = _sigmoid_scalar(az)
      ht = math.tanh(XH[k, i] + r * q)
      Rg[k, i] = r
      Zg[k, i] = z
      Q[k, i] = q
      Ht[k, i] = ht
      H[k + 1, i] = (1.0 - z) * ht + z * H[k, i]
  return H, Rg, Zg, Q, Ht


@njit(cache=True)
def _backward_kernel(dH_out, H, Rg, Zg, Q, Ht, R_r, R_z, R_h):
  N, n = dH_out.shape
  dAR = np.zeros((N, n))
  dAZ = np.zeros((N, n))
  dAH = np.zeros((N, n))
  dQ = np.zeros((N, n))
  dh_next = np.zeros(n)
  dh = np.empty(n)
  dprev = np.empty(n)
  for k in range(N - 1, -1, -1):
    for i in range(n):
      dh[i] = dH_out[k, i] + dh_next[i]
    for i in range(n):
      r = Rg[k, i]
      z = Zg[k, i]
      ht = Ht[k, i]
      dah = dh[i] * (1.0 - z) * (1.0 - ht * ht)
      dz = dh[i] * (H[k, i] - ht)
      dr = dah * Q[k, i]
      dAH[k, i] = dah
      dQ[k, i] = dah * r
      dAR[k, i] = dr * r * (1.0 - r)
      dAZ[k, i] = dz * z * (1.0 - z)
      dprev[i] = dh[i] * z
    for j in range(n):
      acc = dprev[j]
      for i in range(n):
        acc += R_r[i, j] * dAR[k, i] + R_z[i, j] * dAZ[k, i] + R_h[i, j] * dQ[k, i]
      dh_next[j] = acc
  return dAR, dAZ, dAH, dQ


def _check_inputs(params: GruParams, inputs: np.ndarray) -> np.ndarray:
  inputs = np.ascontiguousarray(inputs, dtype=np.float64)
  if inputs.ndim != 2 or inputs.shape[1] != params.n_u:
    raise ShapeMismatchError(f"输入形状应为 (N, {params.n_u}), 实际为 {inputs.shape}")
  if inputs.shape[0] == 0:
    raise ShapeMismatchError("输入序列为空")
  return inputs


def _initial_hidden(params: GruParams, h0: Optional[np.ndarray]) -> np.ndarray:
  if h0 is None:
    return np.zeros(params.n_hu, dtype=np.float64)
  h0 = np.ascontiguousarray(h0, dtype=np.float64)
  if h0.shape != (params.n_hu,):
    raise ShapeMismatchError(f"隐状态形状应为 ({params.n_hu},), 实际为 {h0.shape}")
  return h0


def gru_cell(params: GruParams, u: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
  """
  单步GRU计算

  Args:
      params: 网络参数
      u: 标准化输入 (n_u,)
      h: 当前隐状态 (n_hu,)

  Returns:
      (h_next, y)
  """
  u = np.asarray(u, dtype=np.float64)
  h = np.asarray(h, dtype=np.float64)
  if u.shape != (params.n_u,) or h.shape != (params.n_hu,):
    raise ShapeMismatchError(f"输入 {u.shape} 或隐状态 {h.shape} 与参数不匹配")
  r = sigmoid(params.W_r @ u + params.R_r @ h + params.b_r)
  z = sigmoid(params.W_z @ u + params.R_z @ h + params.b_z)
  h_tilde = np.tanh(params.W_h @ u + r * (params.R_h @ h) + params.b_h)
  h_next = (1.0 - z) * h_tilde + z * h
  y = params.W_y @ h_next + params.b_y
  return h_next, y


def forward(params: GruParams, inputs: np.ndarray,
            h0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, GruCache]:
  """
  序列前向展开并保留中间量

  Args:
      params: 网络参数
      inputs: 标准化输入 (N, n_u)
      h0: 初始隐状态，None 为零向量

  Returns:
      (输出 (N, n_y), 缓存)
  """
  inputs = _check_inputs(params, inputs)
  h0 = _initial_hidden(params, h0)
  XR = np.ascontiguousarray(inputs @ params.W_r.T + params.b_r)
  XZ = np.ascontiguousarray(inputs @ params.W_z.T + params.b_z)
  XH = np.ascontiguousarray(inputs @ params.W_h.T + params.b_h)
  H, Rg, Zg, Q, Ht = _forward_kernel(
      XR, XZ, XH,
      np.ascontiguousarray(params.R_r), np.ascontiguousarray(params.R_z),
      np.ascontiguousarray(params.R_h), h0)
  outputs = H[1:] @ params.W_y.T + params.b_y
  return outputs, GruCache(inputs=inputs, H=H, R=Rg, Z=Zg, Q=Q, H_tilde=Ht)


def rollout(params: GruParams, inputs: np.ndarray, h0: Optional[np.ndarray] = None) -> np.ndarray:
  """从 h0 迭代 GRU，返回 ŷ_0..ŷ_{N−1}（仅由外部输入驱动）"""
  outputs, _ = forward(params, inputs, h0)
  return outputs


def backward(params: GruParams, cache: GruCache, d_outputs: np.ndarray) -> GruParams:
  """
  沿时间反向传播

  Args:
      params: 网络参数
      cache: forward 返回的缓存
      d_outputs: 损失对输出的梯度 (N, n_y)

  Returns:
      与参数同形的梯度
  """
  d_outputs = np.ascontiguousarray(d_outputs, dtype=np.float64)
  H_prev = cache.H[:-1]
  H_next = cache.H[1:]
  dH_out = np.ascontiguousarray(d_outputs @ params.W_y)
  dAR, dAZ, dAH, dQ = _backward_kernel(
      dH_out, cache.H, cache.R, cache.Z, cache.Q, cache.H_tilde,
      np.ascontiguousarray(params.R_r), np.ascontiguousarray(params.R_z),
      np.ascontiguousarray(params.R_h))
  U = cache.inputs
  return GruParams(
      W_r=dAR.T @ U, W_z=dAZ.T @ U, W_h=dAH.T @ U,
      R_r=dAR.T @ H_prev, R_z=dAZ.T @ H_prev, R_h=dQ.T @ H_prev,
      b_r=dAR.sum(axis=0), b_z=dAZ.sum(axis=0), b_h=dAH.sum(axis=0),
      W_y=d_outputs.T @ H_next, b_y=d_outputs.sum(axis=0),
  )


def init_params(n_hu: int, seed: int, n_u: int = NETWORK_INPUTS,
                n_y: int = NETWORK_OUTPUTS) -> GruParams:
  """
  参数初始化

  输入与输出权重采用 Glorot 均匀分布，循环权重在 ±1/√n_hu 内均匀分布，偏置为零。

  Args:
      n_hu: 隐藏单元数 (≥ 1)
      seed: 随机种子

  Returns:
      GruParams
  """
  if n_hu < 1:
    raise ValueError(f"n_hu 至少为1, 实际为 {n_hu}")
  rng = make_rng(seed, stream=INIT_STREAM)
  input_bound = math.sqrt(6.0 / (n_u + n_hu))
  output_bound = math.sqrt(6.0 / (n_hu + n_y))
  recurrent_bound = 1.0 / math.sqrt(n_hu)
  arrays = {}
  for gate in ('r', 'z', 'h'):
    arrays[f'W_{gate}'] = rng.uniform(-input_bound, input_bound, size=(n_hu, n_u))
  for gate in ('r', 'z', 'h'):
    arrays[f'R_{gate}'] = rng.uniform(-recurrent_bound, recurrent_bound, size=(n_hu, n_hu))
  for gate in ('r', 'z', 'h'):
    arrays[f'b_{gate}'] = np.zeros(n_hu)
  arrays['W_y'] = rng.uniform(-output_bound, output_bound, size=(n_y, n_hu))
  arrays['b_y'] = np.zeros(n_y)
  logger.debug(f"初始化GRU参数: n_hu={n_hu}, seed={seed}")
  return GruParams(**arrays)
