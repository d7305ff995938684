#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
文件管理核心模块
负责实验产物的目录布局、读取以及配置哈希溯源检查
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..utils.constants import SCENARIO_COLUMNS, TRACE_COLUMNS
from ..utils.errors import ProvenanceError, ShapeMismatchError
from .compartmental import ModelParams
from .config_manager import PathsConfig
from .exporter import HASH_PREFIX
from .trainer import Checkpoint
from .virtual_patient import GroundTruthTrace, VirtualPatientConfig

logger = logging.getLogger(__name__)


class FileManager:
  """产物文件管理器类"""

  COHORT_FILE = 'cohort.json'
  PATIENT_FILE = 'patient.json'
  REPORT_FILE = 'report.json'

  def __init__(self, paths: Optional[PathsConfig] = None):
    """
    初始化文件管理器

    Args:
        paths: 产物目录配置，None使用默认布局
    """
    self.logger = logging.getLogger(__name__)
    self.paths = paths if paths is not None else PathsConfig()

  # ---- 目录布局 ----

  def patient_dir(self, patient_id: str) -> Path:
    return Path(self.paths.data_dir) / patient_id

  def cohort_path(self) -> Path:
    return Path(self.paths.data_dir) / self.COHORT_FILE

  def patient_path(self, patient_id: str) -> Path:
    return self.patient_dir(patient_id) / self.PATIENT_FILE

  def scenario_path(self, patient_id: str, split: str) -> Path:
    return self.patient_dir(patient_id) / f'scenario_{split}.csv'

  def trace_path(self, patient_id: str, split: str) -> Path:
    return self.patient_dir(patient_id) / f'trace_{split}.csv'

  def linear_path(self, patient_id: str) -> Path:
    return Path(self.paths.linear_dir) / f'{patient_id}.json'

  def checkpoint_path(self, patient_id: str, variant: str = '') -> Path:
    suffix = f'_{variant}' if variant else ''
    return Path(self.paths.checkpoint_dir) / f'{patient_id}{suffix}.json'

  def history_path(self, patient_id: str, variant: str = '') -> Path:
    suffix = f'_{variant}' if variant else ''
    return Path(self.paths.checkpoint_dir) / f'{patient_id}{suffix}_history.csv'

  def report_dir(self) -> Path:
    return Path(self.paths.report_dir)

  def list_patients(self) -> List[str]:
    """列出数据目录中含 patient.json 的患者"""
    data_dir = Path(self.paths.data_dir)
    if not data_dir.is_dir():
      return []
    return sorted(p.name for p in data_dir.iterdir() if (p / self.PATIENT_FILE).is_file())

  # ---- 读取 ----

  def read_json(self, file_path: str) -> Dict[str, Any]:
    with open(file_path, 'r', encoding='utf-8') as f:
      return json.load(f)

  def read_csv(self, file_path: str, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    读取产物CSV（跳过注释行）

    Raises:
        ShapeMismatchError: 缺少所需列
    """
    frame = pd.read_csv(file_path, comment='#')
    if columns is not None:
      missing = [c for c in columns if c not in frame.columns]
      if missing:
        raise ShapeMismatchError(f"{file_path} 缺少列 {missing}")
    return frame

  def read_config_hash(self, file_path: str) -> str:
    """读取产物中的配置哈希，没有则返回空字符串"""
    path = Path(file_path)
    if path.suffix == '.json':
      return str(self.read_json(str(path)).get('config_hash', ''))
    with open(path, 'r', encoding='utf-8') as f:
      first = f.readline().rstrip('\n')
    return first[len(HASH_PREFIX):].strip() if first.startswith(HASH_PREFIX) else ''

  def read_inputs(self, file_path: str) -> np.ndarray:
    """读取场景输入 (N, 2)"""
    frame = self.read_csv(file_path, SCENARIO_COLUMNS)
    return frame[['u', 'r']].to_numpy(dtype=np.float64)

  def read_trace(self, file_path: str) -> GroundTruthTrace:
    frame = self.read_csv(file_path, TRACE_COLUMNS)
    return GroundTruthTrace(
        states=frame[['y1', 'y2', 'y3', 'y4', 'y5']].to_numpy(dtype=np.float64),
        measured_glucose=frame['glucose_meas'].to_numpy(dtype=np.float64),
        p2_eff=frame['p2_eff'].to_numpy(dtype=np.float64),
    )

  def read_model_params(self, file_path: str) -> ModelParams:
    """读取生理参数，兼容带 model_params 字段的产物与裸参数字典"""
    data = self.read_json(file_path)
    return ModelParams.from_dict(data.get('model_params', data))

  def read_patient(self, file_path: str) -> VirtualPatientConfig:
    data = self.read_json(file_path)
    return VirtualPatientConfig.from_dict(data.get('patient', data))

  def read_checkpoint(self, file_path: str) -> Checkpoint:
    return Checkpoint.from_dict(self.read_json(file_path))

  # ---- 溯源 ----

  def check_provenance(self, file_paths: Sequence[str], expected_hash: Optional[str] = None,
                       force: bool = False) -> str:
    """
    检查一组产物的配置哈希是否一致

    Args:
        file_paths: 产物路径
        expected_hash: 期望哈希，None 表示只要求彼此一致
        force: 为 True 时只记录警告

    Returns:
        产物共同的哈希（不一致时为第一个）

    Raises:
        ProvenanceError: 哈希不一致且未强制
    """
    hashes = {str(p): self.read_config_hash(str(p)) for p in file_paths}
    distinct = set(hashes.values())
    if expected_hash is not None:
      distinct.add(expected_hash)
    reference = expected_hash if expected_hash is not None else next(iter(hashes.values()), '')
    if len(distinct) > 1:
      mismatched = [p for p, h in hashes.items() if h != reference]
      message = f"期望 {reference}, 不一致的产物: {mismatched}"
      if not force:
        raise ProvenanceError(message)
      self.logger.warning(f"忽略配置哈希不一致 (--force): {message}")
    return reference
