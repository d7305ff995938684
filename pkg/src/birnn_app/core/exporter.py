#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
产物导出核心模块
负责场景、地面真值轨迹、参数、检查点、训练历史、轨迹与评估报告的写出；
每个产物都带配置哈希：JSON 写入 config_hash 字段，CSV 以注释行开头。
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..utils.constants import (CSV_FLOAT_FORMAT, HISTORY_COLUMNS, SAMPLING_TIME_MIN, SCENARIO_COLUMNS,
                               TRACE_COLUMNS, TRAJECTORY_COLUMNS)
from .compartmental import ModelParams, iob, ra
from .evaluation import EvalReport
from .scenario import Scenario
from .trainer import Checkpoint
from .virtual_patient import GroundTruthTrace, VirtualPatientConfig

logger = logging.getLogger(__name__)

HASH_PREFIX = '# config_hash: '


class ArtifactExporter:
  """产物导出器类"""

  def __init__(self):
    """初始化产物导出器"""
    self.logger = logging.getLogger(__name__)

  def _prepare(self, output_path: str) -> Path:
    path = Path(output_path)
    output_dir = path.parent
    if str(output_dir) and not output_dir.exists():
      os.makedirs(output_dir, exist_ok=True)
    return path

  def write_json(self, data: Dict[str, Any], output_path: str, config_hash: str) -> bool:
    """
    写出带配置哈希的JSON

    Args:
        data: 内容
        output_path: 输出路径
        config_hash: 配置哈希

    Returns:
        bool: 是否成功写出
    """
    try:
      path = self._prepare(output_path)
      payload = {'config_hash': config_hash}
      payload.update({k: v for k, v in data.items() if k != 'config_hash'})
      with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write('\n')
      self.logger.debug(f"写出JSON: {path}")
      return True
    except Exception as e:
      self.logger.error(f"写出JSON失败 {output_path}: {str(e)}")
      return False

  def write_csv(self, frame: pd.DataFrame, output_path: str, config_hash: str) -> bool:
    """
    写出CSV，首行为配置哈希注释

    Returns:
        bool: 是否成功写出
    """
    try:
      path = self._prepare(output_path)
      with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(f"{HASH_PREFIX}{config_hash}\n")
        frame.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
      self.logger.debug(f"写出CSV: {path} ({len(frame)} 行)")
      return True
    except Exception as e:
      self.logger.error(f"写出CSV失败 {output_path}: {str(e)}")
      return False

  def export_scenario(self, scenario: Scenario, directory: str, split: str, config_hash: str) -> bool:
    """写出 scenario_<split>.csv 与 events_<split>.json"""
    n = scenario.n_minutes
    frame = pd.DataFrame({
        't_min': np.arange(n) * SAMPLING_TIME_MIN,
        'u': scenario.inputs[:, 0],
        'r': scenario.inputs[:, 1],
    }, columns=SCENARIO_COLUMNS)
    directory = Path(directory)
    return (self.write_csv(frame, str(directory / f'scenario_{split}.csv'), config_hash)
            and self.write_json(scenario.event_log(), str(directory / f'events_{split}.json'), config_hash))

  def export_trace(self, trace: GroundTruthTrace, output_path: str, config_hash: str) -> bool:
    """写出地面真值轨迹 t_min,glucose_meas,y1..y5,p2_eff"""
    data = {'t_min': np.arange(trace.n_minutes) * SAMPLING_TIME_MIN,
            'glucose_meas': trace.measured_glucose}
    for i in range(5):
      data[f'y{i + 1}'] = trace.states[:, i]
    data['p2_eff'] = trace.p2_eff
    return self.write_csv(pd.DataFrame(data, columns=TRACE_COLUMNS), output_path, config_hash)

  def export_model_params(self, params: ModelParams, output_path: str, config_hash: str,
                          extra: Optional[Dict[str, Any]] = None) -> bool:
    data = {'model_params': params.to_dict()}
    if extra:
      data.update(extra)
    return self.write_json(data, output_path, config_hash)

  def export_patient(self, patient_id: str, config: VirtualPatientConfig, output_path: str,
                     config_hash: str) -> bool:
    return self.write_json({'patient_id': patient_id, 'patient': config.to_dict()}, output_path, config_hash)

  def export_cohort(self, patient_ids: Sequence[str], cohort: Sequence[VirtualPatientConfig],
                    output_path: str, config_hash: str) -> bool:
    patients = [{'patient_id': pid, 'patient': cfg.to_dict()} for pid, cfg in zip(patient_ids, cohort)]
    return self.write_json({'patients': patients}, output_path, config_hash)

  def export_checkpoint(self, checkpoint: Checkpoint, output_path: str) -> bool:
    """写出检查点（哈希取自检查点本身）"""
    ok = self.write_json(checkpoint.to_dict(), output_path, checkpoint.config_hash)
    if ok:
      self.logger.info(f"保存检查点: {output_path} (n_hu={checkpoint.params.n_hu}, "
                       f"最佳迭代 {checkpoint.best_iteration})")
    return ok

  def export_history(self, history: List[Dict[str, Any]], output_path: str, config_hash: str) -> bool:
    """写出训练历史 iter,loss,L_D,L_B,L_A,val_mse,clipped"""
    return self.write_csv(pd.DataFrame(history, columns=HISTORY_COLUMNS), output_path, config_hash)

  def export_trajectory(self, states: np.ndarray, inputs: np.ndarray, params: ModelParams,
                        output_path: str, config_hash: str) -> bool:
    """
    写出状态轨迹 t_min,y1..y5,u,r,iob,ra

    Args:
        states: 与输入对齐的物理单位状态 (N, 5)
        inputs: 输入 (N, 2)
        params: 计算 IOB/Ra 所用的生理参数
    """
    states = np.asarray(states, dtype=np.float64)
    data = {'t_min': np.arange(states.shape[0]) * SAMPLING_TIME_MIN}
    for i in range(5):
      data[f'y{i + 1}'] = states[:, i]
    data['u'] = inputs[:, 0]
    data['r'] = inputs[:, 1]
    data['iob'] = iob(states, params)
    data['ra'] = ra(states, params)
    return self.write_csv(pd.DataFrame(data, columns=TRAJECTORY_COLUMNS), output_path, config_hash)

  def export_report(self, report: EvalReport, report_dir: str, config_hash: str,
                    extra: Optional[Dict[str, Any]] = None) -> bool:
    """写出 report.json 与 traces/<patient>.csv"""
    report_dir = Path(report_dir)
    data = report.to_dict()
    if extra:
      data.update(extra)
    ok = self.write_json(data, str(report_dir / 'report.json'), config_hash)
    for patient_id, trace in report.traces.items():
      ok = self.write_csv(trace, str(report_dir / 'traces' / f'{patient_id}.csv'), config_hash) and ok
    if ok:
      self.logger.info(f"评估报告已写出: {report_dir}")
    return ok
