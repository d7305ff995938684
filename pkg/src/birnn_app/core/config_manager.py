#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置管理核心模块
负责实验配置的默认值、JSON加载合并、点路径读写、配置哈希，
以及把配置字典转换为类型化的 ExperimentConfig
"""

import copy
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional

from ..utils.constants import DATA_SPLITS, NOMINAL_MEALS, NOMINAL_PARAMS
from ..utils.helpers import hash_payload
from .compartmental import ModelParams
from .losses import LossWeights
from .scenario import ScenarioConfig
from .trainer import TrainConfig
from .virtual_patient import VirtualPatientConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CohortConfig:
  """虚拟患者队列：模板、规模、扰动幅度与种子"""

  template: VirtualPatientConfig
  n_patients: int = 10
  spread: float = 0.2
  seed: int = 7


@dataclass(frozen=True)
class PathsConfig:
  """产物目录"""

  data_dir: str = 'runs/reference/data'
  linear_dir: str = 'runs/reference/linear'
  checkpoint_dir: str = 'runs/reference/checkpoints'
  report_dir: str = 'runs/reference/reports'


@dataclass(frozen=True)
class ExperimentConfig:
  """完整实验配置"""

  cohort: CohortConfig
  protocols: Dict[str, ScenarioConfig]
  rls_ridge: float
  train: TrainConfig
  ablation_without_biological: bool = False
  paths: PathsConfig = field(default_factory=PathsConfig)
  config_hash: str = ''

  def validate(self) -> None:
    """
    Raises:
        ValueError: 协议缺失、种子重复或子配置无效
    """
    missing = [s for s in DATA_SPLITS if s not in self.protocols]
    if missing:
      raise ValueError(f"缺少场景协议: {missing}")
    seeds = [self.protocols[s].seed for s in DATA_SPLITS]
    if len(set(seeds)) != len(seeds):
      raise ValueError(f"训练/验证/测试协议的种子必须互不相同: {seeds}")
    for protocol in self.protocols.values():
      protocol.validate()
    self.cohort.template.validate()
    if self.cohort.n_patients < 1 or not 0.0 <= self.cohort.spread < 1.0:
      raise ValueError("队列规模或扰动幅度无效")
    if self.rls_ridge < 0.0:
      raise ValueError(f"ridge 不能为负: {self.rls_ridge}")
    self.train.validate()


class ConfigManager:
  """实验配置管理器类"""

  DEFAULT_CONFIG = {
      'experiment': {
          'name': 'reference'
      },
      'cohort': {
          'n_patients': 10,
          'spread': 0.2,
          'seed': 7,
          'nominal': dict(NOMINAL_PARAMS),
          'circadian_amplitude': 0.3,
          'circadian_phase_min': 0.0,
          'nonlinearity_gain': 0.5,
          'cgm_noise_std_mgdl': 2.0
      },
      'protocols': {
          'meals': [{'start': s, 'size': g, 'duration': d} for s, g, d in NOMINAL_MEALS],
          'time_jitter_min': 20,
          'size_jitter': 0.2,
          'duration_jitter_min': 10,
          'carb_ratio_g_per_u': 10.0,
          'bolus_error_range': 0.3,
          'bolus_delay_range_min': [5, 30],
          'train': {'days': 14, 'seed': 101},
          'validation': {'days': 14, 'seed': 202},
          'test': {'days': 7, 'seed': 303}
      },
      'rls': {
          'ridge': 0.0
      },
      'train': {
          'eta': 0.01,
          'kappa_max': 500,
          'kappa_val': 5,
          'rho_val': 20,
          'n_hu': 96,
          'seed': 0,
          'clip_norm': 10.0,
          'weights': {
              'alpha_D': 0.5,
              'alpha_B': 0.25,
              'alpha_A': 0.25,
              'xi': 0.5
          },
          'ablation_without_biological': False
      },
      'paths': {
          'data_dir': 'runs/reference/data',
          'linear_dir': 'runs/reference/linear',
          'checkpoint_dir': 'runs/reference/checkpoints',
          'report_dir': 'runs/reference/reports'
      }
  }

  def __init__(self, config_file: Optional[str] = None):
    """
    初始化配置管理器

    Args:
        config_file: 用户配置文件，None只使用默认配置
    """
    self.logger = logging.getLogger(__name__)
    self.config = copy.deepcopy(self.DEFAULT_CONFIG)
    self.config_file = Path(config_file) if config_file else None
    if self.config_file is not None:
      self.load_config()

  def load_config(self, config_file: Optional[str] = None) -> bool:
    """
    加载配置文件并合并到默认配置

    Returns:
        bool: 是否成功加载
    """
    path = Path(config_file) if config_file else self.config_file
    try:
      with open(path, 'r', encoding='utf-8') as f:
        loaded_config = json.load(f)
      self._merge_config(self.config, loaded_config)
      self.logger.info(f"成功加载配置文件: {path}")
      return True
    except Exception as e:
      self.logger.error(f"加载配置文件失败 {path}: {str(e)}")
      return False

  def save_config(self, config_file: Optional[str] = None) -> bool:
    """
    保存配置文件

    Returns:
        bool: 是否成功保存
    """
    path = Path(config_file) if config_file else self.config_file
    try:
      path.parent.mkdir(parents=True, exist_ok=True)
      with open(path, 'w', encoding='utf-8') as f:
        json.dump(self.config, f, indent=2, ensure_ascii=False)
      self.logger.info(f"成功保存配置文件: {path}")
      return True
    except Exception as e:
      self.logger.error(f"保存配置文件失败 {path}: {str(e)}")
      return False

  def get_config(self, key_path: Optional[str] = None) -> Any:
    """
    获取配置值

    Args:
        key_path: 配置键路径，如'train.eta'，None返回全部配置

    Returns:
        配置值
    """
    if key_path is None:
      return copy.deepcopy(self.config)

    value = self.config
    try:
      for key in key_path.split('.'):
        value = value[key]
      return copy.deepcopy(value)
    except (KeyError, TypeError):
      self.logger.warning(f"配置键不存在: {key_path}")
      return None

  def set_config(self, key_path: str, value: Any) -> bool:
    """
    设置配置值

    Args:
        key_path: 配置键路径
        value: 配置值

    Returns:
        bool: 是否成功设置
    """
    keys = key_path.split('.')
    config = self.config
    try:
      for key in keys[:-1]:
        if key not in config:
          config[key] = {}
        config = config[key]
      config[keys[-1]] = copy.deepcopy(value)
      return True
    except Exception as e:
      self.logger.error(f"设置配置失败 {key_path}: {str(e)}")
      return False

  def config_hash(self) -> str:
    """配置哈希（不含路径，目录迁移不影响产物溯源）"""
    payload = {k: v for k, v in self.config.items() if k != 'paths'}
    return hash_payload(payload)

  def build_experiment_config(self) -> ExperimentConfig:
    """
    构建类型化实验配置

    Raises:
        ValueError: 配置无效
    """
    cfg = self.config
    cohort = cfg['cohort']
    nominal = cohort['nominal']
    base = ModelParams.from_basal(nominal['p1'], nominal['p2'], nominal['p3'], nominal['p4'],
                                  nominal['p5'], nominal['G_b'], nominal['U_b'])
    template = VirtualPatientConfig(
        base_params=base,
        circadian_amplitude=float(cohort['circadian_amplitude']),
        circadian_phase_min=float(cohort['circadian_phase_min']),
        nonlinearity_gain=float(cohort['nonlinearity_gain']),
        cgm_noise_std_mgdl=float(cohort['cgm_noise_std_mgdl']),
        seed=int(cohort['seed']),
    )

    protocols_cfg = cfg['protocols']
    common = ScenarioConfig.from_dict({
        'nominal_meals': protocols_cfg['meals'],
        'time_jitter_min': int(protocols_cfg['time_jitter_min']),
        'size_jitter': float(protocols_cfg['size_jitter']),
        'duration_jitter_min': int(protocols_cfg['duration_jitter_min']),
        'carb_ratio_g_per_u': float(protocols_cfg['carb_ratio_g_per_u']),
        'bolus_error_range': float(protocols_cfg['bolus_error_range']),
        'bolus_delay_range_min': protocols_cfg['bolus_delay_range_min'],
        'basal_rate_u_per_min': float(nominal['U_b']),
    })
    protocols = {
        split: replace(common, days=int(protocols_cfg[split]['days']), seed=int(protocols_cfg[split]['seed']))
        for split in DATA_SPLITS
    }

    train_cfg = dict(cfg['train'])
    ablation = bool(train_cfg.pop('ablation_without_biological', False))
    train = TrainConfig(
        eta=float(train_cfg['eta']),
        kappa_max=int(train_cfg['kappa_max']),
        kappa_val=int(train_cfg['kappa_val']),
        rho_val=int(train_cfg['rho_val']),
        weights=LossWeights(**{k: float(v) for k, v in train_cfg['weights'].items()}),
        seed=int(train_cfg['seed']),
        n_hu=int(train_cfg['n_hu']),
        clip_norm=float(train_cfg['clip_norm']),
    )

    experiment = ExperimentConfig(
        cohort=CohortConfig(template=template, n_patients=int(cohort['n_patients']),
                            spread=float(cohort['spread']), seed=int(cohort['seed'])),
        protocols=protocols,
        rls_ridge=float(cfg['rls']['ridge']),
        train=train,
        ablation_without_biological=ablation,
        paths=PathsConfig(**{k: str(v) for k, v in cfg['paths'].items()}),
        config_hash=self.config_hash(),
    )
    experiment.validate()
    return experiment

  def _merge_config(self, default: Dict, loaded: Dict, prefix: str = ''):
    """
    合并配置，保留默认值结构

    Args:
        default: 默认配置
        loaded: 加载的配置
        prefix: 当前键路径，用于日志
    """
    for key, value in loaded.items():
      if key in default:
        if isinstance(default[key], dict) and isinstance(value, dict):
          self._merge_config(default[key], value, f"{prefix}{key}.")
        else:
          default[key] = value
      else:
        self.logger.warning(f"忽略未知配置键: {prefix}{key}")
