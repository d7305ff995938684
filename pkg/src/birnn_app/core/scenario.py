#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
场景生成核心模块
按功能性胰岛素治疗 (FIT) 生成多日进餐与胰岛素输入：
每日三餐带时间/份量/时长随机扰动，餐后大剂量按估算误差计算并延迟给药，
基础率每分钟输注。
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from typing_extensions import Self

from ..utils.constants import (MAX_SCHEDULE_REDRAWS, MINUTES_PER_DAY, NOMINAL_MEALS,
                               NOMINAL_PARAMS)
from ..utils.errors import ScheduleError
from ..utils.helpers import make_rng, prng_description

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MealEvent:
  """进餐事件：开始时刻(当日分钟)、克数、持续分钟"""

  start: int
  size: float
  duration: int

  def is_valid(self) -> bool:
    return (self.size > 0.0 and self.duration > 0 and self.start >= 0
            and self.start + self.duration <= MINUTES_PER_DAY)


@dataclass(frozen=True)
class BolusEvent:
  """餐后大剂量：绝对分钟、剂量 U、相对进餐开始的延迟"""

  time: int
  amount: float
  delay_after_meal: int


@dataclass(frozen=True)
class ScenarioConfig:
  """场景配置"""

  days: int = 14
  nominal_meals: Tuple[MealEvent, ...] = tuple(MealEvent(s, g, d) for s, g, d in NOMINAL_MEALS)
  time_jitter_min: int = 20
  size_jitter: float = 0.2
  duration_jitter_min: int = 10
  carb_ratio_g_per_u: float = 10.0
  bolus_error_range: float = 0.3
  bolus_delay_range_min: Tuple[int, int] = (5, 30)
  basal_rate_u_per_min: float = NOMINAL_PARAMS['U_b']
  seed: int = 0

  def validate(self) -> None:
    """
    校验配置

    Raises:
        ValueError: 配置无效
    """
    if self.days < 1:
      raise ValueError(f"days 至少为1, 实际为 {self.days}")
    if min(self.time_jitter_min, self.size_jitter, self.duration_jitter_min) < 0:
      raise ValueError("扰动幅度不能为负")
    if not 0.0 <= self.size_jitter < 1.0 or not 0.0 <= self.bolus_error_range < 1.0:
      raise ValueError("份量扰动与剂量误差必须位于 [0, 1)")
    low, high = self.bolus_delay_range_min
    if low > high or low < 0:
      raise ValueError(f"大剂量延迟区间无效: {self.bolus_delay_range_min}")
    if self.carb_ratio_g_per_u <= 0.0 or self.basal_rate_u_per_min < 0.0:
      raise ValueError("碳水系数必须为正且基础率不能为负")
    if not self.nominal_meals or not all(m.is_valid() for m in self.nominal_meals):
      raise ValueError(f"名义进餐无效: {self.nominal_meals}")

  @property
  def n_minutes(self) -> int:
    return self.days * MINUTES_PER_DAY

  def to_dict(self) -> Dict[str, Any]:
    data = asdict(self)
    data['nominal_meals'] = [asdict(m) for m in self.nominal_meals]
    data['bolus_delay_range_min'] = list(self.bolus_delay_range_min)
    return data

  @classmethod
  def from_dict(cls, data: Dict[str, Any]) -> Self:
    values = dict(data)
    if 'nominal_meals' in values:
      values['nominal_meals'] = tuple(
          MealEvent(int(m['start']), float(m['size']), int(m['duration']))
          for m in values['nominal_meals'])
    if 'bolus_delay_range_min' in values:
      values['bolus_delay_range_min'] = tuple(int(v) for v in values['bolus_delay_range_min'])
    known = cls.__dataclass_fields__.keys()
    return cls(**{k: v for k, v in values.items() if k in known})


@dataclass
class Scenario:
  """生成的场景：分钟级输入与实际事件日志"""

  inputs: np.ndarray
  meal_log: List[MealEvent]
  bolus_log: List[BolusEvent]
  meal_days: List[int] = field(default_factory=list)
  provenance: Dict[str, Any] = field(default_factory=dict)

  @property
  def n_minutes(self) -> int:
    return int(self.inputs.shape[0])

  def meal_absolute_start(self, index: int) -> int:
    return self.meal_days[index] * MINUTES_PER_DAY + self.meal_log[index].start

  def event_log(self) -> Dict[str, Any]:
    """事件日志（含名义值与随机抽样来源）"""
    meals = []
    for i, meal in enumerate(self.meal_log):
      entry = {'day': self.meal_days[i], 'absolute_start': self.meal_absolute_start(i)}
      entry.update(asdict(meal))
      entry.update(self.provenance.get('meal_draws', [{}] * len(self.meal_log))[i])
      meals.append(entry)
    boluses = []
    for i, bolus in enumerate(self.bolus_log):
      entry = asdict(bolus)
      entry.update(self.provenance.get('bolus_draws', [{}] * len(self.bolus_log))[i])
      boluses.append(entry)
    header = {k: v for k, v in self.provenance.items() if k not in ('meal_draws', 'bolus_draws')}
    return {'provenance': header, 'meals': meals, 'boluses': boluses}


def _draw_day(config: ScenarioConfig, rng: np.random.Generator) -> Tuple[List[MealEvent], List[Dict]]:
  meals, draws = [], []
  for nominal in config.nominal_meals:
    time_offset = int(rng.integers(-config.time_jitter_min, config.time_jitter_min, endpoint=True))
    size_factor = float(rng.uniform(1.0 - config.size_jitter, 1.0 + config.size_jitter))
    duration_offset = int(rng.integers(-config.duration_jitter_min, config.duration_jitter_min,
                                       endpoint=True))
    meals.append(MealEvent(start=nominal.start + time_offset,
                           size=nominal.size * size_factor,
                           duration=nominal.duration + duration_offset))
    draws.append({
        'nominal': asdict(nominal),
        'time_offset_min': time_offset,
        'size_factor': size_factor,
        'duration_offset_min': duration_offset,
    })
  return meals, draws


def _schedule_ok(meals: List[MealEvent]) -> bool:
  if not all(m.is_valid() for m in meals):
    return False
  ordered = sorted(meals, key=lambda m: m.start)
  return all(a.start + a.duration <= b.start for a, b in zip(ordered, ordered[1:]))


def generate_scenario(config: ScenarioConfig) -> Scenario:
  """
  生成场景

  Args:
      config: 场景配置（含种子）

  Returns:
      Scenario，输入长度为 days·1440

  Raises:
      ScheduleError: 某天重抽 100 次后进餐仍然重叠
  """
  config.validate()
  rng = make_rng(config.seed, stream=0)
  n_minutes = config.n_minutes
  inputs = np.zeros((n_minutes, 2), dtype=np.float64)
  inputs[:, 0] = config.basal_rate_u_per_min

  meal_log, meal_days, meal_draws = [], [], []
  for day in range(config.days):
    for attempt in range(1, MAX_SCHEDULE_REDRAWS + 1):
      meals, draws = _draw_day(config, rng)
      if _schedule_ok(meals):
        break
    else:
      raise ScheduleError(f"第 {day} 天在 {MAX_SCHEDULE_REDRAWS} 次重抽后仍不可行")
    for meal, draw in zip(meals, draws):
      draw['attempt'] = attempt
      meal_log.append(meal)
      meal_days.append(day)
      meal_draws.append(draw)

  bolus_log, bolus_draws = [], []
  low, high = config.bolus_delay_range_min
  for i, meal in enumerate(meal_log):
    absolute_start = meal_days[i] * MINUTES_PER_DAY + meal.start
    inputs[absolute_start:absolute_start + meal.duration, 1] += meal.size / meal.duration

    error_factor = float(rng.uniform(1.0 - config.bolus_error_range, 1.0 + config.bolus_error_range))
    delay = int(rng.integers(low, high, endpoint=True))
    perceived = meal.size * error_factor
    amount = perceived / config.carb_ratio_g_per_u
    time = absolute_start + delay
    if time >= n_minutes:
      logger.warning(f"第 {i} 餐的大剂量时刻 {time} 超出场景长度，已跳过")
      continue
    inputs[time, 0] += amount
    bolus_log.append(BolusEvent(time=time, amount=amount, delay_after_meal=delay))
    bolus_draws.append({'meal_index': i, 'error_factor': error_factor, 'perceived_size': perceived})

  provenance = {
      'prng': prng_description(config.seed, stream=0),
      'config': config.to_dict(),
      'meal_draws': meal_draws,
      'bolus_draws': bolus_draws,
  }
  logger.info(f"生成场景: {config.days} 天, {len(meal_log)} 餐, {len(bolus_log)} 次大剂量, "
              f"PRNG={provenance['prng']['algorithm']}, seed={config.seed}")
  return Scenario(inputs=inputs, meal_log=meal_log, bolus_log=bolus_log,
                  meal_days=meal_days, provenance=provenance)


def nominal_protocols(train_days: int = 14, test_days: int = 7, validation_days: int = 14,
                      seeds: Tuple[int, int, int] = (101, 202, 303),
                      carb_ratio_g_per_u: float = 10.0,
                      basal_rate_u_per_min: Optional[float] = None) -> Tuple[ScenarioConfig, ScenarioConfig, ScenarioConfig]:
  """
  名义实验协议

  验证集：14天、三餐 (07:00 60g 30min, 12:00 60g 30min, 18:00 80g 40min)，
  时间 ±20min、份量 ±20%、时长 ±10min；训练/测试沿用同一模板与独立种子。

  Returns:
      (train, validation, test) 三个场景配置
  """
  if len(set(seeds)) != 3:
    raise ValueError(f"三个协议的种子必须互不相同: {seeds}")
  basal = NOMINAL_PARAMS['U_b'] if basal_rate_u_per_min is None else basal_rate_u_per_min
  common = dict(carb_ratio_g_per_u=carb_ratio_g_per_u, basal_rate_u_per_min=basal)
  train = ScenarioConfig(days=train_days, seed=seeds[0], **common)
  validation = ScenarioConfig(days=validation_days, seed=seeds[1], **common)
  test = ScenarioConfig(days=test_days, seed=seeds[2], **common)
  return train, validation, test
