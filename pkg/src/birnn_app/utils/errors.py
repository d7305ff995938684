#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常类型定义
"""

from .constants import ERROR_MESSAGES


class BirnnError(Exception):
  """工具包异常基类，code 为稳定的错误标识"""

  code = 'unknown_error'

  def __init__(self, detail: str = ''):
    self.detail = detail
    message = ERROR_MESSAGES.get(self.code, ERROR_MESSAGES['unknown_error'])
    super().__init__(f"{message}: {detail}" if detail else message)


class InvalidParamsError(BirnnError):
  code = 'invalid-params'


class DegenerateDataError(BirnnError):
  code = 'degenerate-data'


class ConvergenceError(BirnnError):
  code = 'non-convergence'


class ScheduleError(BirnnError):
  code = 'unsatisfiable-schedule'


class UnstableConfigurationError(BirnnError):
  code = 'unstable-configuration'


class ShapeMismatchError(BirnnError):
  code = 'shape-mismatch'


class LossConfigError(BirnnError):
  code = 'loss-config'


class NonFiniteGradientError(BirnnError):
  code = 'non-finite-gradient'

  def __init__(self, parameter: str):
    self.parameter = parameter
    super().__init__(f"参数 {parameter}")


class StageError(BirnnError):
  code = 'stage-failed'

  def __init__(self, stage: str, detail: str = ''):
    self.stage = stage
    super().__init__(f"[{stage}] {detail}")


class ProvenanceError(BirnnError):
  code = 'provenance'
