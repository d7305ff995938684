#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行子命令
generate | simulate | fit-linear | train | evaluate | simulate-model | run
退出码: 0 成功, 1 运行失败, 2 用法错误
"""

import argparse
import json
import logging
from pathlib import Path
from typing import List, Optional

from ..core.compartmental import ModelParams
from ..core.config_manager import ConfigManager, PathsConfig
from ..core.evaluation import predict_birnn, predict_linear
from ..core.exporter import ArtifactExporter
from ..core.file_manager import FileManager
from ..core.pipeline import evaluate_artifacts, fit_patient, run_pipeline, train_patient
from ..core.scenario import Scenario, ScenarioConfig, generate_scenario
from ..core.trainer import TrainConfig
from ..core.virtual_patient import simulate_patient
from ..utils.constants import APP_DESCRIPTION, APP_VERSION, PIPELINE_STAGES
from ..utils.errors import BirnnError
from ..utils.helpers import hash_payload
from ..utils.logger import setup_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1


def _read_json(path: str) -> dict:
  with open(path, 'r', encoding='utf-8') as f:
    return json.load(f)


def _written(ok: bool, what: str) -> None:
  if not ok:
    raise OSError(f"写出 {what} 失败")


def cmd_generate(args: argparse.Namespace) -> int:
  """生成单个场景"""
  data = _read_json(args.config) if args.config else {}
  config = ScenarioConfig.from_dict(data)
  if args.seed is not None:
    config = ScenarioConfig.from_dict({**config.to_dict(), 'seed': args.seed})
  scenario = generate_scenario(config)
  config_hash = hash_payload(config.to_dict())
  _written(ArtifactExporter().export_scenario(scenario, args.out, args.split, config_hash), args.out)
  logger.info(f"场景已写出: {args.out} (哈希 {config_hash})")
  return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
  """在场景上仿真虚拟患者"""
  files = FileManager()
  patient = files.read_patient(args.patient)
  inputs = files.read_inputs(args.scenario)
  trace = simulate_patient(patient, Scenario(inputs=inputs, meal_log=[], bolus_log=[]))
  config_hash = hash_payload({'patient': patient.to_dict(),
                              'scenario': files.read_config_hash(args.scenario)})
  _written(ArtifactExporter().export_trace(trace, args.out, config_hash), args.out)
  return EXIT_OK


def cmd_fit_linear(args: argparse.Namespace) -> int:
  """在 <data>/scenario_train.csv 与 trace_train.csv 上辨识线性模型"""
  files = FileManager()
  data_dir = Path(args.data)
  params = fit_patient(files, data_dir, args.ridge)
  config_hash = files.read_config_hash(str(data_dir / 'trace_train.csv'))
  _written(ArtifactExporter().export_model_params(params, args.out, config_hash), args.out)
  return EXIT_OK


def _load_train_config(path: str):
  data = _read_json(path)
  if 'train' in data:
    manager = ConfigManager(path)
    return manager.build_experiment_config().train, manager.config_hash()
  return TrainConfig.from_dict(data), hash_payload(data)


def cmd_train(args: argparse.Namespace) -> int:
  """训练单个患者的 BI-RNN"""
  files = FileManager()
  config, config_hash = _load_train_config(args.config)
  params = files.read_model_params(args.patient_params)
  checkpoint, history = train_patient(files, Path(args.data), params, config, config_hash)
  exporter = ArtifactExporter()
  out = Path(args.out)
  _written(exporter.export_checkpoint(checkpoint, str(out)), args.out)
  history_path = out.with_name(f'{out.stem}_history.csv')
  _written(exporter.export_history(history, str(history_path), config_hash), str(history_path))
  return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
  """队列评估"""
  files = FileManager(PathsConfig(data_dir=args.data, linear_dir=args.linear,
                                  checkpoint_dir=args.ckpts, report_dir=args.out))
  report = evaluate_artifacts(files, ArtifactExporter(), force=args.force, ablation=args.ablation)
  print(json.dumps(report.cohort, indent=2, ensure_ascii=False))
  return EXIT_OK


def cmd_simulate_model(args: argparse.Namespace) -> int:
  """用检查点或生理参数在任意输入上开环仿真并导出轨迹"""
  files = FileManager()
  inputs = files.read_inputs(args.inputs)
  if args.checkpoint:
    checkpoint = files.read_checkpoint(args.checkpoint)
    states = predict_birnn(checkpoint.params, checkpoint.standardizer, inputs)
    params: ModelParams = checkpoint.model_params
    config_hash = checkpoint.config_hash
  else:
    params = files.read_model_params(args.params)
    states = predict_linear(params, inputs)
    config_hash = files.read_config_hash(args.params)
  _written(ArtifactExporter().export_trajectory(states, inputs, params, args.out, config_hash), args.out)
  return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
  """执行完整实验流水线"""
  manager = ConfigManager()
  if args.config and not manager.load_config(args.config):
    return EXIT_FAILURE
  experiment = manager.build_experiment_config()
  report = run_pipeline(experiment, stage=args.stage, force=args.force)
  if report is not None:
    logger.info(f"BI-RNN GoF 更高的患者数: {report.birnn_wins}/{len(report.patients)}")
  return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
  """构建命令行解析器"""
  parser = argparse.ArgumentParser(prog='birnn', description=APP_DESCRIPTION)
  parser.add_argument('--version', action='version', version=f'%(prog)s {APP_VERSION}')
  parser.add_argument('--log-level', default='INFO',
                      choices=['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'], help='日志级别')
  parser.add_argument('--log-file', default=None, help='日志文件路径')
  sub = parser.add_subparsers(dest='command', required=True)

  p = sub.add_parser('generate', help='生成进餐与胰岛素场景')
  p.add_argument('--config', help='ScenarioConfig JSON，缺省使用名义协议')
  p.add_argument('--out', required=True, help='输出目录')
  p.add_argument('--seed', type=int, default=None, help='覆盖配置中的种子')
  p.add_argument('--split', default='train', help='文件名中的划分标识')
  p.set_defaults(handler=cmd_generate)

  p = sub.add_parser('simulate', help='在场景上仿真虚拟患者')
  p.add_argument('--patient', required=True, help='VirtualPatientConfig JSON')
  p.add_argument('--scenario', required=True, help='场景CSV')
  p.add_argument('--out', required=True, help='地面真值轨迹CSV')
  p.set_defaults(handler=cmd_simulate)

  p = sub.add_parser('fit-linear', help='RLS辨识线性模型')
  p.add_argument('--data', required=True, help='含 scenario_train.csv 与 trace_train.csv 的目录')
  p.add_argument('--out', required=True, help='输出参数JSON')
  p.add_argument('--ridge', type=float, default=0.0, help='正则化权重')
  p.set_defaults(handler=cmd_fit_linear)

  p = sub.add_parser('train', help='训练BI-RNN')
  p.add_argument('--data', required=True, help='含 train/validation 场景与轨迹的目录')
  p.add_argument('--patient-params', required=True, help='辨识得到的生理参数JSON')
  p.add_argument('--config', required=True, help='TrainConfig 或实验配置JSON')
  p.add_argument('--out', required=True, help='检查点JSON')
  p.set_defaults(handler=cmd_train)

  p = sub.add_parser('evaluate', help='BI-RNN与线性模型对比评估')
  p.add_argument('--ckpts', required=True, help='检查点目录')
  p.add_argument('--linear', required=True, help='线性拟合目录')
  p.add_argument('--data', required=True, help='数据目录')
  p.add_argument('--out', required=True, help='报告目录')
  p.add_argument('--force', action='store_true', help='允许配置哈希不一致的输入')
  p.add_argument('--ablation', action='store_true', help='同时报告无生物损失对照的泛化差距')
  p.set_defaults(handler=cmd_evaluate)

  p = sub.add_parser('simulate-model', help='用检查点或生理参数仿真任意输入')
  source = p.add_mutually_exclusive_group(required=True)
  source.add_argument('--checkpoint', help='BI-RNN检查点JSON')
  source.add_argument('--params', help='ModelParams JSON')
  p.add_argument('--inputs', required=True, help='输入CSV (t_min,u,r)')
  p.add_argument('--out', required=True, help='轨迹CSV')
  p.set_defaults(handler=cmd_simulate_model)

  p = sub.add_parser('run', help='执行完整实验流水线')
  p.add_argument('--config', help='实验配置JSON，缺省使用默认配置')
  p.add_argument('--stage', choices=PIPELINE_STAGES, default=None, help='起始阶段，之前的阶段复用已有产物')
  p.add_argument('--force', action='store_true', help='允许配置哈希不一致的输入')
  p.set_defaults(handler=cmd_run)
  return parser


def main(argv: Optional[List[str]] = None) -> int:
  """
  命令行入口

  Args:
      argv: 参数列表，None 使用 sys.argv

  Returns:
      退出码
  """
  args = build_parser().parse_args(argv)
  setup_logger(log_level=args.log_level, log_file=args.log_file)
  try:
    return args.handler(args)
  except BirnnError as e:
    logger.error(f"{args.command} 失败 [{e.code}]: {str(e)}")
    return EXIT_FAILURE
  except (OSError, ValueError, KeyError) as e:
    logger.error(f"{args.command} 失败: {str(e)}")
    return EXIT_FAILURE
