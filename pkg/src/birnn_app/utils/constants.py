#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
应用常量定义
"""

# 应用信息
APP_VERSION = "1.0.0"
APP_DESCRIPTION = "GRU状态空间网络结合房室模型先验的血糖-胰岛素动力学辨识与评估"

# 采样与时间
SAMPLING_TIME_MIN = 1.0
MINUTES_PER_DAY = 1440

# 名义生理参数 (虚拟患者队列中心)
NOMINAL_PARAMS = {
    'G_b': 120.0,   # mg/dL
    'U_b': 0.015,   # U/min
    'p1': 0.008,    # 1/min
    'p2': 40.0,     # mg/(dL·U)
    'p3': 3.5,      # mg/(dL·g)
    'p4': 50.0,     # min
    'p5': 40.0,     # min
}

# 名义进餐模板: (开始分钟, 克数, 持续分钟)
NOMINAL_MEALS = [
    (7 * 60, 60.0, 30),
    (12 * 60, 60.0, 30),
    (18 * 60, 80.0, 40),
]

# 网络与训练默认值
NETWORK_INPUTS = 2
NETWORK_OUTPUTS = 5
DEFAULT_HIDDEN_UNITS = 96
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_VALIDATION_INTERVAL = 5
DEFAULT_VALIDATION_PATIENCE = 20
DEFAULT_LOSS_WEIGHTS = (0.5, 0.25, 0.25)
DEFAULT_SUBSET_FRACTION = 0.5
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
GRADIENT_CLIP_NORM = 10.0
STD_FLOOR = 1e-8
INIT_SCHEME = 'glorot-uniform/scaled-uniform-recurrent/zero-bias'

# 数值阈值
BASAL_TOLERANCE = 1e-9
GOF_DEGENERATE_THRESHOLD = 1e-9
BLOWUP_THRESHOLD = 1e6
MAX_SCHEDULE_REDRAWS = 100

# 随机数发生器
PRNG_ALGORITHM = 'PCG64'

# 标准化通道顺序
STANDARDIZER_CHANNELS = ['u', 'r', 'y1', 'y2', 'y3', 'y4', 'y5']

# 文件格式
CHECKPOINT_FORMAT = 'birnn-checkpoint/1'
TRAJECTORY_COLUMNS = ['t_min', 'y1', 'y2', 'y3', 'y4', 'y5', 'u', 'r', 'iob', 'ra']
SCENARIO_COLUMNS = ['t_min', 'u', 'r']
TRACE_COLUMNS = ['t_min', 'glucose_meas', 'y1', 'y2', 'y3', 'y4', 'y5', 'p2_eff']
HISTORY_COLUMNS = ['iter', 'loss', 'L_D', 'L_B', 'L_A', 'val_mse', 'clipped']
EVAL_TRACE_COLUMNS = [
    't_min', 'glucose_true', 'glucose_birnn', 'glucose_linear',
    'iob_true', 'iob_birnn', 'iob_linear',
    'ra_true', 'ra_birnn', 'ra_linear'
]
CSV_FLOAT_FORMAT = '%.12g'

# 流水线阶段
PIPELINE_STAGES = ['generate', 'simulate', 'fit-linear', 'train', 'evaluate']
DATA_SPLITS = ['train', 'validation', 'test']

# 目录与文件
APP_DIR_NAME = '.birnn_app'
LOG_DIR_NAME = 'logs'

# 第三方库日志上限 (numba 编译过程在 DEBUG 下输出量极大)
THIRD_PARTY_LOG_LEVELS = {'numba': 'WARNING'}

# 错误消息
ERROR_MESSAGES = {
    'invalid-params': '生理参数无效',
    'degenerate-data': '数据退化，无法辨识',
    'non-convergence': '优化未收敛',
    'unsatisfiable-schedule': '无法生成互不重叠的进餐计划',
    'unstable-configuration': '虚拟患者状态发散',
    'shape-mismatch': '参数或输入维度不匹配',
    'loss-config': '损失函数配置无效',
    'non-finite-gradient': '梯度出现非有限值',
    'stage-failed': '流水线阶段执行失败',
    'provenance': '输入产物的配置哈希不一致',
    'unknown_error': '未知错误'
}
