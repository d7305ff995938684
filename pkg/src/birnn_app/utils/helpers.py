#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
辅助工具函数
"""

import hashlib
import json
from typing import Any, Sequence

import numpy as np

from .constants import PRNG_ALGORITHM


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """
    创建可复现的随机数发生器

    同一 seed 的不同 stream 互相独立（SeedSequence 派生），
    例如场景抽样与训练子集抽样使用不同的 stream。

    Args:
        seed: 随机种子
        stream: 流编号

    Returns:
        基于 PCG64 的 numpy Generator
    """
    sequence = np.random.SeedSequence([int(seed), int(stream)])
    return np.random.Generator(np.random.PCG64(sequence))


def prng_description(seed: int, stream: int = 0) -> dict:
    """返回写入事件日志的随机数发生器描述"""
    return {'algorithm': PRNG_ALGORITHM, 'seed_sequence': [int(seed), int(stream)]}


def canonical_json(payload: Any) -> str:
    """
    生成规范化JSON字符串（键排序、无多余空白）

    Args:
        payload: 可JSON序列化的对象

    Returns:
        规范化字符串
    """
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def hash_payload(payload: Any, length: int = 16) -> str:
    """
    计算对象的SHA-256摘要

    Args:
        payload: 可JSON序列化的对象
        length: 保留的十六进制位数

    Returns:
        摘要前缀
    """
    digest = hashlib.sha256(canonical_json(payload).encode('utf-8')).hexdigest()
    return digest[:length]


def percentile(values: Sequence[float], q: float) -> float:
    """
    线性插值分位数（顺序统计量之间线性插值）

    Args:
        values: 样本
        q: 百分位 (0-100)

    Returns:
        分位数值
    """
    return float(np.percentile(np.asarray(values, dtype=np.float64), q, method='linear'))
