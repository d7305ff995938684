#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
生物信息循环神经网络 (BI-RNN) 血糖-胰岛素动力学建模工具包
"""

__version__ = "1.0.0"
__description__ = "基于GRU与五状态房室模型的血糖-胰岛素动力学建模与评估工具"
