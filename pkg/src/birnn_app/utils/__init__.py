#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
工具函数模块
"""

from .logger import setup_logger
from .helpers import *
from .constants import *
from .errors import *

__all__ = ['setup_logger']
