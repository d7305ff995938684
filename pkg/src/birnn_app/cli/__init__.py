#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行界面模块
"""

from .commands import build_parser, main

__all__ = ['build_parser', 'main']
