#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
BI-RNN血糖动力学建模工具
主程序入口文件

版本: 1.0.0
"""

import sys
import os

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

try:
  from birnn_app.cli import main as cli_main
except ImportError as e:
  print(f"导入模块失败: {e}")
  sys.exit(1)


def main():
  """主函数"""
  sys.exit(cli_main())


if __name__ == "__main__":
  main()
