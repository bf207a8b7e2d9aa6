"""
表格识别命令行
用法: python scripts/tsr.py <子命令> [参数]，子命令见 --help
"""

import sys
from pathlib import Path

# 添加项目根目录到路径
sys.path.insert(0, str(Path(__file__).parent.parent))

from pipeline.cli import main


if __name__ == '__main__':
    sys.exit(main())
