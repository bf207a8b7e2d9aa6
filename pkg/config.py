"""
配置管理模块
管理数据路径、随机种子、模型预设和训练默认参数
"""

import os
import json
import random
import logging
import dataclasses
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import torch
from dotenv import load_dotenv

from exceptions import ConfigError

# 加载环境变量
load_dotenv()

logger = logging.getLogger(__name__)

# 项目根目录
PROJECT_ROOT = Path(__file__).parent
DATA_DIR = Path(os.getenv("TSR_DATA_DIR", str(PROJECT_ROOT / "data")))
CORPUS_DIR = DATA_DIR / "corpora"
CHECKPOINT_DIR = DATA_DIR / "checkpoints"
RUNS_DIR = DATA_DIR / "runs"
VOCAB_DIR = PROJECT_ROOT / "vocab"

# 创建必要的目录
DATA_DIR.mkdir(parents=True, exist_ok=True)
CORPUS_DIR.mkdir(exist_ok=True)
CHECKPOINT_DIR.mkdir(exist_ok=True)
RUNS_DIR.mkdir(exist_ok=True)

# ============================================================
# 通用配置
# ============================================================

# 日志配置
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

DEFAULT_SEED = int(os.getenv("TSR_SEED", "42"))
NUM_THREADS = int(os.getenv("TSR_NUM_THREADS", "1"))

# ============================================================
# 图像与序列配置
# ============================================================

# 桌面规模默认 112x112（7x7 patch 网格），448 与原始设置一致
IMAGE_SIZE = int(os.getenv("TSR_IMAGE_SIZE", "112"))
PATCH_SIZE = 16
# 内容识别的裁剪输入尺寸；与 IMAGE_SIZE 相同时三个任务可共用一个预训练编码器
CONTENT_IMAGE_SIZE = int(os.getenv("TSR_CONTENT_IMAGE_SIZE", str(IMAGE_SIZE)))

TASK_MAX_LENGTH = {
    "structure": 512,
    "bbox": 1024,
    "content": 200,
}
TASKS = tuple(TASK_MAX_LENGTH)

# 编码器预设: (层数, 注意力头数, 隐藏维度)
ENCODER_PRESETS = {
    "tiny": {"layers": 2, "heads": 4, "width": 128},
    "base": {"layers": 4, "heads": 8, "width": 512},
    "large": {"layers": 12, "heads": 12, "width": 768},
}
DECODER_LAYERS = 4

# ============================================================
# 优化器默认参数
# ============================================================

DEFAULT_LR = 3e-4
DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_GRAD_CLIP = 1.0
DEFAULT_WARMUP_FRACTION = 0.05
DEFAULT_DROPOUT = 0.1

# 损失超过初始损失的这个倍数即判定训练发散
DIVERGENCE_FACTOR = 10.0

# 标注检查
LINT_OVERLAP_THRESHOLD = 0.1

# ============================================================
# 辅助函数
# ============================================================

def seed_everything(seed: int, num_threads: Optional[int] = None) -> None:
    """
    固定所有随机源，保证同一种子下结果逐位一致

    Args:
        seed: 随机种子
        num_threads: torch 线程数，None 表示使用 NUM_THREADS
    """
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(num_threads or NUM_THREADS)


def load_json_config(path: Optional[str]) -> Dict[str, Any]:
    """
    读取 JSON 配置文件

    Args:
        path: 配置文件路径，None 表示空配置

    Returns:
        配置字典
    """
    if not path:
        return {}

    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {config_path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config root must be an object: {config_path}")
    return data


def apply_overrides(obj: Any, overrides: Optional[Dict[str, Any]]) -> Any:
    """
    用字典覆盖 dataclass 配置的字段，返回新对象

    未知字段会被拒绝，避免拼写错误被静默忽略
    """
    if not overrides:
        return obj

    known = {f.name for f in dataclasses.fields(obj)}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ConfigError(
            f"Unknown config keys for {type(obj).__name__}: {', '.join(unknown)}",
            keys=unknown,
        )

    values = {}
    for key, value in overrides.items():
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            value = apply_overrides(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    return dataclasses.replace(obj, **values)


def config_to_dict(obj: Any) -> Dict[str, Any]:
    """dataclass 配置转为可 JSON 序列化的字典"""
    return json.loads(json.dumps(dataclasses.asdict(obj)))
