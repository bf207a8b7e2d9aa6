"""
张量引擎模块
基本算子、反向传播、AdamW 优化器、学习率调度和检查点格式
"""

from .engine import primitive_set, backward, finite_difference_check, cross_entropy, all_finite
from .optim import AdamWConfig, LrSchedule, StepResult, lr_at, build_optimizer, build_scheduler, adamw_step
from .checkpoint import save_checkpoint, load_checkpoint
from .images import to_image_tensor, to_raster, check_grid
from .runlog import MetricsLog

__all__ = [
    'primitive_set',
    'backward',
    'finite_difference_check',
    'cross_entropy',
    'all_finite',
    'AdamWConfig',
    'LrSchedule',
    'StepResult',
    'lr_at',
    'build_optimizer',
    'build_scheduler',
    'adamw_step',
    'save_checkpoint',
    'load_checkpoint',
    'to_image_tensor',
    'to_raster',
    'check_grid',
    'MetricsLog',
]
