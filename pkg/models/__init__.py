"""
任务模型模块
视觉编码器、任务解码器、贪心解码和训练
"""

from .encoder import EncoderConfig, VisualEncoder, HybridStem, count_parameters, VARIANTS
from .decoder import TaskDecoder, causal_mask
from .task_model import (
    TaskModel,
    TaskModelConfig,
    token_accuracy,
    pad_targets,
    save_task_model,
    load_task_model,
    save_encoder,
    load_ssp_encoder,
)
from .decode import DecodeResult, greedy_decode
from .trainer import TaskSample, TrainConfig, build_task_model, check_samples, train_task

__all__ = [
    'EncoderConfig',
    'VisualEncoder',
    'HybridStem',
    'count_parameters',
    'VARIANTS',
    'TaskDecoder',
    'causal_mask',
    'TaskModel',
    'TaskModelConfig',
    'token_accuracy',
    'pad_targets',
    'save_task_model',
    'load_task_model',
    'save_encoder',
    'load_ssp_encoder',
    'DecodeResult',
    'greedy_decode',
    'TaskSample',
    'TrainConfig',
    'build_task_model',
    'check_samples',
    'train_task',
]
