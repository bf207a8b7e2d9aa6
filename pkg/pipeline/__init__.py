"""
推理流水线模块
端到端推理、单元格裁剪、标注检查、语料评估和命令行入口
"""

from .crop import CropResult, crop, clamp_bbox
from .datasets import build_task_samples, task_vocab, split_samples, load_images
from .infer import InferenceResult, infer
from .lint import Finding, LintReport, lint_annotation, lint_corpus, FINDING_KINDS
from .evaluate import TaskModels, evaluate_corpus, evaluate_sample, format_metrics_table
from .cli import build_parser, main

__all__ = [
    'CropResult',
    'crop',
    'clamp_bbox',
    'build_task_samples',
    'task_vocab',
    'split_samples',
    'load_images',
    'InferenceResult',
    'infer',
    'Finding',
    'LintReport',
    'lint_annotation',
    'lint_corpus',
    'FINDING_KINDS',
    'TaskModels',
    'evaluate_corpus',
    'evaluate_sample',
    'format_metrics_table',
    'build_parser',
    'main',
]
