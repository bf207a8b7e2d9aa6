"""
自监督预训练模块
图块切分、随机掩码、掩码视觉 token 预测
"""

from .patches import MaskPlan, patchify, unpatchify, sample_mask, sample_masks, masked_count, DEFAULT_MASK_RATIO
from .model import SspModel, ssp_loss, ssp_targets, masked_accuracy, check_compatible
from .pretrain import SspConfig, pretrain, evaluate_masked_accuracy, export_encoder, tokenize_all

__all__ = [
    'MaskPlan',
    'patchify',
    'unpatchify',
    'sample_mask',
    'sample_masks',
    'masked_count',
    'DEFAULT_MASK_RATIO',
    'SspModel',
    'ssp_loss',
    'ssp_targets',
    'masked_accuracy',
    'check_compatible',
    'SspConfig',
    'pretrain',
    'evaluate_masked_accuracy',
    'export_encoder',
    'tokenize_all',
]
