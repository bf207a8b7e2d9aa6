"""
自监督预训练模型
编码器与 TaskModel 的编码器完全同构，另加 MASK 向量和逐位置的码本分类头
"""

import logging
from typing import Tuple, Union

import torch
import torch.nn as nn

from exceptions import ShapeMismatchError
from models.encoder import EncoderConfig, VisualEncoder
from tensor_core import cross_entropy
from vqvae import VqvaeModel, tokenize
from .patches import MaskPlan

logger = logging.getLogger(__name__)


class SspModel(nn.Module):
    def __init__(self, encoder_config: EncoderConfig, codebook_size: int):
        super().__init__()
        self.encoder = VisualEncoder(encoder_config)
        self.codebook_size = codebook_size
        self.mask_token = nn.Parameter(torch.zeros(1, 1, encoder_config.width))
        nn.init.trunc_normal_(self.mask_token, std=0.02)
        self.head = nn.Linear(encoder_config.width, codebook_size)
        nn.init.trunc_normal_(self.head.weight, std=0.02)
        nn.init.zeros_(self.head.bias)

    @property
    def config(self) -> EncoderConfig:
        return self.encoder.config

    def forward(self, images: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W), (B, N) -> (B, N, K) 每个位置的视觉 token logits"""
        return self.head(self.encoder(images, mask=mask, mask_token=self.mask_token))


def _mask_tensor(plan: Union[MaskPlan, torch.Tensor], batch: int) -> torch.Tensor:
    if isinstance(plan, MaskPlan):
        return plan.as_bool().unsqueeze(0).expand(batch, -1)
    return plan.bool()


def check_compatible(ssp_model: SspModel, vqvae: VqvaeModel, height: int, width: int) -> Tuple[int, int]:
    """SSP 的图块网格必须与 VQ-VAE 的 token 网格一致，码本大小必须与分类头一致"""
    grid = vqvae.grid_shape(height, width)
    patch = ssp_model.config.patch_size
    own = (height // patch, width // patch)
    if grid != own:
        raise ShapeMismatchError("ssp.grid", own, grid)
    if vqvae.codebook_size != ssp_model.codebook_size:
        raise ShapeMismatchError("ssp.codebook", (ssp_model.codebook_size,), (vqvae.codebook_size,))
    return grid


def ssp_targets(ssp_model: SspModel, vqvae: VqvaeModel, images: torch.Tensor) -> torch.Tensor:
    """冻结的 VQ-VAE 给出的 (B, N) 真值 token"""
    check_compatible(ssp_model, vqvae, images.shape[2], images.shape[3])
    return tokenize(vqvae, images).flatten(1)


def ssp_loss(
    ssp_model: SspModel,
    vqvae: VqvaeModel,
    images: torch.Tensor,
    plan: Union[MaskPlan, torch.Tensor],
    targets: torch.Tensor = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    只在被掩码位置上计算交叉熵，按掩码数平均

    Args:
        ssp_model: SSP 模型
        vqvae: 冻结的 VQ-VAE
        images: (B, C, H, W)
        plan: 所有图共用的 MaskPlan，或 (B, N) 布尔掩码
        targets: 预先算好的 (B, N) token，None 时现算

    Returns:
        (loss, logits, targets)
    """
    if targets is None:
        targets = ssp_targets(ssp_model, vqvae, images)
    else:
        check_compatible(ssp_model, vqvae, images.shape[2], images.shape[3])
    mask = _mask_tensor(plan, images.shape[0])
    if mask.shape != targets.shape:
        raise ShapeMismatchError("ssp.mask", targets.shape, mask.shape)
    logits = ssp_model(images, mask)
    return cross_entropy(logits, targets, mask), logits, targets


def masked_accuracy(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> float:
    """被掩码位置上的 top-1 准确率"""
    mask = mask.bool()
    total = int(mask.sum())
    if total == 0:
        return 0.0
    correct = (logits.argmax(dim=-1) == targets) & mask
    return int(correct.sum()) / total
