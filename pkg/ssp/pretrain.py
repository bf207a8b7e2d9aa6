"""
掩码视觉 token 预训练
VQ-VAE 冻结，只训练编码器、MASK 向量和分类头；结束后导出仅含编码器的检查点
"""

import math
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import torch
from tqdm import tqdm

from config import DEFAULT_DROPOUT, DEFAULT_GRAD_CLIP, DEFAULT_WEIGHT_DECAY, seed_everything
from exceptions import CorpusError, EncoderMismatchError, TrainingDivergedError
from models.encoder import EncoderConfig
from models.task_model import save_encoder
from tensor_core import (
    AdamWConfig,
    LrSchedule,
    MetricsLog,
    adamw_step,
    build_optimizer,
    build_scheduler,
    to_image_tensor,
)
from vqvae import VqvaeModel, tokenize
from .model import SspModel, check_compatible, masked_accuracy, ssp_loss
from .patches import DEFAULT_MASK_RATIO, sample_masks

logger = logging.getLogger(__name__)

METRICS_FIELDS = ('step', 'loss', 'lr', 'masked_accuracy')


@dataclass
class SspConfig:
    preset: str = 'tiny'
    variant: str = 'linear_projection'
    mask_ratio: float = DEFAULT_MASK_RATIO
    steps: int = 2000
    batch_size: int = 16
    lr: float = 5e-4
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    warmup_steps: int = 50
    grad_clip: Optional[float] = DEFAULT_GRAD_CLIP
    dropout: float = DEFAULT_DROPOUT
    log_every: int = 50

    def encoder_config(self, image_size: int) -> EncoderConfig:
        return EncoderConfig.preset(self.preset, variant=self.variant, image_size=image_size, dropout=self.dropout)


@torch.no_grad()
def tokenize_all(vqvae: VqvaeModel, data: torch.Tensor, batch_size: int = 64) -> torch.Tensor:
    """整个语料的 (M, N) 视觉 token，预训练期间不变"""
    vqvae.eval()
    chunks = [tokenize(vqvae, data[i:i + batch_size]).flatten(1) for i in range(0, data.shape[0], batch_size)]
    return torch.cat(chunks)


def pretrain(
    images: List[np.ndarray],
    vqvae: VqvaeModel,
    cfg: Optional[SspConfig] = None,
    seed: int = 0,
    metrics_path: Optional[Path] = None,
    show_progress: bool = True,
) -> Tuple[SspModel, MetricsLog]:
    """
    预训练视觉编码器

    Args:
        images: HxWxC 图像（不需要标注）
        vqvae: 已训练的 VQ-VAE，提供真值 token
        cfg: 预训练配置
        seed: 随机种子，决定初始化、采样和掩码
        metrics_path: 指标 CSV 路径
        show_progress: 是否显示进度条

    Returns:
        (SSP 模型, 指标记录)
    """
    cfg = cfg or SspConfig()
    if not images:
        raise CorpusError("pretrain needs at least one image")
    seed_everything(seed)

    data = to_image_tensor(images)
    model = SspModel(cfg.encoder_config(data.shape[-1]), vqvae.codebook_size)
    check_compatible(model, vqvae, data.shape[2], data.shape[3])
    for p in vqvae.parameters():
        p.requires_grad_(False)
    targets = tokenize_all(vqvae, data)

    optimizer = build_optimizer(
        model.parameters(),
        AdamWConfig(lr=cfg.lr, weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip),
    )
    scheduler = build_scheduler(optimizer, LrSchedule(cfg.lr, min(cfg.warmup_steps, cfg.steps - 1), cfg.steps))
    metrics = MetricsLog(METRICS_FIELDS, metrics_path)
    generator = torch.Generator().manual_seed(seed)
    num_patches = model.config.num_patches

    logger.info("=" * 80)
    logger.info(f"SSP 预训练: {data.shape[0]} 张图像, {num_patches} 个图块/图, 掩码比例 {cfg.mask_ratio}, K={vqvae.codebook_size}")
    logger.info(f"均匀预测的损失 ln K = {math.log(vqvae.codebook_size):.4f}")
    logger.info("=" * 80)

    model.train()
    initial_loss = None
    steps = range(cfg.steps)
    if show_progress:
        steps = tqdm(steps, desc="SSP 预训练")
    for step in steps:
        index = torch.randint(0, data.shape[0], (min(cfg.batch_size, data.shape[0]),), generator=generator)
        mask = sample_masks(len(index), num_patches, cfg.mask_ratio, generator)
        loss, logits, batch_targets = ssp_loss(model, vqvae, data[index], mask, targets[index])
        value = float(loss.detach())
        if initial_loss is None:
            initial_loss = value
            logger.info(f"初始掩码损失 {value:.4f}")
        if not math.isfinite(value):
            logger.error(f"✗ SSP 训练发散: step={step}, loss={value}")
            raise TrainingDivergedError(step, value, initial_loss)

        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        lr = optimizer.param_groups[0]['lr']
        result = adamw_step(optimizer, cfg.grad_clip)
        if not result.applied:
            logger.warning(f"step {step}: {result.diagnostic}")
        scheduler.step()

        accuracy = masked_accuracy(logits.detach(), batch_targets, mask)
        metrics.append(step=step, loss=value, lr=lr, masked_accuracy=accuracy)
        if cfg.log_every and step % cfg.log_every == 0:
            logger.info(f"[ssp] step {step}/{cfg.steps} loss={value:.4f} masked_acc={accuracy:.4f} lr={lr:.2e}")

    model.eval()
    final = evaluate_masked_accuracy(model, data, targets, cfg.mask_ratio, seed=seed + 1)
    chance = 1.0 / vqvae.codebook_size
    logger.info(f"✓ SSP 完成: 掩码 top-1 准确率 {final:.4f} (随机水平 {chance:.4f}, {final / chance:.1f}x)")
    return model, metrics


@torch.no_grad()
def evaluate_masked_accuracy(
    model: SspModel,
    data: torch.Tensor,
    targets: torch.Tensor,
    mask_ratio: float = DEFAULT_MASK_RATIO,
    seed: int = 0,
    batch_size: int = 32,
) -> float:
    """在整个数据上用新掩码评估 top-1 准确率"""
    model.eval()
    generator = torch.Generator().manual_seed(seed)
    correct = total = 0
    for start in range(0, data.shape[0], batch_size):
        images = data[start:start + batch_size]
        mask = sample_masks(images.shape[0], model.config.num_patches, mask_ratio, generator)
        logits = model(images, mask)
        hits = (logits.argmax(dim=-1) == targets[start:start + batch_size]) & mask
        correct += int(hits.sum())
        total += int(mask.sum())
    return correct / max(total, 1)


def export_encoder(
    model: SspModel,
    path: Path,
    target_config: Optional[EncoderConfig] = None,
    metadata: Optional[dict] = None,
) -> Path:
    """
    导出编码器权重（图块嵌入 + 位置编码 + 编码层）

    Raises:
        EncoderMismatchError: 给定目标配置且形状相关字段不一致
    """
    if target_config is not None:
        source = model.config.shape_signature()
        target = target_config.shape_signature()
        diff = {k: (source[k], target[k]) for k in target if source.get(k) != target[k]}
        if diff:
            logger.error(f"✗ 导出目标与预训练编码器不一致: {diff}")
            raise EncoderMismatchError(f"encoder export target differs: {diff}", {'config': diff, 'tensors': {}})
    out = save_encoder(Path(path), model.encoder, {'source': 'ssp', 'codebook_size': model.codebook_size, **(metadata or {})})
    logger.info(f"✓ 编码器已导出: {out} ({asdict(model.config)['variant']})")
    return out
