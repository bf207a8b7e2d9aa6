"""
VQ-VAE 训练
通过 Gumbel-Softmax 松弛最小化像素 MSE（单位方差高斯似然），温度按指数退火
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from config import DIVERGENCE_FACTOR, seed_everything
from exceptions import CheckpointError, CorpusError, TrainingDivergedError
from tensor_core import (
    AdamWConfig,
    LrSchedule,
    MetricsLog,
    adamw_step,
    build_optimizer,
    build_scheduler,
    load_checkpoint,
    save_checkpoint,
    to_image_tensor,
)
from .model import VqvaeConfig, VqvaeModel

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "vqvae"

@dataclass
class VqvaeTrainConfig:
    model: VqvaeConfig = field(default_factory=VqvaeConfig)
    steps: int = 1000
    batch_size: int = 16
    lr: float = 1e-3
    weight_decay: float = 0.0
    warmup_steps: int = 20
    grad_clip: Optional[float] = 1.0
    tau_start: float = 1.0
    tau_min: float = 0.0625
    anneal_fraction: float = 0.5
    straight_through: bool = False
    log_every: int = 50


def temperature_at(cfg: VqvaeTrainConfig, step: int) -> float:
    """前 anneal_fraction 的训练步内从 tau_start 指数衰减到 tau_min，之后固定"""
    anneal_steps = max(1, int(cfg.steps * cfg.anneal_fraction))
    progress = min(1.0, step / anneal_steps)
    return cfg.tau_start * (cfg.tau_min / cfg.tau_start) ** progress


def train_vqvae(
    images: List[np.ndarray],
    cfg: Optional[VqvaeTrainConfig] = None,
    seed: int = 42,
    metrics_path: Optional[Path] = None,
    show_progress: bool = True,
) -> Tuple[VqvaeModel, List[float]]:
    """
    训练 VQ-VAE

    Args:
        images: HxWxC 图像列表
        cfg: 训练配置
        seed: 随机种子
        metrics_path: 指标 CSV 路径（step, loss, lr, tau）
        show_progress: 是否显示进度条

    Returns:
        (模型, 每步损失)

    Raises:
        TrainingDivergedError: 损失超过初始损失 10 倍或不是有限值
    """
    cfg = cfg or VqvaeTrainConfig()
    if not images:
        raise CorpusError("train_vqvae needs at least one image")
    seed_everything(seed)
    model = VqvaeModel(cfg.model)
    model.train()

    data = to_image_tensor(images)
    model.grid_shape(data.shape[2], data.shape[3])
    generator = torch.Generator().manual_seed(seed)

    optimizer = build_optimizer(model.parameters(), AdamWConfig(lr=cfg.lr, weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip))
    scheduler = build_scheduler(optimizer, LrSchedule(cfg.lr, min(cfg.warmup_steps, cfg.steps - 1), cfg.steps))
    log = MetricsLog(['step', 'loss', 'lr', 'tau'], metrics_path)

    losses: List[float] = []
    initial_loss = None
    steps = range(cfg.steps)
    if show_progress:
        steps = tqdm(steps, desc="Training VQ-VAE")

    for step in steps:
        tau = temperature_at(cfg, step)
        index = torch.randint(0, data.shape[0], (min(cfg.batch_size, data.shape[0]),), generator=generator)
        batch = data[index]
        recon, _ = model(batch, tau, generator=generator, hard=cfg.straight_through)
        loss = F.mse_loss(recon, batch)
        value = float(loss.detach())

        if initial_loss is None:
            initial_loss = value
        if not math.isfinite(value) or value > DIVERGENCE_FACTOR * initial_loss:
            logger.error(f"✗ VQ-VAE 训练发散: step={step}, loss={value:.6f}, initial={initial_loss:.6f}, tau={tau:.4f}")
            raise TrainingDivergedError(step, value, initial_loss)

        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        result = adamw_step(optimizer, cfg.grad_clip)
        if not result.applied:
            logger.warning(f"step {step}: {result.diagnostic}")
        lr = optimizer.param_groups[0]['lr']
        scheduler.step()

        losses.append(value)
        log.append(step=step, loss=value, lr=lr, tau=tau)
        if cfg.log_every and step % cfg.log_every == 0:
            logger.info(f"[vqvae] step {step}/{cfg.steps} loss={value:.6f} tau={tau:.4f} lr={lr:.2e}")

    model.eval()
    logger.info(f"✓ VQ-VAE 训练完成: 初始损失 {losses[0]:.6f} -> 最终损失 {losses[-1]:.6f}")
    return model, losses


def save_vqvae(path: Path, model: VqvaeModel, step: int = 0) -> Path:
    metadata = {'kind': CHECKPOINT_KIND, 'config': asdict(model.config), 'step': step}
    return save_checkpoint(path, model.state_dict(), metadata)


def load_vqvae(path: Path) -> VqvaeModel:
    tensors, metadata = load_checkpoint(path)
    if metadata.get('kind') != CHECKPOINT_KIND:
        raise CheckpointError(f"{path} is not a VQ-VAE checkpoint (kind={metadata.get('kind')!r})")
    cfg = dict(metadata['config'])
    cfg['hidden_channels'] = tuple(cfg['hidden_channels'])
    model = VqvaeModel(VqvaeConfig(**cfg))
    model.load_state_dict(tensors)
    model.eval()
    return model
