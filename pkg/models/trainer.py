"""
任务模型训练
教师强制 + 交叉熵，AdamW 与线性预热余弦调度；编码器可从零初始化或载入自监督预训练权重
"""

import math
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from tqdm import tqdm

from codec import Vocab
from config import (
    DECODER_LAYERS,
    DEFAULT_DROPOUT,
    DEFAULT_GRAD_CLIP,
    DEFAULT_LR,
    DEFAULT_WARMUP_FRACTION,
    DEFAULT_WEIGHT_DECAY,
    DIVERGENCE_FACTOR,
    TASK_MAX_LENGTH,
    seed_everything,
)
from exceptions import CodecError, ConfigError, SequenceOverflowError, TrainingDivergedError
from tensor_core import (
    AdamWConfig,
    LrSchedule,
    MetricsLog,
    adamw_step,
    build_optimizer,
    build_scheduler,
    to_image_tensor,
)
from .encoder import EncoderConfig
from .task_model import TaskModel, TaskModelConfig, load_ssp_encoder, pad_targets, token_accuracy

logger = logging.getLogger(__name__)

METRICS_FIELDS = ('step', 'epoch', 'loss', 'lr', 'token_accuracy', 'grad_norm', 'applied')
INIT_MODES = ('scratch', 'ssp')


@dataclass
class TaskSample:
    """一个训练样本：HWC float 图像和以 BOS 开头、EOS 结尾的 id 序列"""
    image: np.ndarray
    ids: List[int]


@dataclass
class TrainConfig:
    preset: str = 'tiny'
    variant: str = 'linear_projection'
    epochs: int = 30
    batch_size: int = 8
    lr: float = DEFAULT_LR
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION
    grad_clip: Optional[float] = DEFAULT_GRAD_CLIP
    dropout: float = DEFAULT_DROPOUT
    decoder_layers: int = DECODER_LAYERS
    max_steps: Optional[int] = None
    log_every: int = 20

    def validate(self) -> None:
        problems = []
        if self.epochs < 1:
            problems.append(f"epochs={self.epochs}")
        if self.batch_size < 1:
            problems.append(f"batch_size={self.batch_size}")
        if not 0 <= self.warmup_fraction < 1:
            problems.append(f"warmup_fraction={self.warmup_fraction}")
        if self.max_steps is not None and self.max_steps < 1:
            problems.append(f"max_steps={self.max_steps}")
        if problems:
            raise ConfigError("invalid train config: " + ", ".join(problems), problems)


def check_samples(task: str, samples: Sequence[TaskSample], vocab: Vocab) -> None:
    """样本的 id 必须来自同一个词表且不超过任务长度上限"""
    if not samples:
        raise ConfigError(f"no training samples for task {task}")
    max_length = TASK_MAX_LENGTH[task]
    size = len(vocab)
    for i, sample in enumerate(samples):
        ids = sample.ids
        if len(ids) < 2 or ids[0] != vocab.bos_id or ids[-1] != vocab.eos_id:
            raise CodecError(f"sample {i}: sequence must start with BOS and end with EOS")
        if len(ids) > max_length:
            raise SequenceOverflowError(task, max_length, len(ids) - 1)
        bad = [t for t in ids if not 0 <= t < size]
        if bad:
            raise CodecError(f"sample {i}: ids {bad[:5]} outside vocab {vocab.name} (size {size})")


def build_task_model(task: str, vocab: Vocab, cfg: TrainConfig, image_size: int) -> TaskModel:
    encoder = EncoderConfig.preset(cfg.preset, variant=cfg.variant, image_size=image_size, dropout=cfg.dropout)
    config = TaskModelConfig(task=task, encoder=encoder, decoder_layers=cfg.decoder_layers, dropout=cfg.dropout)
    return TaskModel(config, vocab)


def train_task(
    task: str,
    samples: Sequence[TaskSample],
    vocab: Vocab,
    cfg: Optional[TrainConfig] = None,
    init: str = 'scratch',
    ssp_checkpoint: Optional[Path] = None,
    seed: int = 0,
    metrics_path: Optional[Path] = None,
    show_progress: bool = True,
) -> Tuple[TaskModel, MetricsLog]:
    """
    训练一个任务模型

    Args:
        task: 'structure' / 'bbox' / 'content'
        samples: 训练样本，图像尺寸一致
        vocab: 该任务的词表，样本 id 必须由它编码
        cfg: 训练配置
        init: 'scratch' 随机初始化编码器；'ssp' 从 ssp_checkpoint 载入
        ssp_checkpoint: 预训练编码器检查点
        seed: 随机种子，决定初始化和样本顺序
        metrics_path: 指标 CSV 路径
        show_progress: 是否显示进度条

    Returns:
        (训练好的模型, 指标记录)

    Raises:
        TrainingDivergedError: 损失不是有限值或超过初始损失 10 倍
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    if task not in TASK_MAX_LENGTH:
        raise ConfigError(f"unknown task {task!r}, expected one of {list(TASK_MAX_LENGTH)}", [task])
    if init not in INIT_MODES:
        raise ConfigError(f"unknown init {init!r}, expected one of {list(INIT_MODES)}", [init])
    if init == 'ssp' and ssp_checkpoint is None:
        raise ConfigError("init='ssp' needs an encoder checkpoint", ['ssp_checkpoint'])
    check_samples(task, samples, vocab)

    seed_everything(seed)
    images = to_image_tensor([s.image for s in samples])
    model = build_task_model(task, vocab, cfg, image_size=images.shape[-1])
    if init == 'ssp':
        load_ssp_encoder(model, Path(ssp_checkpoint))

    n = len(samples)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    if cfg.max_steps is not None:
        total_steps = min(total_steps, cfg.max_steps)
    warmup = int(total_steps * cfg.warmup_fraction)

    optimizer = build_optimizer(
        model.parameters(),
        AdamWConfig(lr=cfg.lr, weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip),
    )
    scheduler = build_scheduler(optimizer, LrSchedule(cfg.lr, warmup, total_steps))
    metrics = MetricsLog(METRICS_FIELDS, metrics_path)
    generator = torch.Generator().manual_seed(seed)

    logger.info("=" * 80)
    logger.info(f"训练 {task} 模型: {n} 个样本, {total_steps} 步, init={init}, 词表 {vocab.name}({len(vocab)})")
    logger.info("=" * 80)

    step = 0
    initial_loss = None
    skipped = 0
    pbar = tqdm(total=total_steps, desc=f"训练 {task}", disable=not show_progress)
    model.train()
    for epoch in range(cfg.epochs):
        if step >= total_steps:
            break
        order = torch.randperm(n, generator=generator).tolist()
        epoch_correct = epoch_total = 0
        for start in range(0, n, cfg.batch_size):
            if step >= total_steps:
                break
            batch = order[start:start + cfg.batch_size]
            targets = pad_targets([samples[i].ids for i in batch], vocab.pad_id)
            loss, logits = model.loss(images[batch], targets)
            value = float(loss.detach())
            if initial_loss is None:
                initial_loss = value
            if not math.isfinite(value) or value > DIVERGENCE_FACTOR * initial_loss:
                pbar.close()
                logger.error(f"✗ {task} 训练发散: step={step}, loss={value:.6f}, initial={initial_loss:.6f}")
                raise TrainingDivergedError(step, value, initial_loss)

            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            lr = optimizer.param_groups[0]['lr']
            result = adamw_step(optimizer, cfg.grad_clip)
            # 被跳过的一步仍占用步数预算，但不推进学习率调度
            if result.applied:
                scheduler.step()
            else:
                skipped += 1
                logger.warning(f"step {step + 1}: {result.diagnostic}")
            step += 1

            correct, total = token_accuracy(logits.detach(), targets, vocab.pad_id)
            epoch_correct += correct
            epoch_total += total
            metrics.append(step=step, epoch=epoch, loss=value, lr=lr, token_accuracy=correct / max(total, 1),
                           grad_norm=result.grad_norm, applied=int(result.applied))
            if step % cfg.log_every == 0:
                logger.info(f"  step {step}/{total_steps} loss={value:.4f} lr={lr:.2e} acc={correct / max(total, 1):.3f}")
            pbar.update(1)
        logger.info(f"  epoch {epoch + 1}: token accuracy {epoch_correct / max(epoch_total, 1):.4f}")
    pbar.close()
    if skipped:
        logger.warning(f"✗ {skipped}/{step} 步因梯度非有限值被跳过")

    model.eval()
    logger.info(f"✓ {task} 训练完成，最终 loss {metrics.last().get('loss', float('nan')):.4f}")
    return model, metrics
