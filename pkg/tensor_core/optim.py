"""
优化器与学习率调度
AdamW（解耦权重衰减）+ 线性预热余弦退火
"""

import math
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import torch
from torch.optim.lr_scheduler import LambdaLR

from config import (
    DEFAULT_BETAS,
    DEFAULT_EPS,
    DEFAULT_GRAD_CLIP,
    DEFAULT_LR,
    DEFAULT_WEIGHT_DECAY,
)
from exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class AdamWConfig:
    lr: float = DEFAULT_LR
    betas: Tuple[float, float] = DEFAULT_BETAS
    eps: float = DEFAULT_EPS
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    grad_clip: Optional[float] = DEFAULT_GRAD_CLIP


@dataclass(frozen=True)
class LrSchedule:
    """线性预热到 base_lr，再余弦衰减到 total_steps 处为 0"""

    base_lr: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ConfigError(
                f"need 0 <= warmup_steps < total_steps, got {self.warmup_steps}, {self.total_steps}"
            )

    def factor(self, step: int) -> float:
        if step > self.total_steps:
            logger.warning(f"step {step} beyond total_steps {self.total_steps}, lr clamped to 0")
            return 0.0
        if step < self.warmup_steps:
            return step / self.warmup_steps
        progress = (step - self.warmup_steps) / (self.total_steps - self.warmup_steps)
        return 0.5 * (1.0 + math.cos(math.pi * progress))


def lr_at(schedule: LrSchedule, step: int) -> float:
    """给定步数的学习率"""
    return schedule.base_lr * schedule.factor(step)


@dataclass
class StepResult:
    applied: bool
    grad_norm: float
    diagnostic: Optional[str] = None


def build_optimizer(params: Iterable[torch.nn.Parameter], cfg: AdamWConfig) -> torch.optim.AdamW:
    return torch.optim.AdamW(
        params,
        lr=cfg.lr,
        betas=tuple(cfg.betas),
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )


def build_scheduler(optimizer: torch.optim.Optimizer, schedule: LrSchedule) -> LambdaLR:
    return LambdaLR(optimizer, lr_lambda=schedule.factor)


def _named_grads(optimizer: torch.optim.Optimizer) -> List[Tuple[int, torch.Tensor]]:
    grads = []
    index = 0
    for group in optimizer.param_groups:
        for p in group["params"]:
            if p.grad is not None:
                grads.append((index, p.grad))
            index += 1
    return grads


def adamw_step(
    optimizer: torch.optim.Optimizer,
    grad_clip: Optional[float] = DEFAULT_GRAD_CLIP,
) -> StepResult:
    """
    执行一步 AdamW 更新

    梯度含 NaN/Inf 时放弃本步并返回诊断信息；否则按全局范数裁剪后更新

    Args:
        optimizer: AdamW 优化器（梯度已由 backward 写入 .grad）
        grad_clip: 全局范数上限，None 表示不裁剪

    Returns:
        StepResult
    """
    grads = _named_grads(optimizer)
    for index, grad in grads:
        if not bool(torch.isfinite(grad).all()):
            optimizer.zero_grad(set_to_none=True)
            message = f"non-finite gradient in parameter #{index}, step skipped"
            logger.warning(message)
            return StepResult(applied=False, grad_norm=float("nan"), diagnostic=message)

    params = [p for group in optimizer.param_groups for p in group["params"] if p.grad is not None]
    if grad_clip is not None and params:
        norm = float(torch.nn.utils.clip_grad_norm_(params, grad_clip))
    elif params:
        norm = float(torch.linalg.vector_norm(torch.stack([p.grad.norm() for p in params])))
    else:
        norm = 0.0

    optimizer.step()
    return StepResult(applied=True, grad_norm=norm)
