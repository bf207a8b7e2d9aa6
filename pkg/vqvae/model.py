"""
VQ-VAE 图像分词器
卷积编码器输出每个网格位置的 K 路 logits，Gumbel-Softmax 松弛后查码本，
转置卷积解码器重建图像
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from config import IMAGE_SIZE, PATCH_SIZE
from exceptions import ConfigError, ShapeMismatchError
from tensor_core import check_grid, to_image_tensor

logger = logging.getLogger(__name__)

# 4 个 stride-2 卷积块，总步长 16
DOWNSAMPLE_BLOCKS = 4


@dataclass
class VqvaeConfig:
    codebook_size: int = 256
    code_dim: int = 64
    hidden_channels: Tuple[int, ...] = (32, 64, 128)
    in_channels: int = 3
    image_size: int = IMAGE_SIZE
    patch_size: int = PATCH_SIZE

    def validate(self) -> None:
        if self.codebook_size < 2:
            raise ConfigError(f"codebook_size must be >= 2, got {self.codebook_size}", ['codebook_size'])
        if self.patch_size != 2 ** DOWNSAMPLE_BLOCKS:
            raise ConfigError(f"patch_size must be {2 ** DOWNSAMPLE_BLOCKS} for the conv stack", ['patch_size'])
        if len(self.hidden_channels) != DOWNSAMPLE_BLOCKS - 1:
            raise ConfigError("hidden_channels needs 3 widths", ['hidden_channels'])


def _down(c_in: int, c_out: int, last: bool = False) -> nn.Module:
    conv = nn.Conv2d(c_in, c_out, kernel_size=4, stride=2, padding=1)
    return conv if last else nn.Sequential(conv, nn.ReLU())


def _up(c_in: int, c_out: int, last: bool = False) -> nn.Module:
    conv = nn.ConvTranspose2d(c_in, c_out, kernel_size=4, stride=2, padding=1)
    return conv if last else nn.Sequential(conv, nn.ReLU())


class VqvaeModel(nn.Module):
    """q(z|I) 由 encoder + to_logits 给出，p(I|z) 由 codebook + decoder 给出"""

    def __init__(self, config: Optional[VqvaeConfig] = None):
        super().__init__()
        self.config = config or VqvaeConfig()
        self.config.validate()
        cfg = self.config
        widths = [cfg.in_channels, *cfg.hidden_channels, cfg.code_dim]

        self.encoder = nn.Sequential(*[
            _down(widths[i], widths[i + 1]) for i in range(DOWNSAMPLE_BLOCKS)
        ])
        self.to_logits = nn.Conv2d(cfg.code_dim, cfg.codebook_size, kernel_size=1)
        self.codebook = nn.Embedding(cfg.codebook_size, cfg.code_dim)
        nn.init.uniform_(self.codebook.weight, -1.0 / cfg.codebook_size, 1.0 / cfg.codebook_size)

        back = list(reversed(widths))
        self.decoder = nn.Sequential(*[
            _up(back[i], back[i + 1], last=i == DOWNSAMPLE_BLOCKS - 1) for i in range(DOWNSAMPLE_BLOCKS)
        ])

    @property
    def codebook_size(self) -> int:
        return self.config.codebook_size

    def grid_shape(self, height: int, width: int) -> Tuple[int, int]:
        check_grid("vqvae.grid", height, width, self.config.patch_size)
        return height // self.config.patch_size, width // self.config.patch_size

    def encode_logits(self, images: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) -> (B, H/P, W/P, K)"""
        if images.dim() != 4 or images.shape[1] != self.config.in_channels:
            raise ShapeMismatchError("vqvae.encode_logits", images.shape, (None, self.config.in_channels, None, None))
        self.grid_shape(images.shape[2], images.shape[3])
        logits = self.to_logits(self.encoder(images))
        return logits.permute(0, 2, 3, 1)

    def decode(self, weights: torch.Tensor) -> torch.Tensor:
        """软解码：码向量 = weights · Z，(B, h, w, K) -> (B, C, h*P, w*P)"""
        if weights.dim() != 4 or weights.shape[-1] != self.codebook_size:
            raise ShapeMismatchError("vqvae.decode", weights.shape, (None, None, None, self.codebook_size))
        codes = weights @ self.codebook.weight
        return torch.sigmoid(self.decoder(codes.permute(0, 3, 1, 2)))

    def decode_indices(self, indices: torch.Tensor) -> torch.Tensor:
        """硬解码：直接按下标查码本行，(B, h, w) -> (B, C, h*P, w*P)"""
        if indices.dim() != 3:
            raise ShapeMismatchError("vqvae.decode_indices", indices.shape, (None, None, None))
        codes = self.codebook(indices)
        return torch.sigmoid(self.decoder(codes.permute(0, 3, 1, 2)))

    def forward(
        self,
        images: torch.Tensor,
        tau: float,
        generator: Optional[torch.Generator] = None,
        hard: bool = False,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        logits = self.encode_logits(images)
        weights = gumbel_softmax(logits, tau, generator=generator, hard=hard)
        return self.decode(weights), logits


def gumbel_noise(shape, generator: Optional[torch.Generator] = None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    tiny = torch.finfo(dtype).tiny
    return -torch.log((-torch.log(u.clamp_min(tiny))).clamp_min(tiny))


def gumbel_softmax(
    logits: torch.Tensor,
    tau: float,
    generator: Optional[torch.Generator] = None,
    noise: Optional[torch.Tensor] = None,
    hard: bool = False,
) -> torch.Tensor:
    """
    Gumbel-Softmax 松弛：softmax((logits + g) / tau)

    Args:
        logits: (..., K)
        tau: 温度，必须 > 0
        generator: 噪声随机源
        noise: 指定噪声（例如全 0），给出时不再采样
        hard: 直通估计，前向为 one-hot，反向走软权重

    Returns:
        与 logits 同形的权重，最后一维和为 1
    """
    if not tau > 0:
        raise ConfigError(f"gumbel temperature must be > 0, got {tau}", ['tau'])
    g = noise if noise is not None else gumbel_noise(logits.shape, generator, logits.dtype)
    soft = F.softmax((logits + g) / tau, dim=-1)
    if not hard:
        return soft
    index = soft.argmax(dim=-1, keepdim=True)
    one_hot = torch.zeros_like(soft).scatter_(-1, index, 1.0)
    return one_hot + soft - soft.detach()


def quantize(logits: torch.Tensor) -> torch.Tensor:
    """逐格 argmax；并列时取最小下标"""
    return logits.argmax(dim=-1)


@torch.no_grad()
def tokenize(model: VqvaeModel, images: torch.Tensor) -> torch.Tensor:
    """(B, C, H, W) -> (B, H/P, W/P) 视觉 token"""
    return quantize(model.encode_logits(images))


@torch.no_grad()
def reconstruct(model: VqvaeModel, images: torch.Tensor) -> torch.Tensor:
    return model.decode_indices(tokenize(model, images))


@torch.no_grad()
def reconstruction_mse(model: VqvaeModel, images: List[np.ndarray], batch_size: int = 32) -> float:
    """按硬量化重建的逐像素均方误差"""
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(images), batch_size):
        batch = to_image_tensor(images[start:start + batch_size])
        total += float(F.mse_loss(reconstruct(model, batch), batch, reduction='sum'))
        count += batch.numel()
    return total / max(count, 1)


def dump_token_grid(model: VqvaeModel, image: np.ndarray) -> Tuple[np.ndarray, str]:
    """
    单张图像的视觉 token 网格

    Returns:
        ((H/P, W/P) 整数网格, 文本形式：首行列号，每行行号后接该行 token)
    """
    model.eval()
    grid = tokenize(model, to_image_tensor([image]))[0].cpu().numpy().astype(np.int64)
    return grid, format_token_grid(grid)


def format_token_grid(grid: np.ndarray) -> str:
    width = max(len(str(int(grid.max()))) if grid.size else 1, 2)
    header = ' ' * 4 + ' '.join(f"{c:>{width}d}" for c in range(grid.shape[1]))
    rows = [f"{r:>3d} " + ' '.join(f"{int(v):>{width}d}" for v in grid[r]) for r in range(grid.shape[0])]
    return '\n'.join([header, *rows]) + '\n'


def save_token_grid(path, grid: np.ndarray) -> None:
    """空格分隔的整数文本，每行一个网格行"""
    with open(path, 'w', encoding='utf-8') as f:
        for row in grid:
            f.write(' '.join(str(int(v)) for v in row) + '\n')
