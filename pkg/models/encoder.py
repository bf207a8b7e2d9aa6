"""
视觉编码器
线性投影（PxP 卷积，步长 P）或混合卷积前端（4 个残差块，总步长 16），
加一维可学习位置编码和 pre-norm Transformer 编码层
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import torch
import torch.nn as nn
from torchvision.models.resnet import BasicBlock, conv1x1

from config import DEFAULT_DROPOUT, ENCODER_PRESETS, IMAGE_SIZE, PATCH_SIZE
from exceptions import ConfigError, ShapeMismatchError
from tensor_core import check_grid

logger = logging.getLogger(__name__)

VARIANTS = ('linear_projection', 'hybrid_conv_stem')
HYBRID_WIDTHS = (32, 64, 128, 128)


@dataclass
class EncoderConfig:
    variant: str = 'linear_projection'
    layers: int = 2
    heads: int = 4
    width: int = 128
    patch_size: int = PATCH_SIZE
    image_size: int = IMAGE_SIZE
    in_channels: int = 3
    dropout: float = DEFAULT_DROPOUT

    @classmethod
    def preset(cls, name: str, **overrides) -> "EncoderConfig":
        if name not in ENCODER_PRESETS:
            raise ConfigError(f"unknown encoder preset {name!r}, expected one of {list(ENCODER_PRESETS)}", [name])
        return cls(**{**ENCODER_PRESETS[name], **overrides})

    def validate(self) -> None:
        problems = []
        if self.variant not in VARIANTS:
            problems.append(f"variant {self.variant!r}")
        if self.width % self.heads:
            problems.append(f"width {self.width} not divisible by heads {self.heads}")
        if self.image_size % self.patch_size:
            problems.append(f"image_size {self.image_size} not divisible by patch_size {self.patch_size}")
        if self.variant == 'hybrid_conv_stem' and self.patch_size != 2 ** len(HYBRID_WIDTHS):
            problems.append(f"hybrid stem has total stride {2 ** len(HYBRID_WIDTHS)}, patch_size is {self.patch_size}")
        if problems:
            raise ConfigError("invalid encoder config: " + "; ".join(problems), problems)

    @property
    def num_patches(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    def shape_signature(self) -> Dict:
        """决定参数形状的字段；dropout 不影响权重迁移"""
        data = asdict(self)
        data.pop('dropout')
        return data


def _group_norm(channels: int) -> nn.Module:
    return nn.GroupNorm(math.gcd(8, channels), channels)


class HybridStem(nn.Module):
    """3x3 卷积 + 4 个 stride-2 的 ResNet BasicBlock，输出与线性投影相同的网格"""

    def __init__(self, in_channels: int, width: int):
        super().__init__()
        widths = [*HYBRID_WIDTHS[:-1], width]
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, HYBRID_WIDTHS[0], kernel_size=3, padding=1, bias=False),
            _group_norm(HYBRID_WIDTHS[0]),
            nn.ReLU(inplace=True),
        )
        blocks = []
        c_in = HYBRID_WIDTHS[0]
        for c_out in widths:
            downsample = nn.Sequential(conv1x1(c_in, c_out, stride=2), _group_norm(c_out))
            blocks.append(BasicBlock(c_in, c_out, stride=2, downsample=downsample, norm_layer=_group_norm))
            c_in = c_out
        self.blocks = nn.Sequential(*blocks)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(self.stem(x))


class VisualEncoder(nn.Module):
    """图像 (B, C, H, W) -> 记忆序列 (B, N, width)"""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        config.validate()
        self.config = config
        if config.variant == 'linear_projection':
            self.patch_embed = nn.Conv2d(config.in_channels, config.width, kernel_size=config.patch_size, stride=config.patch_size)
        else:
            self.patch_embed = HybridStem(config.in_channels, config.width)
        self.pos_embed = nn.Parameter(torch.zeros(1, config.num_patches, config.width))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.dropout = nn.Dropout(config.dropout)
        layer = nn.TransformerEncoderLayer(
            d_model=config.width,
            nhead=config.heads,
            dim_feedforward=4 * config.width,
            dropout=config.dropout,
            activation='gelu',
            batch_first=True,
            norm_first=True,
        )
        self.blocks = nn.TransformerEncoder(
            layer, num_layers=config.layers, norm=nn.LayerNorm(config.width), enable_nested_tensor=False
        )

    def embed(self, images: torch.Tensor) -> torch.Tensor:
        """图块嵌入 (B, N, width)，不含位置编码"""
        if images.dim() != 4 or images.shape[1] != self.config.in_channels:
            raise ShapeMismatchError("encoder.embed", images.shape, (None, self.config.in_channels, None, None))
        check_grid("encoder.embed", images.shape[2], images.shape[3], self.config.patch_size)
        x = self.patch_embed(images).flatten(2).transpose(1, 2)
        if x.shape[1] != self.config.num_patches:
            raise ShapeMismatchError("encoder.embed", tuple(images.shape[2:]), (self.config.image_size, self.config.image_size))
        return x

    def forward(
        self,
        images: torch.Tensor,
        mask: Optional[torch.Tensor] = None,
        mask_token: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Args:
            images: (B, C, H, W)
            mask: (B, N) 布尔，True 的位置在嵌入层被替换为 mask_token
            mask_token: (1, 1, width)
        """
        x = self.embed(images)
        if mask is not None:
            if mask.shape != x.shape[:2]:
                raise ShapeMismatchError("encoder.mask", x.shape[:2], mask.shape)
            w = mask.unsqueeze(-1).type_as(x)
            x = x * (1 - w) + mask_token * w
        x = self.dropout(x + self.pos_embed)
        return self.blocks(x)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
