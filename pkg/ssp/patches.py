"""
图块切分与掩码采样
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import torch

from codec.bbox import round_half_up
from exceptions import ConfigError, ShapeMismatchError
from tensor_core import check_grid

logger = logging.getLogger(__name__)

DEFAULT_MASK_RATIO = 0.4


def patchify(images: torch.Tensor, patch_size: int) -> torch.Tensor:
    """
    (B, C, H, W) -> (B, N, P*P*C)，图块按行优先排列，块内按 (行, 列, 通道)
    """
    if images.dim() != 4:
        raise ShapeMismatchError("patchify", images.shape, (None, None, None, None))
    b, c, height, width = images.shape
    check_grid("patchify", height, width, patch_size)
    h, w = height // patch_size, width // patch_size
    x = images.reshape(b, c, h, patch_size, w, patch_size)
    x = torch.einsum('nchpwq->nhwpqc', x)
    return x.reshape(b, h * w, patch_size * patch_size * c)


def unpatchify(patches: torch.Tensor, patch_size: int, height: int, width: int) -> torch.Tensor:
    """patchify 的逆运算"""
    check_grid("unpatchify", height, width, patch_size)
    h, w = height // patch_size, width // patch_size
    b, n, d = patches.shape
    c = d // (patch_size * patch_size)
    if n != h * w or c * patch_size * patch_size != d:
        raise ShapeMismatchError("unpatchify", patches.shape, (b, h * w, patch_size * patch_size * c))
    x = patches.reshape(b, h, w, patch_size, patch_size, c)
    x = torch.einsum('nhwpqc->nchpwq', x)
    return x.reshape(b, c, height, width)


@dataclass(frozen=True)
class MaskPlan:
    indices: List[int]
    ratio: float
    num_patches: int

    def as_bool(self) -> torch.Tensor:
        mask = torch.zeros(self.num_patches, dtype=torch.bool)
        mask[self.indices] = True
        return mask


def masked_count(num_patches: int, ratio: float) -> int:
    return round_half_up(ratio * num_patches)


def sample_mask(num_patches: int, ratio: float = DEFAULT_MASK_RATIO, generator: Optional[torch.Generator] = None) -> MaskPlan:
    """
    不放回均匀采样 round(ratio * N) 个图块位置

    Raises:
        ConfigError: ratio 不在 (0, 1)，或掩码数为 0 或等于 N
    """
    if not 0 < ratio < 1:
        raise ConfigError(f"mask ratio must be in (0, 1), got {ratio}", ['mask_ratio'])
    count = masked_count(num_patches, ratio)
    if count == 0:
        raise ConfigError(f"mask ratio {ratio} masks no patch out of {num_patches}", ['mask_ratio'])
    if count == num_patches:
        raise ConfigError(f"mask ratio {ratio} masks all {num_patches} patches", ['mask_ratio'])
    chosen = torch.randperm(num_patches, generator=generator)[:count]
    return MaskPlan(sorted(chosen.tolist()), ratio, num_patches)


def sample_masks(batch: int, num_patches: int, ratio: float, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """(B, N) 布尔掩码，每张图独立采样"""
    return torch.stack([sample_mask(num_patches, ratio, generator).as_bool() for _ in range(batch)])
