"""
图像与张量互转
RasterImage 约定为 HxWxC float32 数组，模型输入为 NxCxHxW 张量
"""

from typing import Sequence

import numpy as np
import torch

from exceptions import ShapeMismatchError


def to_image_tensor(images: Sequence[np.ndarray]) -> torch.Tensor:
    """把若干 HxWxC 图像堆成 NxCxHxW float32 张量"""
    arrays = [np.asarray(img, dtype=np.float32) for img in images]
    if not arrays:
        raise ShapeMismatchError("to_image_tensor", (0,))
    shape = arrays[0].shape
    for a in arrays:
        if a.ndim != 3 or a.shape != shape:
            raise ShapeMismatchError("to_image_tensor", shape, a.shape)
    return torch.from_numpy(np.stack(arrays)).permute(0, 3, 1, 2).contiguous()


def to_raster(tensor: torch.Tensor) -> np.ndarray:
    """CxHxW 或 1xCxHxW 张量转回 HxWxC 数组"""
    if tensor.dim() == 4:
        tensor = tensor[0]
    return tensor.detach().cpu().permute(1, 2, 0).numpy().astype(np.float32)


def check_grid(op: str, height: int, width: int, stride: int) -> None:
    if height % stride or width % stride:
        raise ShapeMismatchError(op, (height, width), (stride, stride))
