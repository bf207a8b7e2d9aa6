"""
单元格裁剪
按框裁出单元格区域，保持宽高比缩放到内容模型的输入尺寸，其余部分用背景色填充
"""

import math
import logging
from typing import List, NamedTuple

import cv2
import numpy as np

from annotations import BBox

logger = logging.getLogger(__name__)

FLAG_CLAMPED = 'clamped'
FLAG_EMPTY = 'empty_crop'


class CropResult(NamedTuple):
    image: np.ndarray
    flags: List[str]


def clamp_bbox(box: BBox, width: int, height: int) -> BBox:
    def clip(v: float, hi: int) -> float:
        if not math.isfinite(v):
            return 0.0 if v < 0 else float(hi)
        return min(max(v, 0.0), float(hi))
    return BBox(clip(box.x_min, width), clip(box.y_min, height), clip(box.x_max, width), clip(box.y_max, height))


def background_color(image: np.ndarray) -> np.ndarray:
    """用图像四周一圈像素的中位数作背景色"""
    border = np.concatenate([image[0], image[-1], image[:, 0], image[:, -1]])
    return np.median(border, axis=0).astype(np.float32)


def fit_to_square(region: np.ndarray, target_size: int, fill: np.ndarray) -> np.ndarray:
    """保持宽高比缩放，最长边等于 target_size，居中放置"""
    h, w = region.shape[:2]
    scale = target_size / max(h, w)
    new_w = min(target_size, max(1, int(round(w * scale))))
    new_h = min(target_size, max(1, int(round(h * scale))))
    interpolation = cv2.INTER_AREA if scale < 1 else cv2.INTER_LINEAR
    resized = cv2.resize(region, (new_w, new_h), interpolation=interpolation)
    if resized.ndim == 2:
        resized = resized[:, :, None]

    out = np.empty((target_size, target_size, region.shape[2]), dtype=np.float32)
    out[:] = fill
    top = (target_size - new_h) // 2
    left = (target_size - new_w) // 2
    out[top:top + new_h, left:left + new_w] = resized
    return out


def crop(image: np.ndarray, box: BBox, target_size: int) -> CropResult:
    """
    Args:
        image: HxWxC float 图像，取值 [0, 1]
        box: 像素坐标框，越界部分先被截断
        target_size: 输出边长

    Returns:
        CropResult(target_size x target_size x C 图像, 标记)
    """
    height, width = image.shape[:2]
    flags: List[str] = []
    clamped = clamp_bbox(box, width, height)
    if clamped != box:
        flags.append(FLAG_CLAMPED)

    fill = background_color(image)
    x0, y0 = int(math.floor(clamped.x_min)), int(math.floor(clamped.y_min))
    x1, y1 = int(math.ceil(clamped.x_max)), int(math.ceil(clamped.y_max))
    if x1 <= x0 or y1 <= y0:
        flags.append(FLAG_EMPTY)
        blank = np.empty((target_size, target_size, image.shape[2]), dtype=np.float32)
        blank[:] = fill
        return CropResult(blank, flags)

    region = np.ascontiguousarray(image[y0:y1, x0:x1], dtype=np.float32)
    return CropResult(fit_to_square(region, target_size, fill), flags)
