"""
单元格框编解码
坐标量化（四舍五入后截断到 [0, image_size]）、阅读顺序排序、序列化和反序列化
x 与 y 共用一个坐标词表 "0".."image_size"
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from annotations import BBox
from config import TASK_MAX_LENGTH
from exceptions import CodecError, SequenceOverflowError
from .vocab import Vocab, TokenSeq

logger = logging.getLogger(__name__)


class QuantizedBox(NamedTuple):
    coords: Tuple[int, int, int, int]
    clamped: bool


def build_bbox_vocab(image_size: int) -> Vocab:
    if image_size <= 0:
        raise CodecError(f"image_size must be positive, got {image_size}")
    return Vocab([str(i) for i in range(image_size + 1)], name=f"bbox{image_size}")


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def quantize_coord(value: float, image_size: int) -> Tuple[int, bool]:
    """返回 (量化坐标, 是否被截断)"""
    if math.isnan(value):
        raise CodecError("NaN coordinate cannot be quantized")
    if math.isinf(value):
        return (0 if value < 0 else image_size), True
    q = round_half_up(value)
    return min(max(q, 0), image_size), (q < 0 or q > image_size)


def quantize_bbox(box: BBox, image_size: int) -> QuantizedBox:
    """
    把一个框量化成 4 个整数坐标

    Returns:
        QuantizedBox，clamped 表示至少一个坐标被截断（供检查器使用）
    """
    if image_size <= 0:
        raise CodecError(f"image_size must be positive, got {image_size}")
    coords = []
    clamped = False
    for value in box.as_list():
        q, was_clamped = quantize_coord(value, image_size)
        coords.append(q)
        clamped = clamped or was_clamped
    return QuantizedBox(tuple(coords), clamped)


def reading_order(boxes: Sequence[BBox]) -> List[int]:
    """
    阅读顺序：先按 y_min 分行带（容差为框高中位数的一半），行带内按 x_min 从左到右

    Returns:
        排序后的原始下标
    """
    if not boxes:
        return []
    heights = [max(b.height, 0.0) for b in boxes]
    tolerance = float(np.median(heights)) / 2.0
    by_top = sorted(range(len(boxes)), key=lambda i: (boxes[i].y_min, boxes[i].x_min, i))

    bands: List[List[int]] = []
    band_top = None
    for i in by_top:
        if band_top is None or boxes[i].y_min - band_top > tolerance:
            bands.append([])
            band_top = boxes[i].y_min
        bands[-1].append(i)

    order: List[int] = []
    for band in bands:
        order.extend(sorted(band, key=lambda i: (boxes[i].x_min, i)))
    return order


def serialize_bboxes(boxes: Sequence[BBox], image_size: int, vocab: Vocab = None) -> TokenSeq:
    """
    按阅读顺序拼接量化后的坐标，首尾加 BOS/EOS

    Raises:
        SequenceOverflowError: 序列超过 bbox 任务最大长度，异常里带出溢出的框下标
    """
    vocab = vocab or build_bbox_vocab(image_size)
    max_length = TASK_MAX_LENGTH['bbox']
    ids = [vocab.bos_id]
    for rank, i in enumerate(reading_order(boxes)):
        if len(ids) + 4 + 1 > max_length:
            raise SequenceOverflowError('bbox', max_length, rank)
        quantized = quantize_bbox(boxes[i], image_size)
        if quantized.clamped:
            logger.debug(f"box {i} clamped to image bounds: {boxes[i].as_list()}")
        ids.extend(vocab.token_id(str(c)) for c in quantized.coords)
    ids.append(vocab.eos_id)
    return TokenSeq(ids, 'bbox')


@dataclass
class DecodedBoxes:
    boxes: List[BBox] = field(default_factory=list)
    degenerate: List[int] = field(default_factory=list)
    remainder: int = 0
    invalid_tokens: int = 0


def deserialize_bboxes(ids: Sequence[int], image_size: int, vocab: Vocab = None) -> DecodedBoxes:
    """
    去掉 BOS/EOS，每 4 个坐标还原一个框

    退化框（x_min >= x_max 或 y_min >= y_max）保留但记入 degenerate；
    长度不是 4 的倍数时截断到最后一个完整四元组，余数记入 remainder
    """
    vocab = vocab or build_bbox_vocab(image_size)
    result = DecodedBoxes()
    coords: List[int] = []
    for token in vocab.decode(ids):
        if token.isdigit() and int(token) <= image_size:
            coords.append(int(token))
        else:
            result.invalid_tokens += 1

    full = len(coords) - len(coords) % 4
    result.remainder = len(coords) - full
    if result.remainder:
        logger.warning(f"bbox payload of {len(coords)} coordinates truncated, remainder {result.remainder}")
    for start in range(0, full, 4):
        box = BBox.from_list(coords[start:start + 4])
        if not box.is_valid():
            result.degenerate.append(len(result.boxes))
        result.boxes.append(box)
    return result
