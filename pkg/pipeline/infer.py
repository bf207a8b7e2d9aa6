"""
端到端推理
图像 -> 结构标记 -> 单元格框 -> 逐单元格内容 -> HTML
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from annotations import BBox
from codec import count_non_empty, decode_content, deserialize_bboxes, merge_html, validate_structure
from exceptions import ConfigError
from models import TaskModel, greedy_decode
from tensor_core import to_image_tensor
from .crop import FLAG_CLAMPED, FLAG_EMPTY, crop

logger = logging.getLogger(__name__)

FLAG_STRUCTURE_TRUNCATED = 'structure_truncated'
FLAG_MALFORMED_STRUCTURE = 'malformed_structure'
FLAG_BBOX_TRUNCATED = 'bbox_truncated'
FLAG_DEGENERATE_BOXES = 'degenerate_boxes'
FLAG_BBOX_REMAINDER = 'bbox_remainder'
FLAG_INVALID_BBOX_TOKENS = 'invalid_bbox_tokens'
FLAG_CONTENT_TRUNCATED = 'content_truncated'
FLAG_CROP_CLAMPED = 'crop_clamped'
FLAG_EMPTY_CROP = FLAG_EMPTY
FLAG_COUNT_MISMATCH = 'count_mismatch'

CONTENT_BATCH = 16


@dataclass
class InferenceResult:
    structure_tokens: List[str]
    bboxes: List[BBox] = field(default_factory=list)
    contents: List[str] = field(default_factory=list)
    html: Optional[str] = None
    flags: List[str] = field(default_factory=list)
    degenerate: List[int] = field(default_factory=list)

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def to_dict(self) -> Dict:
        return {
            'structure_tokens': self.structure_tokens,
            'bboxes': [b.as_list() for b in self.bboxes],
            'contents': self.contents,
            'html': self.html,
            'flags': self.flags,
            'degenerate': self.degenerate,
        }


def _decode_contents(
    content_model: TaskModel,
    crops: Sequence[np.ndarray],
    workers: int,
) -> List[Tuple[str, bool]]:
    """按固定批次解码，结果按单元格顺序汇总为 (文本, 是否截断)"""
    if not crops:
        return []
    chunks = [list(crops[i:i + CONTENT_BATCH]) for i in range(0, len(crops), CONTENT_BATCH)]

    def run(chunk: List[np.ndarray]) -> List[Tuple[str, bool]]:
        results = greedy_decode(content_model, to_image_tensor(chunk))
        return [(decode_content(r.seq.ids, content_model.vocab), r.truncated) for r in results]

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            decoded = list(executor.map(run, chunks))
    else:
        decoded = [run(chunk) for chunk in chunks]
    return [text for chunk in decoded for text in chunk]


@torch.no_grad()
def infer(
    image: np.ndarray,
    structure_model: Optional[TaskModel],
    bbox_model: Optional[TaskModel],
    content_model: Optional[TaskModel],
    workers: int = 1,
) -> InferenceResult:
    """
    对一张表格图像做完整推理

    模型输出的任何异常（截断、退化框、数量不一致、结构不合法）都变成 flags，不中断推理

    Args:
        image: HxWxC float 图像
        structure_model / bbox_model / content_model: 三个任务模型
        workers: 单元格内容解码的线程数

    Returns:
        InferenceResult
    """
    missing = [name for name, model in (
        ('structure', structure_model), ('bbox', bbox_model), ('content', content_model)
    ) if model is None]
    if missing:
        raise ConfigError(f"inference needs all three task models, missing: {', '.join(missing)}", missing)

    pixels = to_image_tensor([image])

    # 1. 结构
    decoded = greedy_decode(structure_model, pixels)[0]
    tokens = structure_model.vocab.decode(decoded.seq.ids)
    result = InferenceResult(structure_tokens=tokens)
    if decoded.truncated:
        result.flag(FLAG_STRUCTURE_TRUNCATED)
    issues = validate_structure(tokens)
    if issues:
        result.flag(FLAG_MALFORMED_STRUCTURE)
        logger.debug(f"malformed structure: {issues[0]}")

    # 2. 单元格框
    decoded = greedy_decode(bbox_model, pixels)[0]
    if decoded.truncated:
        result.flag(FLAG_BBOX_TRUNCATED)
    boxes = deserialize_bboxes(decoded.seq.ids, image.shape[0], bbox_model.vocab)
    result.bboxes = boxes.boxes
    result.degenerate = boxes.degenerate
    if boxes.degenerate:
        result.flag(FLAG_DEGENERATE_BOXES)
    if boxes.remainder:
        result.flag(FLAG_BBOX_REMAINDER)
    if boxes.invalid_tokens:
        result.flag(FLAG_INVALID_BBOX_TOKENS)

    # 3. 逐单元格内容
    target_size = content_model.config.encoder.image_size
    crops = []
    for box in result.bboxes:
        cropped = crop(image, box, target_size)
        if FLAG_CLAMPED in cropped.flags:
            result.flag(FLAG_CROP_CLAMPED)
        if FLAG_EMPTY in cropped.flags:
            result.flag(FLAG_EMPTY_CROP)
        crops.append(cropped.image)
    texts = _decode_contents(content_model, crops, workers)
    if any(truncated for _, truncated in texts):
        result.flag(FLAG_CONTENT_TRUNCATED)
    result.contents = [text for text, _ in texts]

    # 4. 合并
    if not issues:
        if count_non_empty(tokens) != len(result.contents):
            result.flag(FLAG_COUNT_MISMATCH)
        result.html = merge_html(tokens, result.contents, strict=False)

    if result.flags:
        logger.info(f"推理完成，标记: {', '.join(result.flags)}")
    return result
