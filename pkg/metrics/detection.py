"""
单元格框检测的 COCO 式 AP
每个 IoU 阈值下按置信度降序贪心匹配，101 点插值求 AP，mAP 为 0.50:0.05:0.95 的平均
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from exceptions import MetricError
from .boxes import BoxLike, iou_matrix

logger = logging.getLogger(__name__)

COCO_THRESHOLDS = tuple(round(t, 2) for t in np.linspace(0.5, 0.95, 10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass
class DetectionSet:
    """一张图像上的框；预测带置信度，真值不带"""
    boxes: List[BoxLike]
    scores: Optional[List[float]] = None

    def validate(self, need_scores: bool) -> None:
        if need_scores and self.scores is None:
            raise MetricError("predictions need confidence scores")
        if self.scores is not None:
            if len(self.scores) != len(self.boxes):
                raise MetricError(f"{len(self.boxes)} boxes but {len(self.scores)} scores")
            if any(not 0.0 <= s <= 1.0 for s in self.scores):
                raise MetricError("scores must lie in [0, 1]")


def interpolated_ap(tp: np.ndarray, n_gt: int) -> float:
    """tp: 按置信度降序排列的 0/1 命中序列"""
    if n_gt == 0:
        return 1.0 if len(tp) == 0 else 0.0
    if len(tp) == 0:
        return 0.0
    tp_sum = np.cumsum(tp)
    fp_sum = np.cumsum(1 - tp)
    recall = tp_sum / n_gt
    precision = (tp_sum / (tp_sum + fp_sum)).tolist()
    for i in range(len(precision) - 1, 0, -1):
        if precision[i] > precision[i - 1]:
            precision[i - 1] = precision[i]
    indices = np.searchsorted(recall, RECALL_POINTS, side='left')
    q = [precision[i] if i < len(precision) else 0.0 for i in indices]
    return float(np.mean(q))


def average_precision(preds: Sequence[DetectionSet], gts: Sequence[DetectionSet], threshold: float) -> float:
    """单个 IoU 阈值下的 AP"""
    detections = []
    for image, pred in enumerate(preds):
        for k, score in enumerate(pred.scores or []):
            detections.append((-score, image, k))
    # 置信度降序，并列时按图像和框的原始顺序
    detections.sort()
    ious = [iou_matrix(p.boxes, g.boxes) for p, g in zip(preds, gts)]
    claimed = [np.zeros(len(g.boxes), dtype=bool) for g in gts]

    tp = np.zeros(len(detections))
    for rank, (_, image, k) in enumerate(detections):
        row = ious[image][k] if ious[image].size else np.zeros(0)
        best, best_iou = -1, threshold
        for j, value in enumerate(row):
            if not claimed[image][j] and value >= best_iou and value > 0:
                best, best_iou = j, value
        if best >= 0:
            claimed[image][best] = True
            tp[rank] = 1
    return interpolated_ap(tp, sum(len(g.boxes) for g in gts))


def coco_ap(
    preds: Union[DetectionSet, Sequence[DetectionSet]],
    gts: Union[DetectionSet, Sequence[DetectionSet]],
    thresholds: Sequence[float] = COCO_THRESHOLDS,
) -> Dict[str, float]:
    """
    Args:
        preds: 每张图像一个带置信度的 DetectionSet
        gts: 每张图像一个真值 DetectionSet

    Returns:
        {'mAP', 'AP50', 'AP75'} 以及每个阈值的 'AP@t'
    """
    if isinstance(preds, DetectionSet):
        preds = [preds]
    if isinstance(gts, DetectionSet):
        gts = [gts]
    if len(preds) != len(gts):
        raise MetricError(f"{len(preds)} prediction sets vs {len(gts)} groundtruth sets")
    for p in preds:
        p.validate(need_scores=True)

    per_threshold = {round(float(t), 2): average_precision(preds, gts, t) for t in thresholds}
    result = {f"AP@{t:.2f}": ap for t, ap in per_threshold.items()}
    result['mAP'] = float(np.mean(list(per_threshold.values())))
    result['AP50'] = per_threshold.get(0.5, float('nan'))
    result['AP75'] = per_threshold.get(0.75, float('nan'))
    return result
