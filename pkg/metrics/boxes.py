"""
框的 IoU 与贪心匹配
"""

from typing import Dict, Sequence, Union

import numpy as np

from annotations import BBox

BoxLike = Union[BBox, Sequence[float]]


def _as_array(boxes: Sequence[BoxLike]) -> np.ndarray:
    rows = [b.as_list() if isinstance(b, BBox) else list(b) for b in boxes]
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def iou(a: BoxLike, b: BoxLike) -> float:
    """交并比；退化（零面积）的框与任何框的 IoU 为 0"""
    return float(iou_matrix([a], [b])[0, 0])


def iou_matrix(pred: Sequence[BoxLike], gt: Sequence[BoxLike]) -> np.ndarray:
    """(len(pred), len(gt)) 的 IoU 矩阵"""
    p = _as_array(pred)
    g = _as_array(gt)
    if len(p) == 0 or len(g) == 0:
        return np.zeros((len(p), len(g)))

    area_p = np.clip(p[:, 2] - p[:, 0], 0, None) * np.clip(p[:, 3] - p[:, 1], 0, None)
    area_g = np.clip(g[:, 2] - g[:, 0], 0, None) * np.clip(g[:, 3] - g[:, 1], 0, None)
    x1 = np.maximum(p[:, None, 0], g[None, :, 0])
    y1 = np.maximum(p[:, None, 1], g[None, :, 1])
    x2 = np.minimum(p[:, None, 2], g[None, :, 2])
    y2 = np.minimum(p[:, None, 3], g[None, :, 3])
    inter = np.clip(x2 - x1, 0, None) * np.clip(y2 - y1, 0, None)
    union = area_p[:, None] + area_g[None, :] - inter

    out = np.zeros_like(inter)
    valid = (area_p[:, None] > 0) & (area_g[None, :] > 0) & (union > 0)
    np.divide(inter, union, out=out, where=valid)
    out[~np.isfinite(out)] = 0.0
    return out


def greedy_match(pred: Sequence[BoxLike], gt: Sequence[BoxLike], threshold: float) -> Dict[int, int]:
    """
    按 IoU 从大到小贪心一对一匹配，低于阈值的不匹配

    Returns:
        {pred 下标: gt 下标}
    """
    ious = iou_matrix(pred, gt)
    pairs = [
        (-ious[i, j], i, j)
        for i in range(ious.shape[0])
        for j in range(ious.shape[1])
        if ious[i, j] >= threshold and ious[i, j] > 0
    ]
    pairs.sort()
    matched: Dict[int, int] = {}
    claimed = set()
    for _, i, j in pairs:
        if i in matched or j in claimed:
            continue
        matched[i] = j
        claimed.add(j)
    return matched
