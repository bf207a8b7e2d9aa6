"""
单元格邻接关系 (CAR) 与加权 F1
每个非空单元格与其右侧、下方最近的非空单元格构成关系，空单元格被跳过
"""

import logging
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Set, Tuple

from codec import TableGrid
from exceptions import MetricError
from .boxes import BoxLike, greedy_match

logger = logging.getLogger(__name__)

HORIZONTAL = 'horizontal'
VERTICAL = 'vertical'
WF1_THRESHOLDS = (0.6, 0.7, 0.8, 0.9)


class Relation(NamedTuple):
    a: int
    b: int
    direction: str


class F1Score(NamedTuple):
    precision: float
    recall: float
    f1: float


def car_relations(grid: TableGrid) -> Set[Relation]:
    """
    网格上的邻接关系，单元格以非空单元格的序号（与 B、C 的顺序一致）标识

    跨行/跨列单元格占据其覆盖的所有网格位置，重复关系去重
    """
    by_index = {cell.index: cell for cell in grid.cells}
    relations: Set[Relation] = set()

    def nearest(row: int, col: int, d_row: int, d_col: int, own: int) -> Optional[int]:
        r, c = row + d_row, col + d_col
        while r < grid.n_rows and c < grid.n_cols:
            index = grid.occupancy.get((r, c))
            if index is not None and index != own and by_index[index].non_empty:
                return by_index[index].content_index
            r, c = r + d_row, c + d_col
        return None

    for cell in grid.non_empty_cells():
        right = cell.col + cell.colspan - 1
        for row in range(cell.row, cell.row + cell.rowspan):
            other = nearest(row, right, 0, 1, cell.index)
            if other is not None:
                relations.add(Relation(cell.content_index, other, HORIZONTAL))
        bottom = cell.row + cell.rowspan - 1
        for col in range(cell.col, cell.col + cell.colspan):
            other = nearest(bottom, col, 1, 0, cell.index)
            if other is not None:
                relations.add(Relation(cell.content_index, other, VERTICAL))
    return relations


def f1_from_sets(pred: Set[Relation], gt: Set[Relation]) -> F1Score:
    if not pred and not gt:
        return F1Score(1.0, 1.0, 1.0)
    correct = len(pred & gt)
    precision = correct / len(pred) if pred else 0.0
    recall = correct / len(gt) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return F1Score(precision, recall, f1)


def car_f1(
    pred_boxes: Sequence[BoxLike],
    gt_boxes: Sequence[BoxLike],
    gt_relations: Iterable[Relation],
    iou_threshold: float,
    pred_relations: Optional[Iterable[Relation]] = None,
) -> F1Score:
    """
    按 IoU 对齐预测框与真值框后，在邻接关系集合上计算 P/R/F1

    Args:
        pred_boxes: 预测的非空单元格框
        gt_boxes: 真值非空单元格框
        gt_relations: 真值关系（以 gt 框下标标识）
        iou_threshold: (0, 1]
        pred_relations: 预测结构上的关系（以 pred 框下标标识）；None 表示沿用真值结构，
            只有两端都匹配上的真值关系被视为预测出的关系

    Returns:
        F1Score
    """
    if not 0 < iou_threshold <= 1:
        raise MetricError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    gt_set = set(gt_relations)
    matched = greedy_match(pred_boxes, gt_boxes, iou_threshold)

    if pred_relations is None:
        hit = set(matched.values())
        pred_set = {r for r in gt_set if r.a in hit and r.b in hit}
    else:
        # 未匹配的端点映射到负数，保证它们不会与任何真值关系重合
        def to_gt(i: int) -> int:
            return matched.get(i, -1 - i)
        pred_set = {Relation(to_gt(r.a), to_gt(r.b), r.direction) for r in pred_relations}
    return f1_from_sets(pred_set, gt_set)


def _threshold_key(value: float) -> float:
    return round(float(value), 2)


def wavg_f1(f1_at: Dict[float, float]) -> float:
    """
    以 IoU 为权重的 F1 加权平均：sum(t * F1@t) / sum(t)，t 取 0.6/0.7/0.8/0.9
    """
    values = {_threshold_key(k): v for k, v in f1_at.items()}
    expected = set(WF1_THRESHOLDS)
    if set(values) != expected:
        missing = sorted(expected - set(values))
        extra = sorted(set(values) - expected)
        raise MetricError(f"wavg_f1 needs exactly {WF1_THRESHOLDS}, missing {missing}, unexpected {extra}")
    return sum(t * values[t] for t in WF1_THRESHOLDS) / sum(WF1_THRESHOLDS)


def car_scores(
    pred_boxes: Sequence[BoxLike],
    gt_boxes: Sequence[BoxLike],
    gt_relations: Iterable[Relation],
    pred_relations: Optional[Iterable[Relation]] = None,
    thresholds: Tuple[float, ...] = WF1_THRESHOLDS,
) -> Dict[float, F1Score]:
    """各 IoU 阈值下的 CAR 分数"""
    gt_relations = set(gt_relations)
    pred_relations = set(pred_relations) if pred_relations is not None else None
    return {
        t: car_f1(pred_boxes, gt_boxes, gt_relations, t, pred_relations)
        for t in thresholds
    }
