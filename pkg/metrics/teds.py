"""
TEDS / S-TEDS
基于有序树编辑距离的表格相似度：1 - TED / max(|T_pred|, |T_gt|)
"""

import logging
from typing import Optional, Tuple

import Levenshtein
import zss

from exceptions import HtmlParseError
from .html_tree import TableNode, html_to_tree

logger = logging.getLogger(__name__)


def normalized_distance(a: str, b: str) -> float:
    """归一化编辑距离，两个空串为 0"""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return Levenshtein.distance(a, b) / longest


def rename_cost(a: TableNode, b: TableNode, structure_only: bool) -> float:
    if a.label() != b.label():
        return 1.0
    if structure_only or not (a.is_cell and b.is_cell):
        return 0.0
    return normalized_distance(a.content or '', b.content or '')


def tree_edit_distance(a: TableNode, b: TableNode, structure_only: bool = False) -> float:
    """插入、删除代价为 1，重命名代价见 rename_cost"""
    return zss.distance(
        a,
        b,
        get_children=lambda node: node.children,
        insert_cost=lambda node: 1.0,
        remove_cost=lambda node: 1.0,
        update_cost=lambda x, y: rename_cost(x, y, structure_only),
    )


def tree_similarity(pred: TableNode, gt: TableNode, structure_only: bool = False) -> float:
    size = max(pred.size(), gt.size())
    distance = tree_edit_distance(pred, gt, structure_only)
    return max(0.0, 1.0 - distance / size)


def teds_with_note(pred_html: str, gt_html: str, structure_only: bool = False) -> Tuple[float, Optional[str]]:
    """
    计算 TEDS，并返回无法解析时的说明

    预测无法解析时得 0 分，不中断整个评估
    """
    try:
        gt = html_to_tree(gt_html)
    except HtmlParseError as e:
        logger.warning(f"groundtruth html unparseable: {e}")
        return 0.0, f"gt: {e}"
    try:
        pred = html_to_tree(pred_html)
    except HtmlParseError as e:
        logger.debug(f"prediction html unparseable: {e}")
        return 0.0, f"pred: {e}"
    return tree_similarity(pred, gt, structure_only), None


def teds(pred_html: str, gt_html: str, structure_only: bool = False) -> float:
    """TEDS（structure_only=True 时为 S-TEDS），取值 [0, 1]"""
    return teds_with_note(pred_html, gt_html, structure_only)[0]
