"""
评估指标模块
TEDS / S-TEDS、单元格邻接关系 F1 与加权 F1、COCO 式 AP
"""

from .html_tree import TableNode, html_to_tree, tree_to_html
from .teds import teds, teds_with_note, tree_edit_distance, tree_similarity, normalized_distance
from .boxes import iou, iou_matrix, greedy_match
from .car import Relation, F1Score, car_relations, car_f1, car_scores, wavg_f1, WF1_THRESHOLDS
from .detection import DetectionSet, coco_ap, average_precision, interpolated_ap, COCO_THRESHOLDS

__all__ = [
    'TableNode',
    'html_to_tree',
    'tree_to_html',
    'teds',
    'teds_with_note',
    'tree_edit_distance',
    'tree_similarity',
    'normalized_distance',
    'iou',
    'iou_matrix',
    'greedy_match',
    'Relation',
    'F1Score',
    'car_relations',
    'car_f1',
    'car_scores',
    'wavg_f1',
    'WF1_THRESHOLDS',
    'DetectionSet',
    'coco_ap',
    'average_precision',
    'interpolated_ap',
    'COCO_THRESHOLDS',
]
