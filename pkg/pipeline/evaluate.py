"""
语料级评估
对每个样本做端到端推理，计算 S-TEDS、TEDS、CAR F1 / WF1 和 AP，写出评估报告
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from tqdm import tqdm

from codec import merge_html, structure_to_grid, validate_structure
from exceptions import CodecError
from metrics import (
    DetectionSet,
    WF1_THRESHOLDS,
    car_relations,
    car_scores,
    coco_ap,
    teds_with_note,
    wavg_f1,
)
from models import TaskModel
from synthgen import load_corpus, load_record_image
from .infer import infer

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ('S-TEDS', 'TEDS', 'AP50', 'AP75', 'mAP', 'F1@0.6', 'WF1')
METRIC_ALIASES = {'steds': 'S-TEDS', 'teds': 'TEDS', 'wf1': 'WF1', 'ap': 'mAP'}


@dataclass
class TaskModels:
    structure: TaskModel
    bbox: TaskModel
    content: TaskModel


def evaluate_sample(
    image: np.ndarray,
    gt_tokens: List[str],
    gt_boxes: List,
    gt_contents: List[str],
    models: TaskModels,
    car_from_prediction: bool = False,
    workers: int = 1,
) -> Dict:
    """
    单个样本的全部指标

    car_from_prediction=False 时 CAR 关系沿用真值结构，只评估框的对齐；
    True 时用预测结构上的关系
    """
    result = infer(image, models.structure, models.bbox, models.content, workers=workers)
    gt_html = merge_html(gt_tokens, gt_contents, strict=False)
    pred_html = result.html or ''
    steds, steds_note = teds_with_note(pred_html, gt_html, structure_only=True)
    full, _ = teds_with_note(pred_html, gt_html, structure_only=False)

    gt_relations = car_relations(structure_to_grid(gt_tokens, strict=False))
    pred_relations = None
    if car_from_prediction:
        if validate_structure(result.structure_tokens):
            pred_relations = set()
        else:
            pred_relations = car_relations(structure_to_grid(result.structure_tokens))
    scores = car_scores(result.bboxes, gt_boxes, gt_relations, pred_relations)

    return {
        'S-TEDS': steds,
        'TEDS': full,
        'car': {f"{t:.1f}": s._asdict() for t, s in scores.items()},
        'WF1': wavg_f1({t: s.f1 for t, s in scores.items()}),
        'flags': result.flags,
        'note': steds_note,
        'prediction': result,
    }


def evaluate_corpus(
    corpus: Path,
    models: TaskModels,
    limit: Optional[int] = None,
    report_path: Optional[Path] = None,
    car_from_prediction: bool = False,
    workers: int = 1,
    show_progress: bool = True,
) -> Dict:
    """
    Args:
        corpus: 语料目录
        models: 三个任务模型
        limit: 最多评估的样本数
        report_path: 报告 JSON 路径
        car_from_prediction: CAR 是否使用预测结构上的关系
        workers: 单元格内容解码线程数
        show_progress: 是否显示进度条

    Returns:
        {'samples': [...], 'aggregates': {...}}
    """
    records = load_corpus(corpus, limit)
    if not records:
        raise CodecError(f"no records to evaluate in {corpus}")

    samples: List[Dict] = []
    preds: List[DetectionSet] = []
    gts: List[DetectionSet] = []
    for index, record in enumerate(tqdm(records, desc="评估", disable=not show_progress)):
        annotation = record.annotation
        image = load_record_image(corpus, record)
        scores = evaluate_sample(
            image,
            annotation.structure_tokens,
            annotation.bboxes,
            annotation.contents,
            models,
            car_from_prediction=car_from_prediction,
            workers=workers,
        )
        prediction = scores.pop('prediction')
        # 贪心解码没有置信度，所有框同分，按输出顺序排序
        preds.append(DetectionSet(prediction.bboxes, [1.0] * len(prediction.bboxes)))
        gts.append(DetectionSet(annotation.bboxes))
        scores['index'] = index
        scores['image_path'] = record.image_path
        scores['html'] = prediction.html
        samples.append(scores)

    ap = coco_ap(preds, gts)
    aggregates = {
        'S-TEDS': float(np.mean([s['S-TEDS'] for s in samples])),
        'TEDS': float(np.mean([s['TEDS'] for s in samples])),
        'AP50': ap['AP50'],
        'AP75': ap['AP75'],
        'mAP': ap['mAP'],
        'WF1': float(np.mean([s['WF1'] for s in samples])),
    }
    for t in WF1_THRESHOLDS:
        aggregates[f"F1@{t:.1f}"] = float(np.mean([s['car'][f"{t:.1f}"]['f1'] for s in samples]))
    aggregates['count'] = len(samples)
    aggregates['flagged'] = sum(1 for s in samples if s['flags'])

    report = {'corpus': str(corpus), 'samples': samples, 'aggregates': aggregates}
    if report_path:
        report_path = Path(report_path)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, 'w', encoding='utf-8') as f:
            json.dump(report, f, ensure_ascii=False, indent=2)
        logger.info(f"✓ 评估报告已保存: {report_path}")

    logger.info("\n" + format_metrics_table(aggregates))
    return report


def format_metrics_table(aggregates: Dict) -> str:
    header = ' | '.join(f"{c:>7}" for c in METRIC_COLUMNS)
    values = ' | '.join(f"{aggregates.get(c, float('nan')):7.4f}" for c in METRIC_COLUMNS)
    return f"{header}\n{'-' * len(header)}\n{values}"
