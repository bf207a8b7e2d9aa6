"""
标注一致性检查
越界框、重叠框、框与内容数量不一致、表格区域外的框
"""

import json
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from annotations import Annotation, BBox, CorpusRecord
from config import LINT_OVERLAP_THRESHOLD
from exceptions import CorpusError
from metrics import iou_matrix
from synthgen import iter_records, load_manifest, load_record_image

logger = logging.getLogger(__name__)

OUT_OF_BOUNDS = 'out_of_bounds'
OVERLAP = 'overlap'
COUNT_MISMATCH = 'count_mismatch'
OUTSIDE_TABLE = 'outside_table'
FINDING_KINDS = (OUT_OF_BOUNDS, OVERLAP, COUNT_MISMATCH, OUTSIDE_TABLE)


@dataclass
class Finding:
    kind: str
    indices: Tuple[int, ...] = ()
    sides: List[str] = field(default_factory=list)
    iou: Optional[float] = None
    detail: str = ''

    def to_dict(self) -> Dict:
        data = {'kind': self.kind, 'indices': list(self.indices)}
        if self.sides:
            data['sides'] = self.sides
        if self.iou is not None:
            data['iou'] = round(self.iou, 6)
        if self.detail:
            data['detail'] = self.detail
        return data


def violated_sides(box: BBox, image_w: float, image_h: float) -> List[str]:
    values = box.as_list()
    if not all(math.isfinite(v) for v in values):
        return ['non_finite']
    sides = []
    limits = (('x_min', image_w), ('y_min', image_h), ('x_max', image_w), ('y_max', image_h))
    for (name, limit), value in zip(limits, values):
        if value < 0:
            sides.append(f"{name}<0")
        elif value > limit:
            sides.append(f"{name}>{'width' if name[0] == 'x' else 'height'}")
    if box.x_min >= box.x_max:
        sides.append('x_min>=x_max')
    if box.y_min >= box.y_max:
        sides.append('y_min>=y_max')
    return sides


def _outside(box: BBox, region: Sequence[float]) -> bool:
    """与表格区域没有任何交集"""
    x_min, y_min, x_max, y_max = region
    return box.x_max <= x_min or box.x_min >= x_max or box.y_max <= y_min or box.y_min >= y_max


def lint_annotation(
    annotation: Annotation,
    image_w: float,
    image_h: float,
    threshold: float = LINT_OVERLAP_THRESHOLD,
    table_region: Optional[Sequence[float]] = None,
) -> List[Finding]:
    """
    检查一条标注；接受任意畸形输入，只产出发现，不抛异常

    Args:
        annotation: 标注
        image_w / image_h: 图像尺寸
        threshold: IoU 大于该值的框对记为重叠
        table_region: 表格区域，给出时检查区域外的框

    Returns:
        发现列表，按 越界、重叠、数量、区域外 的顺序
    """
    findings: List[Finding] = []
    boxes = annotation.bboxes

    for i, box in enumerate(boxes):
        sides = violated_sides(box, image_w, image_h)
        if sides:
            findings.append(Finding(OUT_OF_BOUNDS, (i,), sides=sides))

    if len(boxes) >= 2:
        ious = iou_matrix(boxes, boxes)
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                if ious[i, j] > threshold:
                    findings.append(Finding(OVERLAP, (i, j), iou=float(ious[i, j])))

    if len(boxes) != len(annotation.contents):
        findings.append(Finding(
            COUNT_MISMATCH,
            detail=f"{len(boxes)} bboxes vs {len(annotation.contents)} contents",
        ))

    if table_region is not None:
        for i, box in enumerate(boxes):
            if box.is_valid() and not violated_sides(box, image_w, image_h) and _outside(box, table_region):
                findings.append(Finding(OUTSIDE_TABLE, (i,)))
    return findings


@dataclass
class LintReport:
    total: int = 0
    affected: int = 0
    findings: Dict[int, List[Finding]] = field(default_factory=dict)
    unreadable: List[Tuple[int, str]] = field(default_factory=list)
    threshold: float = LINT_OVERLAP_THRESHOLD

    @property
    def fraction(self) -> float:
        return self.affected / self.total if self.total else 0.0

    def count(self, kind: str) -> int:
        """含该类发现的标注数"""
        return sum(1 for items in self.findings.values() if any(f.kind == kind for f in items))

    def to_dict(self) -> Dict:
        return {
            'total': self.total,
            'affected': self.affected,
            'fraction': self.fraction,
            'threshold': self.threshold,
            'by_kind': {kind: self.count(kind) for kind in FINDING_KINDS},
            'unreadable': [{'line': line, 'error': error} for line, error in self.unreadable],
            'findings': {
                str(line): [f.to_dict() for f in items]
                for line, items in sorted(self.findings.items())
            },
        }

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        return path


def _image_size(corpus: Path, record: CorpusRecord, manifest_size: Optional[int]) -> Tuple[int, int]:
    if manifest_size:
        return manifest_size, manifest_size
    image = load_record_image(corpus, record)
    return image.shape[1], image.shape[0]


def lint_corpus(
    corpus: Path,
    threshold: float = LINT_OVERLAP_THRESHOLD,
    report_path: Optional[Path] = None,
    workers: int = 1,
    show_progress: bool = True,
) -> LintReport:
    """
    检查整个语料

    坏行计入 unreadable 并继续；受影响比例 = 至少有一条发现的标注数 / 可读标注数

    Args:
        corpus: 语料目录或 JSONL 路径
        threshold: 重叠阈值
        report_path: LintReport JSON 输出路径
        workers: 并行线程数
        show_progress: 是否显示进度条
    """
    try:
        manifest_size = load_manifest(corpus).get('image_size')
    except CorpusError:
        manifest_size = None
        logger.warning("manifest 缺失，逐张读取图像尺寸")

    report = LintReport(threshold=threshold)
    records: List[Tuple[int, CorpusRecord]] = []
    for line_no, record, error in iter_records(corpus):
        if error is not None:
            report.unreadable.append((line_no, error))
            logger.warning(f"✗ 第 {line_no} 行无法解析: {error}")
        else:
            records.append((line_no, record))

    def check(item: Tuple[int, CorpusRecord]) -> Tuple[int, List[Finding]]:
        line_no, record = item
        width, height = _image_size(corpus, record, manifest_size)
        return line_no, lint_annotation(record.annotation, width, height, threshold, record.table_region)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(tqdm(executor.map(check, records), total=len(records), desc="检查标注", disable=not show_progress))
    else:
        results = [check(item) for item in tqdm(records, desc="检查标注", disable=not show_progress)]

    report.total = len(records)
    for line_no, findings in results:
        if findings:
            report.findings[line_no] = findings
    report.affected = len(report.findings)

    logger.info("=" * 80)
    logger.info(f"标注检查: {report.affected}/{report.total} 条有问题 ({report.fraction:.4f})")
    for kind in FINDING_KINDS:
        logger.info(f"  {kind}: {report.count(kind)}")
    if report.unreadable:
        logger.info(f"  无法解析的行: {len(report.unreadable)}")
    logger.info("=" * 80)

    if report_path:
        report.save(report_path)
        logger.info(f"✓ 报告已保存: {report_path}")
    return report
