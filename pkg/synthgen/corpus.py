"""
合成语料生成与读取
图像写成 PPM (P6) 文件，标注写成 JSONL，每种风格的数量写入 manifest.json
"""

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from PIL import Image
from tqdm import tqdm

from annotations import Annotation, BBox, CorpusRecord
from exceptions import CorpusError
from .renderer import RenderedTable, render
from .table_spec import GenConfig, sample_spec

logger = logging.getLogger(__name__)

ANNOTATIONS_FILE = "annotations.jsonl"
MANIFEST_FILE = "manifest.json"
IMAGES_DIR = "images"

FAULT_TYPES = ('out_of_bounds', 'overlap', 'word_wise', 'outside_table')
_FAULT_STREAM = 0xFA17


@dataclass
class FaultConfig:
    """故障注入：每种故障恰好注入到指定数量的样本上，样本之间互不重叠"""

    out_of_bounds: int = 0
    overlap: int = 0
    word_wise: int = 0
    outside_table: int = 0

    def total(self) -> int:
        return self.out_of_bounds + self.overlap + self.word_wise + self.outside_table


def generate_sample(gen_config: GenConfig, seed_seq: np.random.SeedSequence) -> RenderedTable:
    rng = np.random.default_rng(seed_seq)
    spec = sample_spec(rng, gen_config)
    return render(spec, gen_config.image_size, rng, max_text_lines=gen_config.max_text_lines)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path: Path, image: np.ndarray) -> None:
    Image.fromarray(to_uint8(image)).save(path, format='PPM')


def read_image(path: Path) -> np.ndarray:
    """读取 PPM 图像，返回 HxWx3 float32，取值 [0,1]"""
    try:
        with Image.open(path) as img:
            array = np.asarray(img.convert('RGB'), dtype=np.float32)
    except (OSError, ValueError) as e:
        raise CorpusError(f"cannot read image {path}: {e}") from e
    return array / 255.0


# ============================================================
# 故障注入
# ============================================================

def _eligible(fault: str, sample: RenderedTable) -> bool:
    n_boxes = len(sample.annotation.bboxes)
    if fault == 'out_of_bounds':
        return n_boxes >= 1
    if fault == 'overlap':
        return n_boxes >= 2
    if fault == 'word_wise':
        return any(len(words) >= 2 for words in sample.log.word_boxes)
    return True


def inject_fault(fault: str, annotation: Annotation, sample: RenderedTable, image_size: int, rng: np.random.Generator) -> Annotation:
    """在标注副本上注入一种故障"""
    boxes = list(annotation.bboxes)
    contents = list(annotation.contents)

    if fault == 'out_of_bounds':
        side = int(rng.integers(0, 4))
        delta = float(np.round(rng.uniform(0.5, 8.0), 1))
        # 取该方向最靠外的框，外推后不会盖住其他框
        coords = [b.as_list()[side] for b in boxes]
        i = int(np.argmin(coords)) if side < 2 else int(np.argmax(coords))
        values = boxes[i].as_list()
        values[side] = -delta if side < 2 else image_size + delta
        boxes[i] = BBox.from_list(values)
    elif fault == 'overlap':
        i, j = (int(v) for v in rng.choice(len(boxes), size=2, replace=False))
        boxes[j] = boxes[i].translate(1.0, 0.0)
    elif fault == 'word_wise':
        candidates = [k for k, words in enumerate(sample.log.word_boxes) if len(words) >= 2]
        k = candidates[int(rng.integers(0, len(candidates)))]
        boxes[k:k + 1] = sample.log.word_boxes[k]
    elif fault == 'outside_table':
        x_min, y_min, x_max, _ = sample.log.table_region
        margin = y_min
        width = min(3.0 * margin, x_max - x_min)
        x0 = float(rng.uniform(x_min, x_max - width))
        boxes.append(BBox(x0, 0.5, x0 + width, margin - 0.5))
        contents.append('NOTE')
    else:
        raise ValueError(f"unknown fault type {fault!r}")
    return Annotation(annotation.structure_tokens, boxes, contents)


def plan_faults(samples: List[RenderedTable], faults: FaultConfig, rng: np.random.Generator) -> Dict[int, str]:
    """
    为每种故障挑选恰好指定数量的样本

    Returns:
        样本下标 -> 故障类型
    """
    assigned: Dict[int, str] = {}
    order = [int(i) for i in rng.permutation(len(samples))]
    for fault in FAULT_TYPES:
        wanted = getattr(faults, fault)
        if wanted == 0:
            continue
        chosen = [i for i in order if i not in assigned and _eligible(fault, samples[i])][:wanted]
        if len(chosen) < wanted:
            raise CorpusError(f"only {len(chosen)} samples eligible for {wanted} {fault} faults")
        for i in chosen:
            assigned[i] = fault
    return assigned


# ============================================================
# 语料生成
# ============================================================

def make_corpus(
    gen_config: GenConfig,
    seed: int,
    count: int,
    out_dir: Path,
    faults: Optional[FaultConfig] = None,
    workers: int = 4,
    show_progress: bool = True,
) -> Dict:
    """
    生成合成语料

    每个样本的随机源由语料种子派生（SeedSequence.spawn），样本可并行生成；
    JSONL 按样本下标顺序串行写出，同一种子重新生成得到逐字节相同的文件

    Args:
        gen_config: 表格采样参数
        seed: 语料种子
        count: 样本数
        out_dir: 输出目录
        faults: 故障注入配置
        workers: 并行线程数
        show_progress: 是否显示进度条

    Returns:
        manifest 字典
    """
    gen_config.validate()
    faults = faults or FaultConfig()
    out_dir = Path(out_dir)
    images_dir = out_dir / IMAGES_DIR

    logger.info(f"生成语料: {count} 个样本 -> {out_dir}")
    children = np.random.SeedSequence(seed).spawn(count)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        iterator = executor.map(lambda s: generate_sample(gen_config, s), children)
        if show_progress:
            iterator = tqdm(iterator, total=count, desc="Rendering tables")
        samples = list(iterator)

    fault_rng = np.random.default_rng(np.random.SeedSequence([seed, _FAULT_STREAM]))
    plan = plan_faults(samples, faults, fault_rng)

    style_counts: Counter = Counter()
    truncations = 0
    written = 0
    try:
        images_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / ANNOTATIONS_FILE, 'w', encoding='utf-8') as f:
            for idx, sample in enumerate(samples):
                image_rel = f"{IMAGES_DIR}/{idx:06d}.ppm"
                write_ppm(out_dir / image_rel, sample.image)
                annotation = sample.annotation
                record_faults: List[str] = []
                if idx in plan:
                    annotation = inject_fault(plan[idx], annotation, sample, gen_config.image_size, fault_rng)
                    record_faults.append(plan[idx])
                style = sample.log.style
                record = CorpusRecord(
                    image_path=image_rel,
                    annotation=annotation,
                    style=style,
                    table_region=list(sample.log.table_region),
                    faults=record_faults,
                )
                f.write(json.dumps(record.to_dict(), ensure_ascii=False) + '\n')
                style_counts[style] += 1
                truncations += len(sample.log.truncations)
                written += 1
    except OSError as e:
        logger.error(f"✗ 写入语料失败，已写出 {written}/{count} 个样本，输出不完整: {e}")
        raise CorpusError(f"failed writing corpus to {out_dir}: {e}") from e

    manifest = {
        'count': count,
        'seed': seed,
        'image_size': gen_config.image_size,
        'styles': {name: style_counts.get(name, 0) for name in gen_config.styles},
        'faults': {name: getattr(faults, name) for name in FAULT_TYPES},
        'truncated_cells': truncations,
        'gen_config': asdict(gen_config),
    }
    with open(out_dir / MANIFEST_FILE, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)

    logger.info(f"✓ 语料生成完成: {count} 个样本, 风格分布 {manifest['styles']}")
    return manifest


# ============================================================
# 语料读取
# ============================================================

def annotations_path(corpus: Path) -> Path:
    corpus = Path(corpus)
    return corpus / ANNOTATIONS_FILE if corpus.is_dir() else corpus


def iter_records(corpus: Path) -> Iterator[Tuple[int, Optional[CorpusRecord], Optional[str]]]:
    """
    逐行读取语料 JSONL

    Yields:
        (行号, 记录或 None, 错误信息或 None)；坏行不抛异常
    """
    path = annotations_path(corpus)
    if not path.exists():
        raise CorpusError(f"corpus annotations not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f):
            if not line.strip():
                continue
            try:
                yield line_no, CorpusRecord.from_dict(json.loads(line)), None
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                yield line_no, None, f"{type(e).__name__}: {e}"


def load_corpus(corpus: Path, limit: Optional[int] = None) -> List[CorpusRecord]:
    """读取语料全部记录，遇到坏行抛 CorpusError"""
    records = []
    for line_no, record, error in iter_records(corpus):
        if error is not None:
            raise CorpusError(f"bad record at line {line_no} of {annotations_path(corpus)}: {error}")
        records.append(record)
        if limit is not None and len(records) >= limit:
            break
    return records


def corpus_root(corpus: Path) -> Path:
    corpus = Path(corpus)
    return corpus if corpus.is_dir() else corpus.parent


def load_record_image(corpus: Path, record: CorpusRecord) -> np.ndarray:
    return read_image(corpus_root(corpus) / record.image_path)


def load_manifest(corpus: Path) -> Dict:
    path = corpus_root(corpus) / MANIFEST_FILE
    if not path.exists():
        raise CorpusError(f"manifest not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
