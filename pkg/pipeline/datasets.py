"""
从语料构造三个任务的训练样本
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from annotations import CorpusRecord
from codec import (
    Vocab,
    build_bbox_vocab,
    build_content_vocab,
    build_structure_vocab,
    encode_content,
    serialize_bboxes,
)
from config import CONTENT_IMAGE_SIZE, VOCAB_DIR
from exceptions import ConfigError
from models import TaskSample
from synthgen import ALPHABET, load_corpus, load_record_image
from .crop import crop

logger = logging.getLogger(__name__)


def content_vocab() -> Vocab:
    """生成器字母表上的字符级内容词表"""
    path = VOCAB_DIR / "content.json"
    if path.exists():
        return Vocab.load(path)
    return build_content_vocab([ALPHABET])


def task_vocab(task: str, image_size: int) -> Vocab:
    if task == 'structure':
        return build_structure_vocab()
    if task == 'bbox':
        return build_bbox_vocab(image_size)
    if task == 'content':
        return content_vocab()
    raise ConfigError(f"unknown task {task!r}", [task])


def load_images(corpus: Path, records: Sequence[CorpusRecord], show_progress: bool = False) -> List[np.ndarray]:
    iterator = tqdm(records, desc="读取图像", disable=not show_progress)
    return [load_record_image(corpus, record) for record in iterator]


def structure_samples(records: Sequence[CorpusRecord], images: Sequence[np.ndarray], vocab: Vocab) -> List[TaskSample]:
    return [
        TaskSample(image, vocab.encode(record.annotation.structure_tokens))
        for record, image in zip(records, images)
    ]


def bbox_samples(records: Sequence[CorpusRecord], images: Sequence[np.ndarray], vocab: Vocab) -> List[TaskSample]:
    samples = []
    for record, image in zip(records, images):
        seq = serialize_bboxes(record.annotation.bboxes, image.shape[0], vocab)
        samples.append(TaskSample(image, seq.ids))
    return samples


def content_samples(
    records: Sequence[CorpusRecord],
    images: Sequence[np.ndarray],
    vocab: Vocab,
    target_size: int = CONTENT_IMAGE_SIZE,
) -> List[TaskSample]:
    """每个非空单元格一个样本：框内裁剪图像 + 字符序列"""
    samples = []
    for record, image in zip(records, images):
        annotation = record.annotation
        for box, text in zip(annotation.bboxes, annotation.contents):
            result = crop(image, box, target_size)
            samples.append(TaskSample(result.image, encode_content(text, vocab).ids))
    return samples


def build_task_samples(
    task: str,
    corpus: Path,
    limit: Optional[int] = None,
    content_size: int = CONTENT_IMAGE_SIZE,
    show_progress: bool = False,
) -> Tuple[List[TaskSample], Vocab]:
    """
    读取语料并编码成 (图像, id 序列) 样本

    Returns:
        (样本列表, 词表)
    """
    records = load_corpus(corpus, limit)
    images = load_images(corpus, records, show_progress)
    image_size = images[0].shape[0] if images else 0
    vocab = task_vocab(task, image_size)
    builders = {
        'structure': lambda: structure_samples(records, images, vocab),
        'bbox': lambda: bbox_samples(records, images, vocab),
        'content': lambda: content_samples(records, images, vocab, content_size),
    }
    samples = builders[task]()
    logger.info(f"✓ {task} 样本: {len(samples)} 个（来自 {len(records)} 条记录）")
    return samples, vocab


def split_samples(samples: Sequence, val_fraction: float, seed: int) -> Dict[str, List]:
    """按种子打乱后切出验证集"""
    order = np.random.default_rng(seed).permutation(len(samples))
    n_val = int(round(len(samples) * val_fraction))
    return {
        'train': [samples[i] for i in order[n_val:]],
        'val': [samples[i] for i in order[:n_val]],
    }
