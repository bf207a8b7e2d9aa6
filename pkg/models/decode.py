"""
贪心解码
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import torch

from codec import TokenSeq
from .task_model import TaskModel

logger = logging.getLogger(__name__)


@dataclass
class DecodeResult:
    seq: TokenSeq
    truncated: bool = False


@torch.no_grad()
def greedy_decode(model: TaskModel, images: torch.Tensor, max_len: Optional[int] = None) -> List[DecodeResult]:
    """
    从 BOS 开始每步取 argmax（并列取最小 id），遇到 EOS 或达到 max_len 停止

    Args:
        model: 训练好的 TaskModel
        images: (B, C, H, W)
        max_len: 序列最大长度（含 BOS/EOS），默认取任务上限

    Returns:
        每张图像一个 DecodeResult；到达 max_len 仍未输出 EOS 时 truncated=True
    """
    model.eval()
    vocab = model.vocab
    max_len = min(max_len or model.max_length, model.max_length)
    memory = model.encode(images)
    batch = images.shape[0]

    ids = torch.full((batch, 1), vocab.bos_id, dtype=torch.long)
    finished = torch.zeros(batch, dtype=torch.bool)
    while ids.shape[1] < max_len and not bool(finished.all()):
        logits = model.decoder(ids, memory)
        next_ids = logits[:, -1].argmax(dim=-1)
        next_ids = torch.where(finished, torch.full_like(next_ids, vocab.pad_id), next_ids)
        ids = torch.cat([ids, next_ids.unsqueeze(1)], dim=1)
        finished |= next_ids == vocab.eos_id

    results = []
    for row in ids.tolist():
        if vocab.eos_id in row:
            row = row[:row.index(vocab.eos_id) + 1]
        seq = TokenSeq(row, model.task)
        results.append(DecodeResult(seq, truncated=not seq.is_complete(vocab)))
    if any(r.truncated for r in results):
        logger.warning(f"{sum(r.truncated for r in results)}/{batch} {model.task} decodes hit max_len {max_len}")
    return results
