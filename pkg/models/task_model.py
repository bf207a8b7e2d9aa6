"""
统一的图像到序列模型
视觉编码器 + 任务解码器；结构、单元格框、单元格内容三个任务各训练一个实例
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn as nn

from codec import Vocab
from config import DECODER_LAYERS, DEFAULT_DROPOUT, TASK_MAX_LENGTH
from exceptions import CheckpointError, CodecError, EncoderMismatchError, SequenceOverflowError
from tensor_core import cross_entropy, load_checkpoint, save_checkpoint
from .decoder import TaskDecoder
from .encoder import EncoderConfig, VisualEncoder

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "task_model"
ENCODER_CHECKPOINT_KIND = "ssp_encoder"


@dataclass
class TaskModelConfig:
    task: str = 'structure'
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder_layers: int = DECODER_LAYERS
    dropout: float = DEFAULT_DROPOUT

    @property
    def max_length(self) -> int:
        return TASK_MAX_LENGTH[self.task]


class TaskModel(nn.Module):
    def __init__(self, config: TaskModelConfig, vocab: Vocab):
        super().__init__()
        if config.task not in TASK_MAX_LENGTH:
            raise CodecError(f"unknown task {config.task!r}")
        self.config = config
        self.vocab = vocab
        self.encoder = VisualEncoder(config.encoder)
        self.decoder = TaskDecoder(
            vocab_size=len(vocab),
            width=config.encoder.width,
            heads=config.encoder.heads,
            layers=config.decoder_layers,
            max_length=config.max_length,
            dropout=config.dropout,
            task=config.task,
        )

    @property
    def task(self) -> str:
        return self.config.task

    @property
    def max_length(self) -> int:
        return self.config.max_length

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        """(B, C, H, W) -> (B, N, width)"""
        return self.encoder(images)

    def decoder_inputs(self, targets: torch.Tensor) -> torch.Tensor:
        """目标序列右移一位，开头补 BOS"""
        bos = torch.full((targets.shape[0], 1), self.vocab.bos_id, dtype=targets.dtype)
        return torch.cat([bos, targets[:, :-1]], dim=1)

    def forward_teacher_forced(self, images: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        """
        教师强制前向

        Args:
            images: (B, C, H, W)
            targets: (B, T) 待预测序列（不含 BOS，含 EOS，右侧 PAD 补齐）

        Returns:
            (B, T, vocab) logits；位置 i 只看到 targets[:, :i] 和图像
        """
        if targets.shape[1] + 1 > self.max_length:
            raise SequenceOverflowError(self.task, self.max_length, targets.shape[1])
        inputs = self.decoder_inputs(targets)
        return self.decoder(inputs, self.encode(images), inputs == self.vocab.pad_id)

    def loss(self, images: torch.Tensor, targets: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """PAD 位置不计入的交叉熵；同时返回 logits 供统计准确率"""
        logits = self.forward_teacher_forced(images, targets)
        return cross_entropy(logits, targets, targets != self.vocab.pad_id), logits


def token_accuracy(logits: torch.Tensor, targets: torch.Tensor, pad_id: int) -> Tuple[int, int]:
    """(预测正确的非 PAD 位置数, 非 PAD 位置数)"""
    keep = targets != pad_id
    correct = (logits.argmax(dim=-1) == targets) & keep
    return int(correct.sum()), int(keep.sum())


def pad_targets(sequences: List[List[int]], pad_id: int) -> torch.Tensor:
    """按批内最长补齐；输入序列以 BOS 开头，返回的目标去掉 BOS"""
    bodies = [seq[1:] for seq in sequences]
    length = max(len(b) for b in bodies)
    out = torch.full((len(bodies), length), pad_id, dtype=torch.long)
    for i, body in enumerate(bodies):
        out[i, :len(body)] = torch.tensor(body, dtype=torch.long)
    return out


# ============================================================
# 检查点
# ============================================================

def _encoder_config(data: Dict) -> EncoderConfig:
    return EncoderConfig(**data)


def save_task_model(path: Path, model: TaskModel, step: int = 0, extra: Optional[Dict] = None) -> Path:
    metadata = {
        'kind': CHECKPOINT_KIND,
        'task': model.task,
        'config': {
            'encoder': asdict(model.config.encoder),
            'decoder_layers': model.config.decoder_layers,
            'dropout': model.config.dropout,
        },
        'vocab': {'name': model.vocab.name, 'tokens': model.vocab.tokens},
        'step': step,
    }
    if extra:
        metadata['extra'] = extra
    return save_checkpoint(path, model.state_dict(), metadata)


def load_task_model(path: Path) -> TaskModel:
    tensors, metadata = load_checkpoint(path)
    if metadata.get('kind') != CHECKPOINT_KIND:
        raise CheckpointError(f"{path} is not a task model checkpoint (kind={metadata.get('kind')!r})")
    cfg = metadata['config']
    config = TaskModelConfig(
        task=metadata['task'],
        encoder=_encoder_config(cfg['encoder']),
        decoder_layers=cfg['decoder_layers'],
        dropout=cfg['dropout'],
    )
    vocab = Vocab(metadata['vocab']['tokens'], name=metadata['vocab']['name'])
    model = TaskModel(config, vocab)
    model.load_state_dict(tensors)
    model.eval()
    return model


def save_encoder(path: Path, encoder: VisualEncoder, metadata: Optional[Dict] = None) -> Path:
    data = {'kind': ENCODER_CHECKPOINT_KIND, 'encoder': asdict(encoder.config)}
    data.update(metadata or {})
    return save_checkpoint(path, encoder.state_dict(), data)


def load_ssp_encoder(model: TaskModel, checkpoint: Path) -> Dict[str, List[str]]:
    """
    用预训练编码器权重替换 TaskModel 的编码器，解码器不动

    任何配置或形状不一致都拒绝，不做部分加载

    Returns:
        {'matched': [...], 'unmatched': [...]}，成功时 unmatched 为空
    """
    tensors, metadata = load_checkpoint(checkpoint)
    if metadata.get('kind') != ENCODER_CHECKPOINT_KIND:
        raise CheckpointError(f"{checkpoint} is not an encoder checkpoint (kind={metadata.get('kind')!r})")

    source = _encoder_config(metadata['encoder']).shape_signature()
    target = model.config.encoder.shape_signature()
    config_diff = {k: (source[k], target[k]) for k in target if source.get(k) != target[k]}

    own = model.encoder.state_dict()
    shape_diff = {}
    for name, tensor in own.items():
        if name not in tensors:
            shape_diff[name] = (None, tuple(tensor.shape))
        elif tuple(tensors[name].shape) != tuple(tensor.shape):
            shape_diff[name] = (tuple(tensors[name].shape), tuple(tensor.shape))
    for name in tensors:
        if name not in own:
            shape_diff[name] = (tuple(tensors[name].shape), None)

    if config_diff or shape_diff:
        diff = {'config': config_diff, 'tensors': shape_diff}
        logger.error(f"✗ 编码器权重不兼容: {len(config_diff)} 项配置差异, {len(shape_diff)} 个张量不匹配")
        raise EncoderMismatchError(f"encoder checkpoint {checkpoint} does not fit the model: {diff}", diff)

    model.encoder.load_state_dict(tensors, strict=True)
    logger.info(f"✓ 载入预训练编码器: {len(own)} 个张量")
    return {'matched': sorted(own), 'unmatched': []}
