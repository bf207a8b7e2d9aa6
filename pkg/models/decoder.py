"""
任务解码器
自回归 pre-norm Transformer 解码器，三个任务共用同一实现，只有词表和最大长度不同
"""

import torch
import torch.nn as nn

from exceptions import SequenceOverflowError, ShapeMismatchError


def causal_mask(length: int) -> torch.Tensor:
    """(T, T) 布尔掩码，True 表示不可见（未来位置）"""
    return torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)


class TaskDecoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        width: int,
        heads: int,
        layers: int,
        max_length: int,
        dropout: float = 0.1,
        task: str = '',
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_length = max_length
        self.task = task
        self.token_embed = nn.Embedding(vocab_size, width)
        self.pos_embed = nn.Parameter(torch.zeros(1, max_length, width))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        self.dropout = nn.Dropout(dropout)
        layer = nn.TransformerDecoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=4 * width,
            dropout=dropout,
            activation='gelu',
            batch_first=True,
            norm_first=True,
        )
        self.blocks = nn.TransformerDecoder(layer, num_layers=layers, norm=nn.LayerNorm(width))
        self.head = nn.Linear(width, vocab_size)

    def forward(self, input_ids: torch.Tensor, memory: torch.Tensor, pad_mask: torch.Tensor = None) -> torch.Tensor:
        """
        Args:
            input_ids: (B, T) 已右移的输入（以 BOS 开头）
            memory: (B, N, width) 编码器输出
            pad_mask: (B, T) 布尔，True 表示 PAD

        Returns:
            (B, T, vocab) logits
        """
        if input_ids.dim() != 2:
            raise ShapeMismatchError("decoder.input_ids", input_ids.shape, (None, None))
        length = input_ids.shape[1]
        if length > self.max_length:
            raise SequenceOverflowError(self.task or 'decoder', self.max_length, length - 1)
        if memory.shape[0] != input_ids.shape[0]:
            raise ShapeMismatchError("decoder.memory", memory.shape, input_ids.shape)
        x = self.dropout(self.token_embed(input_ids) + self.pos_embed[:, :length])
        x = self.blocks(
            x,
            memory,
            tgt_mask=causal_mask(length),
            tgt_key_padding_mask=pad_mask,
        )
        return self.head(x)
