"""
单元格内容编解码（字符粒度）
"""

import logging
from typing import Iterable, List, Sequence

from config import TASK_MAX_LENGTH
from exceptions import CodecError, SequenceOverflowError
from .vocab import Vocab, TokenSeq, UNK

logger = logging.getLogger(__name__)


def build_content_vocab(corpus: Iterable[str]) -> Vocab:
    """语料中出现过的每个字符一个 token，按码位排序"""
    chars = set()
    seen_any = False
    for text in corpus:
        seen_any = True
        chars.update(text)
    if not seen_any:
        raise CodecError("cannot build a content vocab from an empty corpus")
    return Vocab(sorted(chars), name="content")


def encode_content(text: str, vocab: Vocab) -> TokenSeq:
    max_length = TASK_MAX_LENGTH['content']
    if len(text) + 2 > max_length:
        raise SequenceOverflowError('content', max_length, max_length - 2)
    return TokenSeq(vocab.encode(list(text)), 'content')


def decode_content(ids: Sequence[int], vocab: Vocab) -> str:
    tokens: List[str] = vocab.decode(ids)
    unknown = sum(1 for t in tokens if t == UNK)
    if unknown:
        logger.debug(f"{unknown} unknown content tokens dropped")
    return ''.join(t for t in tokens if t != UNK)
