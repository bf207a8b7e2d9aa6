"""
标记编解码模块
结构标记词表与校验、单元格框量化与序列化、字符级内容词表、HTML 合并
"""

from .vocab import Vocab, TokenSeq, PAD, BOS, EOS, UNK, SPECIAL_TOKENS
from .structure import (
    build_structure_vocab,
    validate_structure,
    count_non_empty,
    structure_to_grid,
    StructureIssue,
    GridCell,
    TableGrid,
)
from .bbox import (
    build_bbox_vocab,
    quantize_bbox,
    reading_order,
    serialize_bboxes,
    deserialize_bboxes,
    DecodedBoxes,
    QuantizedBox,
)
from .content import build_content_vocab, encode_content, decode_content
from .html import merge_html

__all__ = [
    'Vocab',
    'TokenSeq',
    'PAD',
    'BOS',
    'EOS',
    'UNK',
    'SPECIAL_TOKENS',
    'build_structure_vocab',
    'validate_structure',
    'count_non_empty',
    'structure_to_grid',
    'StructureIssue',
    'GridCell',
    'TableGrid',
    'build_bbox_vocab',
    'quantize_bbox',
    'reading_order',
    'serialize_bboxes',
    'deserialize_bboxes',
    'DecodedBoxes',
    'QuantizedBox',
    'build_content_vocab',
    'encode_content',
    'decode_content',
    'merge_html',
]
