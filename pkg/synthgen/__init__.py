"""
合成表格语料模块
采样表格规格、点阵字形渲染、语料生成（含故障注入）和读取
"""

from .table_spec import GenConfig, Span, TableSpec, sample_spec, spec_to_structure_tokens
from .glyphs import ALPHABET
from .styles import StyleParams, STYLES, STYLE_NAMES, get_style
from .renderer import RenderLog, RenderedTable, render
from .corpus import (
    FaultConfig,
    FAULT_TYPES,
    make_corpus,
    load_corpus,
    iter_records,
    load_record_image,
    load_manifest,
    read_image,
    write_ppm,
)

__all__ = [
    'ALPHABET',
    'GenConfig',
    'Span',
    'TableSpec',
    'sample_spec',
    'spec_to_structure_tokens',
    'StyleParams',
    'STYLES',
    'STYLE_NAMES',
    'get_style',
    'RenderLog',
    'RenderedTable',
    'render',
    'FaultConfig',
    'FAULT_TYPES',
    'make_corpus',
    'load_corpus',
    'iter_records',
    'load_record_image',
    'load_manifest',
    'read_image',
    'write_ppm',
]
