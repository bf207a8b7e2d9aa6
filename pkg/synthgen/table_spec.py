"""
表格规格采样
随机生成行列数、表头行数、跨行/跨列单元格和单元格文本，并展开成结构标记
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from codec import structure as st
from config import IMAGE_SIZE, PATCH_SIZE
from exceptions import ConfigError
from .glyphs import GLYPH_HEIGHT, GLYPH_WIDTH
from .styles import STYLE_NAMES, get_style

logger = logging.getLogger(__name__)

MAX_SPAN_ATTEMPTS = 8

WORDS = (
    'TOTAL', 'NET', 'CASH', 'TAX', 'RATE', 'SALES', 'COST', 'MEAN', 'STD', 'N',
    'YES', 'NO', 'Q1', 'Q2', 'Q3', 'Q4', 'FY', 'USD', 'EUR', 'ITEM', 'NAME',
    'AGE', 'DOSE', 'SCORE', 'TEST', 'BASE', 'PLAN', 'SALE', 'NEW', 'OFF',
)


@dataclass(frozen=True)
class Span:
    row: int
    col: int
    rowspan: int = 1
    colspan: int = 1

    def positions(self) -> List[Tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.row, self.row + self.rowspan)
            for c in range(self.col, self.col + self.colspan)
        ]


@dataclass
class GenConfig:
    """表格采样参数"""

    min_rows: int = 1
    max_rows: int = 6
    min_cols: int = 1
    max_cols: int = 5
    max_header_rows: int = 1
    span_prob: float = 0.15
    max_text_len: int = 8
    max_text_lines: int = 2
    image_size: int = IMAGE_SIZE
    styles: Tuple[str, ...] = STYLE_NAMES

    def validate(self) -> None:
        problems = []
        if not 1 <= self.min_rows <= self.max_rows:
            problems.append(f"rows range [{self.min_rows}, {self.max_rows}]")
        if not 1 <= self.min_cols <= self.max_cols:
            problems.append(f"cols range [{self.min_cols}, {self.max_cols}]")
        if self.max_header_rows < 0:
            problems.append(f"max_header_rows {self.max_header_rows}")
        if not 0.0 <= self.span_prob <= 1.0:
            problems.append(f"span_prob {self.span_prob}")
        if self.max_text_len < 1 or self.max_text_lines < 1:
            problems.append("text length and line count must be positive")
        if self.image_size <= 0 or self.image_size % PATCH_SIZE:
            problems.append(f"image_size {self.image_size} not a positive multiple of {PATCH_SIZE}")
        unknown = [s for s in self.styles if s not in STYLE_NAMES]
        if unknown or not self.styles:
            problems.append(f"styles {self.styles}")
        if not problems:
            # 最小单元格必须放得下一个字符
            margin, scale = table_margin(self.image_size), glyph_scale(self.image_size)
            inner = self.image_size - 2 * margin
            pad = cell_padding(self.image_size)
            if inner // self.max_cols - 2 * pad < GLYPH_WIDTH * scale:
                problems.append(f"max_cols {self.max_cols} too many for image_size {self.image_size}")
            if inner // self.max_rows - 2 * pad < GLYPH_HEIGHT * scale:
                problems.append(f"max_rows {self.max_rows} too many for image_size {self.image_size}")
        if problems:
            raise ConfigError("invalid generation config: " + "; ".join(problems), problems)


def table_margin(image_size: int) -> int:
    return max(2, image_size // 28)


def glyph_scale(image_size: int) -> int:
    return max(1, image_size // 112)


def cell_padding(image_size: int) -> int:
    return 2 * glyph_scale(image_size)


@dataclass
class TableSpec:
    """一张表格的逻辑描述；cells[r][c] 为 None 表示空单元格或被跨度覆盖的位置"""

    n_rows: int
    n_cols: int
    header_rows: int = 0
    spans: List[Span] = field(default_factory=list)
    cells: List[List[Optional[str]]] = field(default_factory=list)
    style: str = 'finance'

    def __post_init__(self):
        if not self.cells:
            self.cells = [[None] * self.n_cols for _ in range(self.n_rows)]

    def span_anchors(self) -> Dict[Tuple[int, int], Span]:
        return {(s.row, s.col): s for s in self.spans}

    def covered(self) -> Dict[Tuple[int, int], Span]:
        """被跨度覆盖但不是锚点的位置"""
        out = {}
        for span in self.spans:
            for position in span.positions():
                if position != (span.row, span.col):
                    out[position] = span
        return out

    def layout(self) -> List[Span]:
        """结构顺序（行优先）下的全部单元格，普通单元格视为 1x1 跨度"""
        anchors = self.span_anchors()
        covered = self.covered()
        cells = []
        for r in range(self.n_rows):
            for c in range(self.n_cols):
                if (r, c) in covered:
                    continue
                cells.append(anchors.get((r, c), Span(r, c)))
        return cells

    def text_at(self, row: int, col: int) -> Optional[str]:
        text = self.cells[row][col]
        return text if text else None

    def problems(self) -> List[str]:
        problems = []
        if self.n_rows < 1 or self.n_cols < 1:
            problems.append(f"grid {self.n_rows}x{self.n_cols}")
        if not 0 <= self.header_rows <= self.n_rows:
            problems.append(f"header_rows {self.header_rows}")
        seen: Dict[Tuple[int, int], Span] = {}
        for span in self.spans:
            extents_ok = all(
                n == 1 or st.MIN_SPAN <= n <= st.MAX_SPAN for n in (span.rowspan, span.colspan)
            )
            if not extents_ok or span.rowspan * span.colspan < 2:
                problems.append(f"span extents {span}")
            if span.row + span.rowspan > self.n_rows or span.col + span.colspan > self.n_cols:
                problems.append(f"span outside grid {span}")
            if span.row < self.header_rows < span.row + span.rowspan:
                problems.append(f"span crosses header boundary {span}")
            for position in span.positions():
                if position in seen:
                    problems.append(f"span {span} overlaps {seen[position]}")
                seen[position] = span
        for (r, c) in self.covered():
            if r < self.n_rows and c < self.n_cols and self.cells[r][c]:
                problems.append(f"covered cell ({r}, {c}) has content")
        return problems


def _sample_text(rng: np.random.Generator, style: str, max_len: int) -> str:
    kind = rng.integers(0, 4)
    if kind == 0:
        text = str(int(rng.integers(0, 10 ** int(rng.integers(1, 5)))))
    elif kind == 1:
        text = f"{rng.integers(0, 100)}.{rng.integers(0, 100):02d}"
        if style == 'finance' and rng.random() < 0.5:
            text = '$' + text
        elif rng.random() < 0.3:
            text = '-' + text
    elif kind == 2:
        text = f"{rng.integers(0, 100)}%"
    else:
        n_words = int(rng.integers(1, 3))
        text = ' '.join(WORDS[int(i)] for i in rng.integers(0, len(WORDS), size=n_words))
    return text[:max_len].rstrip() or text[0]


def _section_bounds(row: int, header_rows: int, n_rows: int) -> int:
    """跨行单元格不跨越表头与表体的分界，返回所在区段的结束行（不含）"""
    return header_rows if row < header_rows else n_rows


def sample_spec(rng: np.random.Generator, gen_config: GenConfig) -> TableSpec:
    """
    随机生成一个满足全部约束的 TableSpec

    跨度采样失败（越界或与已有跨度重叠）时重新采样，多次失败则该位置退化为普通单元格
    """
    gen_config.validate()
    n_rows = int(rng.integers(gen_config.min_rows, gen_config.max_rows + 1))
    n_cols = int(rng.integers(gen_config.min_cols, gen_config.max_cols + 1))
    header_rows = int(rng.integers(0, min(gen_config.max_header_rows, n_rows) + 1))
    style = gen_config.styles[int(rng.integers(0, len(gen_config.styles)))]
    params = get_style(style)

    occupied = set()
    spans: List[Span] = []
    for r in range(n_rows):
        for c in range(n_cols):
            if (r, c) in occupied:
                continue
            if gen_config.span_prob > 0 and rng.random() < gen_config.span_prob:
                section_end = _section_bounds(r, header_rows, n_rows)
                max_rs = min(st.MAX_SPAN, section_end - r)
                max_cs = min(st.MAX_SPAN, n_cols - c)
                for _ in range(MAX_SPAN_ATTEMPTS):
                    rowspan = int(rng.integers(1, max_rs + 1))
                    colspan = int(rng.integers(1, max_cs + 1))
                    candidate = Span(r, c, rowspan, colspan)
                    if rowspan * colspan < 2:
                        continue
                    if any(p in occupied for p in candidate.positions()):
                        continue
                    spans.append(candidate)
                    occupied.update(candidate.positions())
                    break
            occupied.add((r, c))

    spec = TableSpec(n_rows=n_rows, n_cols=n_cols, header_rows=header_rows, spans=spans, style=style)
    covered = spec.covered()
    for r in range(n_rows):
        for c in range(n_cols):
            if (r, c) in covered or rng.random() < params.empty_prob:
                continue
            spec.cells[r][c] = _sample_text(rng, style, gen_config.max_text_len)
    return spec


def spec_to_structure_tokens(spec: TableSpec) -> List[str]:
    """按结构标记语法展开；跨度属性先 rowspan 后 colspan"""
    anchors = spec.span_anchors()
    covered = spec.covered()
    tokens: List[str] = []

    def emit_rows(rows: range) -> None:
        for r in rows:
            tokens.append(st.TR_OPEN)
            for c in range(spec.n_cols):
                if (r, c) in covered:
                    continue
                filled = spec.text_at(r, c) is not None
                span = anchors.get((r, c))
                if span is None:
                    tokens.append(st.CELL_FILLED if filled else st.CELL_EMPTY)
                    continue
                tokens.append(st.SPAN_OPEN)
                if span.rowspan > 1:
                    tokens.append(st.span_token('rowspan', span.rowspan))
                if span.colspan > 1:
                    tokens.append(st.span_token('colspan', span.colspan))
                tokens.append(st.SPAN_CLOSE_FILLED if filled else st.SPAN_CLOSE_EMPTY)
            tokens.append(st.TR_CLOSE)

    if spec.header_rows > 0:
        tokens.append(st.THEAD_OPEN)
        emit_rows(range(0, spec.header_rows))
        tokens.append(st.THEAD_CLOSE)
    if spec.header_rows < spec.n_rows:
        tokens.append(st.TBODY_OPEN)
        emit_rows(range(spec.header_rows, spec.n_rows))
        tokens.append(st.TBODY_CLOSE)
    return tokens
