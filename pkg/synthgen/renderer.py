"""
表格渲染
用内置点阵字形把 TableSpec 画成 RGB 浮点图像，同时给出精确的单元格框标注
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from annotations import Annotation, BBox
from exceptions import ConfigError
from .glyphs import CHAR_ADVANCE, GLYPH_HEIGHT, LINE_ADVANCE, glyph_mask, max_chars, text_extent
from .styles import WHITE, StyleParams, get_style
from .table_spec import TableSpec, cell_padding, glyph_scale, spec_to_structure_tokens, table_margin

logger = logging.getLogger(__name__)


@dataclass
class RenderLog:
    """生成日志：文本截断记录和每个单元格的单词框（供故障注入使用）"""

    truncations: List[Dict] = field(default_factory=list)
    word_boxes: List[List[BBox]] = field(default_factory=list)
    table_region: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    style: str = ""


class RenderedTable(NamedTuple):
    image: np.ndarray
    annotation: Annotation
    log: RenderLog


def grid_edges(image_size: int, n: int) -> np.ndarray:
    """表格区域等分成 n 段的整数边界"""
    margin = table_margin(image_size)
    return np.linspace(margin, image_size - margin, n + 1).round().astype(int)


def wrap_text(text: str, chars_per_line: int, max_lines: int) -> List[str]:
    """
    按空格折行，放不下的部分截断

    Returns:
        实际绘制的各行文本（可能为空列表）
    """
    if chars_per_line <= 0 or max_lines <= 0:
        return []
    if len(text) <= chars_per_line:
        return [text]

    lines: List[str] = []
    current = ''
    for word in text.split(' '):
        candidate = f"{current} {word}" if current else word
        if len(candidate) <= chars_per_line:
            current = candidate
            continue
        if current:
            lines.append(current)
        current = word[:chars_per_line]
        if len(lines) == max_lines:
            break
    if current and len(lines) < max_lines:
        lines.append(current)
    return [line.rstrip() for line in lines[:max_lines] if line.strip()]


def _fill(image: np.ndarray, x0: int, y0: int, x1: int, y1: int, color) -> None:
    image[max(y0, 0):max(y1, 0), max(x0, 0):max(x1, 0)] = color


def _draw_text(image: np.ndarray, lines: List[str], x: int, y: int, scale: int, color, align: str, width: int) -> None:
    for k, line in enumerate(lines):
        lx = x + _line_offset(line, scale, align, width)
        ly = y + k * LINE_ADVANCE * scale
        for i, ch in enumerate(line):
            mask = glyph_mask(ch, scale)
            gx = lx + i * CHAR_ADVANCE * scale
            region = image[ly:ly + mask.shape[0], gx:gx + mask.shape[1]]
            region[mask[:region.shape[0], :region.shape[1]]] = color


def _line_offset(line: str, scale: int, align: str, width: int) -> int:
    extent = text_extent(line, scale)
    if align == 'right':
        return width - extent
    if align == 'center':
        return (width - extent) // 2
    return 0


def render(
    spec: TableSpec,
    image_size: int,
    rng: np.random.Generator,
    style: Optional[StyleParams] = None,
    max_text_lines: int = 2,
) -> RenderedTable:
    """
    渲染一张表格

    每个非空单元格只有一个紧贴文本的框（按单元格标注，不按单词）；
    文本在单元格内顶部对齐，放不下时截断并记入日志

    Args:
        spec: 表格规格
        image_size: 图像边长（像素）
        rng: 随机数生成器（颜色、线条选择）
        style: 渲染风格，None 时按 spec.style 取
        max_text_lines: 单元格最多绘制的行数

    Returns:
        RenderedTable(image, annotation, log)，image 为 HxWx3 float32，取值 [0,1]
    """
    problems = spec.problems()
    if problems:
        raise ConfigError("invalid table spec: " + "; ".join(problems), problems)
    style = style or get_style(spec.style)
    scale = glyph_scale(image_size)
    pad = cell_padding(image_size)
    margin = table_margin(image_size)

    background = style.backgrounds[int(rng.integers(0, len(style.backgrounds)))]
    image = np.empty((image_size, image_size, 3), dtype=np.float32)
    image[:] = background

    xs = grid_edges(image_size, spec.n_cols)
    ys = grid_edges(image_size, spec.n_rows)
    cells = spec.layout()
    region = (float(margin), float(margin), float(image_size - margin), float(image_size - margin))
    log = RenderLog(table_region=region, style=spec.style)
    text_color = style.text_colors[int(rng.integers(0, len(style.text_colors)))]

    has_text = any(spec.text_at(c.row, c.col) is not None for c in cells)
    draw_lines = style.grid_line_prob > 0 and rng.random() < style.grid_line_prob
    header_color = None
    if style.header_backgrounds:
        header_color = style.header_backgrounds[int(rng.integers(0, len(style.header_backgrounds)))]

    # 没有文本的表格只保留纯背景
    if has_text:
        for cell in cells:
            x0, x1 = xs[cell.col], xs[cell.col + cell.colspan]
            y0, y1 = ys[cell.row], ys[cell.row + cell.rowspan]
            if cell.row < spec.header_rows and header_color is not None:
                _fill(image, x0, y0, x1, y1, header_color)
            elif style.row_shading and (cell.row - spec.header_rows) % 2 == 1:
                _fill(image, x0, y0, x1, y1, style.shading_color)
        t = style.line_thickness
        if draw_lines:
            for cell in cells:
                x0, x1 = xs[cell.col], xs[cell.col + cell.colspan]
                y0, y1 = ys[cell.row], ys[cell.row + cell.rowspan]
                _fill(image, x0, y0, x1, y0 + t, style.line_color)
                _fill(image, x0, y1 - t, x1, y1, style.line_color)
                _fill(image, x0, y0, x0 + t, y1, style.line_color)
                _fill(image, x1 - t, y0, x1, y1, style.line_color)
        if style.horizontal_rules:
            left, right = xs[0], xs[-1]
            _fill(image, left, ys[0], right, ys[0] + t, style.line_color)
            _fill(image, left, ys[-1] - t, right, ys[-1], style.line_color)
            if 0 < spec.header_rows < spec.n_rows:
                y = ys[spec.header_rows]
                _fill(image, left, y - t, right, y, style.line_color)

    bboxes: List[BBox] = []
    contents: List[str] = []
    for cell in cells:
        text = spec.text_at(cell.row, cell.col)
        if text is None:
            continue
        x0, x1 = int(xs[cell.col]) + pad, int(xs[cell.col + cell.colspan]) - pad
        y0, y1 = int(ys[cell.row]) + pad, int(ys[cell.row + cell.rowspan]) - pad
        width, height = x1 - x0, y1 - y0
        per_line = max_chars(width, scale)
        n_lines = min(max_text_lines, max(0, (height + scale) // (LINE_ADVANCE * scale)))
        lines = wrap_text(text, per_line, n_lines) or [text[:max(per_line, 1)]]
        rendered = ' '.join(lines)
        if rendered != text:
            log.truncations.append({'row': cell.row, 'col': cell.col, 'text': text, 'rendered': rendered})
            logger.debug(f"cell ({cell.row}, {cell.col}) text {text!r} truncated to {rendered!r}")

        color = WHITE if (cell.row < spec.header_rows and header_color is not None) else text_color
        _draw_text(image, lines, x0, y0, scale, color, style.align, width)

        offsets = [_line_offset(line, scale, style.align, width) for line in lines]
        left = x0 + min(offsets)
        right = x0 + max(o + text_extent(line, scale) for o, line in zip(offsets, lines))
        bottom = y0 + (len(lines) - 1) * LINE_ADVANCE * scale + GLYPH_HEIGHT * scale
        bboxes.append(BBox(float(left), float(y0), float(right), float(bottom)))
        contents.append(rendered)

        words = []
        for k, (line, offset) in enumerate(zip(lines, offsets)):
            ly = y0 + k * LINE_ADVANCE * scale
            start = 0
            for word in line.split(' '):
                if word:
                    wx = x0 + offset + start * CHAR_ADVANCE * scale
                    words.append(BBox(float(wx), float(ly), float(wx + text_extent(word, scale)), float(ly + GLYPH_HEIGHT * scale)))
                start += len(word) + 1
        log.word_boxes.append(words)

    annotation = Annotation(structure_tokens=spec_to_structure_tokens(spec), bboxes=bboxes, contents=contents)
    return RenderedTable(np.clip(image, 0.0, 1.0), annotation, log)
