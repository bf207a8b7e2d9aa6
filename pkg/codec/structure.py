"""
表格结构标记
词表、语法校验，以及从标记序列还原单元格网格
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from exceptions import CodecError
from .vocab import Vocab

logger = logging.getLogger(__name__)

THEAD_OPEN = "<thead>"
THEAD_CLOSE = "</thead>"
TBODY_OPEN = "<tbody>"
TBODY_CLOSE = "</tbody>"
TR_OPEN = "<tr>"
TR_CLOSE = "</tr>"
CELL_EMPTY = "<td></td>"
CELL_FILLED = "<td>[]</td>"
SPAN_OPEN = "<td"
SPAN_CLOSE_EMPTY = "></td>"
SPAN_CLOSE_FILLED = ">[]</td>"

MIN_SPAN = 2
MAX_SPAN = 19

ROWSPAN_TOKENS = [f'rowspan="{n}"' for n in range(MIN_SPAN, MAX_SPAN + 1)]
COLSPAN_TOKENS = [f'colspan="{n}"' for n in range(MIN_SPAN, MAX_SPAN + 1)]

TAG_TOKENS = [
    THEAD_OPEN, THEAD_CLOSE, TBODY_OPEN, TBODY_CLOSE, TR_OPEN, TR_CLOSE,
    CELL_EMPTY, CELL_FILLED, SPAN_OPEN, SPAN_CLOSE_EMPTY, SPAN_CLOSE_FILLED,
]
STRUCTURE_TOKENS = TAG_TOKENS + ROWSPAN_TOKENS + COLSPAN_TOKENS

NON_EMPTY_TOKENS = frozenset({CELL_FILLED, SPAN_CLOSE_FILLED})
GROUP_TAGS = {THEAD_OPEN: THEAD_CLOSE, TBODY_OPEN: TBODY_CLOSE}


def build_structure_vocab() -> Vocab:
    """结构任务词表：4 个特殊符号 + 11 个标签 + 18 个 rowspan + 18 个 colspan"""
    return Vocab(STRUCTURE_TOKENS, name="structure")


def span_token(kind: str, n: int) -> str:
    return f'{kind}="{n}"'


def parse_span_token(token: str) -> Optional[Tuple[str, int]]:
    """'rowspan="3"' -> ('rowspan', 3)；不是跨度属性时返回 None"""
    for kind in ("rowspan", "colspan"):
        prefix = f'{kind}="'
        if token.startswith(prefix) and token.endswith('"'):
            try:
                return kind, int(token[len(prefix):-1])
            except ValueError:
                return None
    return None


def count_non_empty(tokens: Sequence[str]) -> int:
    return sum(1 for t in tokens if t in NON_EMPTY_TOKENS)


@dataclass
class StructureIssue:
    position: int
    message: str

    def __str__(self) -> str:
        return f"position {self.position}: {self.message}"


def validate_structure(tokens: Sequence[str]) -> List[StructureIssue]:
    """
    校验结构标记语法

    检查 <thead>/<tbody>/<tr> 的嵌套、跨度属性只出现在 <td 与闭合标记之间、
    每个单元格至多一个 rowspan 和一个 colspan、每个 <td 最终闭合

    Returns:
        问题列表，空列表表示合法
    """
    issues: List[StructureIssue] = []
    group: Optional[str] = None
    in_row = False
    span_attrs: Optional[Dict[str, int]] = None

    for pos, token in enumerate(tokens):
        span = parse_span_token(token)
        if span is not None:
            kind, n = span
            if span_attrs is None:
                issues.append(StructureIssue(pos, f"{token} outside a <td ... > cell"))
            elif kind in span_attrs:
                issues.append(StructureIssue(pos, f"duplicate {kind} attribute in cell opened at {span_attrs[kind]}"))
            else:
                span_attrs[kind] = pos
            if not MIN_SPAN <= n <= MAX_SPAN:
                issues.append(StructureIssue(pos, f"{kind} {n} outside [{MIN_SPAN}, {MAX_SPAN}]"))
            continue

        if span_attrs is not None and token not in (SPAN_CLOSE_EMPTY, SPAN_CLOSE_FILLED):
            issues.append(StructureIssue(pos, f"{token} inside an unclosed <td"))
            span_attrs = None

        if token in GROUP_TAGS:
            if in_row or group is not None:
                issues.append(StructureIssue(pos, f"{token} nested inside {'<tr>' if in_row else group}"))
            group = token
            in_row = False
        elif token in (THEAD_CLOSE, TBODY_CLOSE):
            if in_row:
                issues.append(StructureIssue(pos, f"{token} closes a group while <tr> is open"))
                in_row = False
            if group is None or GROUP_TAGS[group] != token:
                issues.append(StructureIssue(pos, f"{token} does not match open group {group}"))
            group = None
        elif token == TR_OPEN:
            if in_row:
                issues.append(StructureIssue(pos, "<tr> nested inside <tr>"))
            in_row = True
        elif token == TR_CLOSE:
            if not in_row:
                issues.append(StructureIssue(pos, "</tr> without <tr>"))
            in_row = False
        elif token in (CELL_EMPTY, CELL_FILLED):
            if not in_row:
                issues.append(StructureIssue(pos, f"{token} outside <tr>"))
        elif token == SPAN_OPEN:
            if not in_row:
                issues.append(StructureIssue(pos, "<td outside <tr>"))
            span_attrs = {}
        elif token in (SPAN_CLOSE_EMPTY, SPAN_CLOSE_FILLED):
            if span_attrs is None:
                issues.append(StructureIssue(pos, f"{token} without <td"))
            span_attrs = None
        else:
            issues.append(StructureIssue(pos, f"unknown token {token!r}"))

    end = len(tokens)
    if span_attrs is not None:
        issues.append(StructureIssue(end, "unclosed <td"))
    if in_row:
        issues.append(StructureIssue(end, "unclosed <tr>"))
    if group is not None:
        issues.append(StructureIssue(end, f"unclosed {group}"))
    return issues


@dataclass
class GridCell:
    """网格上定位好的单元格，index 为其在结构序列中的顺序"""

    index: int
    row: int
    col: int
    rowspan: int = 1
    colspan: int = 1
    non_empty: bool = False
    header: bool = False
    content_index: Optional[int] = None

    def positions(self) -> List[Tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.row, self.row + self.rowspan)
            for c in range(self.col, self.col + self.colspan)
        ]


@dataclass
class TableGrid:
    n_rows: int
    n_cols: int
    cells: List[GridCell] = field(default_factory=list)
    occupancy: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def non_empty_cells(self) -> List[GridCell]:
        return [c for c in self.cells if c.non_empty]


def structure_to_grid(tokens: Sequence[str], strict: bool = True) -> TableGrid:
    """
    按 HTML 表格布局规则把结构标记还原成单元格网格

    Args:
        tokens: 结构标记（不含特殊符号）
        strict: 语法不合法时是否抛出 CodecError

    Returns:
        TableGrid，非空单元格按出现顺序编号 content_index
    """
    if strict:
        issues = validate_structure(tokens)
        if issues:
            raise CodecError(f"invalid structure: {issues[0]}")

    occupancy: Dict[Tuple[int, int], int] = {}
    cells: List[GridCell] = []
    row = -1
    col = 0
    header = False
    pending: Optional[GridCell] = None
    content_index = 0

    def place(cell: GridCell) -> None:
        nonlocal col, content_index
        while (cell.row, col) in occupancy:
            col += 1
        cell.col = col
        for position in cell.positions():
            occupancy.setdefault(position, cell.index)
        if cell.non_empty:
            cell.content_index = content_index
            content_index += 1
        cells.append(cell)
        col += cell.colspan

    for token in tokens:
        if token == THEAD_OPEN:
            header = True
        elif token in (THEAD_CLOSE, TBODY_OPEN, TBODY_CLOSE):
            header = False
        elif token == TR_OPEN:
            row += 1
            col = 0
        elif token in (CELL_EMPTY, CELL_FILLED):
            row = max(row, 0)
            place(GridCell(len(cells), row, 0, non_empty=token == CELL_FILLED, header=header))
        elif token == SPAN_OPEN:
            row = max(row, 0)
            pending = GridCell(len(cells), row, 0, header=header)
        elif pending is not None and parse_span_token(token) is not None:
            kind, n = parse_span_token(token)
            setattr(pending, kind, max(1, n))
        elif token in (SPAN_CLOSE_EMPTY, SPAN_CLOSE_FILLED) and pending is not None:
            pending.non_empty = token == SPAN_CLOSE_FILLED
            place(pending)
            pending = None

    n_rows = max((r for r, _ in occupancy), default=-1) + 1
    n_cols = max((c for _, c in occupancy), default=-1) + 1
    return TableGrid(n_rows=n_rows, n_cols=n_cols, cells=cells, occupancy=occupancy)
