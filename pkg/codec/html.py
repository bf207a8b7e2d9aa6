"""
把单元格内容填回结构标记，生成 HTML
"""

import html
import logging
from typing import List, Sequence

from exceptions import CodecError, CountMismatchError
from . import structure as st

logger = logging.getLogger(__name__)


def merge_html(structure_tokens: Sequence[str], contents: Sequence[str], strict: bool = True) -> str:
    """
    第 i 个内容替换第 i 个非空单元格的 "[]"，跨行/跨列单元格拼回
    <td rowspan=".." colspan="..">text</td>，外层包 <table>

    Args:
        structure_tokens: 结构标记（不含特殊符号）
        contents: 单元格内容
        strict: True 时数量不一致抛 CountMismatchError；False 时按较短的前缀合并，
            多出的占位符留空、多出的内容丢弃

    Raises:
        CodecError: 结构标记不合法
        CountMismatchError: strict 且数量不一致
    """
    issues = st.validate_structure(structure_tokens)
    if issues:
        raise CodecError(f"cannot merge malformed structure: {issues[0]}")

    placeholders = st.count_non_empty(structure_tokens)
    if placeholders != len(contents):
        if strict:
            raise CountMismatchError(placeholders, len(contents))
        logger.warning(f"merging {placeholders} cells with {len(contents)} contents, using min prefix")

    parts: List[str] = ['<table>']
    attrs: List[str] = []
    next_content = 0

    def fill() -> str:
        nonlocal next_content
        text = contents[next_content] if next_content < len(contents) else ''
        next_content += 1
        return html.escape(text, quote=False)

    for token in structure_tokens:
        if token == st.CELL_FILLED:
            parts.append(f'<td>{fill()}</td>')
        elif token == st.SPAN_OPEN:
            attrs = []
        elif st.parse_span_token(token) is not None:
            attrs.append(token)
        elif token in (st.SPAN_CLOSE_EMPTY, st.SPAN_CLOSE_FILLED):
            opening = '<td ' + ' '.join(attrs) + '>' if attrs else '<td>'
            text = fill() if token == st.SPAN_CLOSE_FILLED else ''
            parts.append(f'{opening}{text}</td>')
        else:
            parts.append(token)
    parts.append('</table>')
    return ''.join(parts)
