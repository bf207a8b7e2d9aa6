"""
HTML 表格解析
把 merge_html 的输出（或任何同一标签集合的表格）解析成有序树，供 TEDS 使用
"""

import logging
from html import escape
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

from lxml import etree

from exceptions import HtmlParseError

logger = logging.getLogger(__name__)

TABLE_TAGS = {'table', 'thead', 'tbody', 'tr', 'td', 'th'}
CELL_TAGS = {'td', 'th'}


@dataclass
class TableNode:
    tag: str
    rowspan: int = 1
    colspan: int = 1
    content: Optional[str] = None
    children: List["TableNode"] = field(default_factory=list)

    @property
    def is_cell(self) -> bool:
        return self.tag in CELL_TAGS

    def label(self):
        return (self.tag, self.rowspan, self.colspan)

    def walk(self) -> Iterator["TableNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def size(self) -> int:
        return sum(1 for _ in self.walk())


def _offset(html: str, line: int, column: int) -> int:
    """lxml 的 (行, 列) 转成字符偏移"""
    lines = html.split('\n')
    line = max(1, min(line, len(lines)))
    return sum(len(l) + 1 for l in lines[:line - 1]) + max(column - 1, 0)


def _span(element, name: str, html: str) -> int:
    raw = element.get(name)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise HtmlParseError(f"{name}={raw!r} is not an integer", _offset(html, element.sourceline or 1, 1))
    if value < 1:
        raise HtmlParseError(f"{name}={value} must be >= 1", _offset(html, element.sourceline or 1, 1))
    return value


def _convert(element, html: str) -> TableNode:
    tag = element.tag
    if not isinstance(tag, str) or tag not in TABLE_TAGS:
        raise HtmlParseError(f"unexpected element <{tag}>", _offset(html, element.sourceline or 1, 1))
    if tag in CELL_TAGS:
        return TableNode(
            tag='td',
            rowspan=_span(element, 'rowspan', html),
            colspan=_span(element, 'colspan', html),
            content=''.join(element.itertext()),
        )
    node = TableNode(tag=tag)
    node.children = [_convert(child, html) for child in element]
    return node


def html_to_tree(html: str) -> TableNode:
    """
    严格解析表格 HTML

    单元格是叶子，文本原样保留（实体已解码）；th 按 td 处理

    Raises:
        HtmlParseError: 标签不配对、出现未知标签或根节点不是 table
    """
    if not html or not html.strip():
        raise HtmlParseError("empty html", 0)
    parser = etree.XMLParser(recover=False, remove_comments=True, resolve_entities=False)
    try:
        root = etree.fromstring(html.strip().encode('utf-8'), parser)
    except etree.XMLSyntaxError as e:
        line, column = e.position if e.position else (1, 1)
        raise HtmlParseError(f"malformed table html: {e.msg}", _offset(html.strip(), line, column)) from e
    if root.tag != 'table':
        raise HtmlParseError(f"root element is <{root.tag}>, expected <table>", 0)
    return _convert(root, html)


def tree_to_html(node: TableNode) -> str:
    """树写回 HTML，主要用于测试与调试"""
    if node.is_cell:
        attrs = ''
        if node.rowspan > 1:
            attrs += f' rowspan="{node.rowspan}"'
        if node.colspan > 1:
            attrs += f' colspan="{node.colspan}"'
        return f'<td{attrs}>{escape(node.content or "", quote=False)}</td>'
    inner = ''.join(tree_to_html(child) for child in node.children)
    return f'<{node.tag}>{inner}</{node.tag}>'
