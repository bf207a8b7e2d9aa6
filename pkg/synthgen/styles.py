"""
四种表格风格
finance / scientific / marketing / sparse，对应金融、论文、营销、稀疏四类合成表格
"""

from dataclasses import dataclass
from typing import Dict, Tuple

Color = Tuple[float, float, float]

WHITE: Color = (1.0, 1.0, 1.0)
BLACK: Color = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StyleParams:
    """渲染参数；颜色为 [0,1] 浮点 RGB"""

    name: str
    backgrounds: Tuple[Color, ...] = (WHITE,)
    header_backgrounds: Tuple[Color, ...] = ()
    grid_line_prob: float = 0.0
    line_thickness: int = 1
    line_color: Color = BLACK
    horizontal_rules: bool = False
    row_shading: bool = False
    shading_color: Color = (0.9, 0.9, 0.9)
    empty_prob: float = 0.1
    text_colors: Tuple[Color, ...] = (BLACK,)
    align: str = 'left'


STYLES: Dict[str, StyleParams] = {
    'finance': StyleParams(
        name='finance',
        grid_line_prob=0.7,
        row_shading=True,
        shading_color=(0.9, 0.92, 0.95),
        empty_prob=0.15,
        align='right',
    ),
    'scientific': StyleParams(
        name='scientific',
        horizontal_rules=True,
        empty_prob=0.1,
    ),
    'marketing': StyleParams(
        name='marketing',
        backgrounds=((0.55, 0.75, 0.9), (0.9, 0.78, 0.5), (0.68, 0.88, 0.68), (0.88, 0.62, 0.72)),
        header_backgrounds=((0.2, 0.3, 0.6), (0.6, 0.25, 0.2), (0.2, 0.5, 0.3)),
        grid_line_prob=0.3,
        line_color=(1.0, 1.0, 1.0),
        empty_prob=0.15,
        text_colors=((0.05, 0.05, 0.1), (0.25, 0.1, 0.05)),
        align='center',
    ),
    'sparse': StyleParams(
        name='sparse',
        grid_line_prob=0.3,
        empty_prob=0.6,
    ),
}

STYLE_NAMES = tuple(STYLES)


def get_style(name: str) -> StyleParams:
    if name not in STYLES:
        raise KeyError(f"unknown style {name!r}, expected one of {STYLE_NAMES}")
    return STYLES[name]
