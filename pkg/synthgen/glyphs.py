"""
内置 5x7 点阵字形
每个字符 7 行，'#' 为墨迹像素；字符步进 6 像素，行高 8 像素（按缩放倍数放大）
"""

from typing import Dict

import numpy as np

GLYPH_WIDTH = 5
GLYPH_HEIGHT = 7
CHAR_ADVANCE = GLYPH_WIDTH + 1
LINE_ADVANCE = GLYPH_HEIGHT + 1

_FONT = {
    '0': ".###. #...# #..## #.#.# ##..# #...# .###.",
    '1': "..#.. .##.. ..#.. ..#.. ..#.. ..#.. .###.",
    '2': ".###. #...# ....# ...#. ..#.. .#... #####",
    '3': "##### ...#. ..#.. ...#. ....# #...# .###.",
    '4': "...#. ..##. .#.#. #..#. ##### ...#. ...#.",
    '5': "##### #.... ####. ....# ....# #...# .###.",
    '6': "..##. .#... #.... ####. #...# #...# .###.",
    '7': "##### ....# ...#. ..#.. .#... .#... .#...",
    '8': ".###. #...# #...# .###. #...# #...# .###.",
    '9': ".###. #...# #...# .#### ....# ...#. .##..",
    'A': ".###. #...# #...# ##### #...# #...# #...#",
    'B': "####. #...# #...# ####. #...# #...# ####.",
    'C': ".###. #...# #.... #.... #.... #...# .###.",
    'D': "###.. #..#. #...# #...# #...# #..#. ###..",
    'E': "##### #.... #.... ####. #.... #.... #####",
    'F': "##### #.... #.... ####. #.... #.... #....",
    'G': ".###. #...# #.... #.### #...# #...# .####",
    'H': "#...# #...# #...# ##### #...# #...# #...#",
    'I': ".###. ..#.. ..#.. ..#.. ..#.. ..#.. .###.",
    'J': "..### ...#. ...#. ...#. ...#. #..#. .##..",
    'K': "#...# #..#. #.#.. ##... #.#.. #..#. #...#",
    'L': "#.... #.... #.... #.... #.... #.... #####",
    'M': "#...# ##.## #.#.# #.#.# #...# #...# #...#",
    'N': "#...# #...# ##..# #.#.# #..## #...# #...#",
    'O': ".###. #...# #...# #...# #...# #...# .###.",
    'P': "####. #...# #...# ####. #.... #.... #....",
    'Q': ".###. #...# #...# #...# #.#.# #..#. .##.#",
    'R': "####. #...# #...# ####. #.#.. #..#. #...#",
    'S': ".#### #.... #.... .###. ....# ....# ####.",
    'T': "##### ..#.. ..#.. ..#.. ..#.. ..#.. ..#..",
    'U': "#...# #...# #...# #...# #...# #...# .###.",
    'V': "#...# #...# #...# #...# #...# .#.#. ..#..",
    'W': "#...# #...# #...# #.#.# #.#.# #.#.# .#.#.",
    'X': "#...# #...# .#.#. ..#.. .#.#. #...# #...#",
    'Y': "#...# #...# #...# .#.#. ..#.. ..#.. ..#..",
    'Z': "##### ....# ...#. ..#.. .#... #.... #####",
    '.': "..... ..... ..... ..... ..... .##.. .##..",
    '%': "##... ##..# ...#. ..#.. .#... #..## ...##",
    '-': "..... ..... ..... ##### ..... ..... .....",
    '$': "..#.. .#### #.#.. .###. ..#.# ####. ..#..",
    ' ': "..... ..... ..... ..... ..... ..... .....",
}

ALPHABET = ''.join(_FONT)


def _parse(rows: str) -> np.ndarray:
    return np.array([[c == '#' for c in row] for row in rows.split()], dtype=bool)


GLYPHS: Dict[str, np.ndarray] = {ch: _parse(rows) for ch, rows in _FONT.items()}


def glyph_mask(ch: str, scale: int = 1) -> np.ndarray:
    """字符的布尔点阵，按整数倍放大"""
    mask = GLYPHS[ch]
    if scale > 1:
        mask = np.kron(mask, np.ones((scale, scale), dtype=bool))
    return mask


def text_extent(line: str, scale: int = 1) -> int:
    """单行文本的像素宽度（不含末尾字符间距）"""
    if not line:
        return 0
    return (len(line) * CHAR_ADVANCE - 1) * scale


def max_chars(width: int, scale: int = 1) -> int:
    """给定宽度内可放下的字符数"""
    return max(0, (width + scale) // (CHAR_ADVANCE * scale))
