"""
标注数据结构
结构标记序列、单元格框、单元格内容，以及语料 JSONL 记录的读写
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence


@dataclass(frozen=True)
class BBox:
    """像素坐标框 (x_min, y_min, x_max, y_max)"""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "BBox":
        x_min, y_min, x_max, y_max = (float(v) for v in values)
        return cls(x_min, y_min, x_max, y_max)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        if not self.is_valid():
            return 0.0
        return self.width * self.height

    def is_valid(self) -> bool:
        return (
            all(math.isfinite(v) for v in self.as_list())
            and self.x_min < self.x_max
            and self.y_min < self.y_max
        )

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def scale(self, factor: float) -> "BBox":
        return BBox(self.x_min * factor, self.y_min * factor, self.x_max * factor, self.y_max * factor)


@dataclass
class Annotation:
    """一张表格图像的标注：S（结构标记）、B（非空单元格框）、C（非空单元格内容）"""

    structure_tokens: List[str]
    bboxes: List[BBox] = field(default_factory=list)
    contents: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'structure_tokens': list(self.structure_tokens),
            'bboxes': [b.as_list() for b in self.bboxes],
            'contents': list(self.contents),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Annotation":
        return cls(
            structure_tokens=list(data.get('structure_tokens', [])),
            bboxes=[BBox.from_list(b) for b in data.get('bboxes', [])],
            contents=list(data.get('contents', [])),
        )


@dataclass
class CorpusRecord:
    """语料 JSONL 的一行"""

    image_path: str
    annotation: Annotation
    style: str
    table_region: Optional[List[float]] = None
    faults: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        data = {'image_path': self.image_path}
        data.update(self.annotation.to_dict())
        data['style'] = self.style
        if self.table_region is not None:
            data['table_region'] = list(self.table_region)
        if self.faults:
            data['faults'] = list(self.faults)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "CorpusRecord":
        return cls(
            image_path=data['image_path'],
            annotation=Annotation.from_dict(data),
            style=data.get('style', ''),
            table_region=data.get('table_region'),
            faults=list(data.get('faults', [])),
        )
