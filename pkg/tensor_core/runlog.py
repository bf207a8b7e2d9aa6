"""
训练指标 CSV
每行一个记录步，列固定
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

logger = logging.getLogger(__name__)


class MetricsLog:
    """在内存里累积训练指标，可选地同步写入 CSV"""

    def __init__(self, fields: Sequence[str], path: Optional[Path] = None):
        self.fields = list(fields)
        self.rows: List[Dict] = []
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, 'w', newline='', encoding='utf-8') as f:
                csv.writer(f).writerow(self.fields)

    def append(self, **values) -> None:
        row = {k: values.get(k) for k in self.fields}
        self.rows.append(row)
        if self.path:
            with open(self.path, 'a', newline='', encoding='utf-8') as f:
                csv.writer(f).writerow([_fmt(row[k]) for k in self.fields])

    def column(self, name: str) -> List:
        return [row[name] for row in self.rows]

    def last(self) -> Dict:
        return self.rows[-1] if self.rows else {}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.8g}"
    return '' if value is None else str(value)
