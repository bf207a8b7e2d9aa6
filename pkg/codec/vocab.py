"""
词表
token 与 id 的双射；0-3 号固定为 PAD/BOS/EOS/UNK
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from config import TASK_MAX_LENGTH
from exceptions import CodecError

logger = logging.getLogger(__name__)

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
SPECIAL_TOKENS = (PAD, BOS, EOS, UNK)


class Vocab:
    """token <-> id 双射，id 从 0 开始连续编号"""

    def __init__(self, tokens: Sequence[str], name: str = ""):
        self.name = name
        self._id_to_token: List[str] = list(SPECIAL_TOKENS)
        for token in tokens:
            if token in SPECIAL_TOKENS:
                continue
            self._id_to_token.append(token)

        self._token_to_id: Dict[str, int] = {}
        for i, token in enumerate(self._id_to_token):
            if token in self._token_to_id:
                raise CodecError(f"duplicate token {token!r} in vocab {name!r}")
            self._token_to_id[token] = i

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._id_to_token == other._id_to_token

    @property
    def tokens(self) -> List[str]:
        return list(self._id_to_token)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def unk_id(self) -> int:
        return 3

    def token_id(self, token: str) -> int:
        if token not in self._token_to_id:
            logger.warning(f"token {token!r} not in vocab {self.name!r}, encoded as UNK")
            return self.unk_id
        return self._token_to_id[token]

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_token):
            return UNK
        return self._id_to_token[token_id]

    def encode(self, tokens: Iterable[str], add_special: bool = True) -> List[int]:
        ids = [self.token_id(t) for t in tokens]
        if add_special:
            ids = [self.bos_id] + ids + [self.eos_id]
        return ids

    def decode(self, ids: Iterable[int], strip_special: bool = True) -> List[str]:
        """id 序列转 token；strip_special 时去掉 BOS/PAD 并在 EOS 处截止"""
        out = []
        for token_id in ids:
            token_id = int(token_id)
            if strip_special:
                if token_id == self.eos_id:
                    break
                if token_id in (self.bos_id, self.pad_id):
                    continue
            out.append(self.token(token_id))
        return out

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({'name': self.name, 'tokens': self._token_to_id}, f, ensure_ascii=False, indent=1)
        return path

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        mapping = data['tokens']
        ordered = sorted(mapping.items(), key=lambda kv: kv[1])
        if [i for _, i in ordered] != list(range(len(ordered))):
            raise CodecError(f"vocab ids in {path} are not dense from 0")
        if tuple(t for t, _ in ordered[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise CodecError(f"vocab {path} does not start with the special tokens")
        return cls([t for t, _ in ordered], name=data.get('name', ''))


@dataclass
class TokenSeq:
    """带任务标签的 id 序列"""

    ids: List[int]
    task: str

    def __post_init__(self):
        if self.task not in TASK_MAX_LENGTH:
            raise CodecError(f"unknown task {self.task!r}")

    @property
    def max_length(self) -> int:
        return TASK_MAX_LENGTH[self.task]

    def is_complete(self, vocab: Vocab) -> bool:
        return bool(self.ids) and self.ids[0] == vocab.bos_id and self.ids[-1] == vocab.eos_id

    def __len__(self) -> int:
        return len(self.ids)
