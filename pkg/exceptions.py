"""
异常定义
所有可预期的错误都继承自 TsrError，命令行入口据此返回非零退出码
"""

from typing import Any, Dict, List, Optional, Sequence


class TsrError(Exception):
    """项目内所有可预期错误的基类"""


class ConfigError(TsrError):
    """Raised when a config file or override is invalid."""

    def __init__(self, message: str, keys: Optional[List[str]] = None):
        self.keys = keys or []
        super().__init__(message)


class ShapeMismatchError(TsrError):
    """Raised when a primitive receives incompatible shapes."""

    def __init__(self, op: str, *shapes: Sequence[int]):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        joined = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: shape mismatch {joined}")


class NonScalarLossError(TsrError):
    """Raised when backward is asked to differentiate a non-scalar."""

    def __init__(self, shape: Sequence[int]):
        self.shape = tuple(shape)
        super().__init__(f"backward needs a scalar loss, got shape {self.shape}")


class CodecError(TsrError):
    """Raised when a token codec receives invalid input."""


class SequenceOverflowError(CodecError):
    """Raised when a serialized sequence would exceed the task maximum."""

    def __init__(self, task: str, max_length: int, index: int):
        self.task = task
        self.max_length = max_length
        self.index = index
        super().__init__(
            f"{task} sequence exceeds {max_length} tokens at item {index}"
        )


class CountMismatchError(CodecError):
    """Raised when cell placeholders and contents disagree in number."""

    def __init__(self, placeholders: int, contents: int):
        self.placeholders = placeholders
        self.contents = contents
        super().__init__(
            f"non-empty cell count {placeholders} != content count {contents}"
        )


class HtmlParseError(TsrError):
    """Raised when an HTML table cannot be parsed."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class CheckpointError(TsrError):
    """Raised when a checkpoint file is malformed."""


class EncoderMismatchError(TsrError):
    """Raised when encoder weights cannot be transferred."""

    def __init__(self, message: str, diff: Optional[Dict[str, Any]] = None):
        self.diff = diff or {}
        super().__init__(message)


class TrainingDivergedError(TsrError):
    """Raised when a loss blows up past the divergence limit."""

    def __init__(self, step: int, loss: float, initial_loss: float):
        self.step = step
        self.loss = loss
        self.initial_loss = initial_loss
        super().__init__(
            f"training diverged at step {step}: loss {loss:.6f} > 10x initial {initial_loss:.6f}"
        )


class CorpusError(TsrError):
    """Raised when a corpus directory cannot be read or written."""


class MetricError(TsrError):
    """Raised when metric inputs are malformed."""
