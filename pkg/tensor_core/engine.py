"""
张量引擎
在 torch 动态计算图之上提供带形状检查的基本算子、反向传播入口和有限差分校验
"""

import logging
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence

import torch
import torch.nn.functional as F

from exceptions import NonScalarLossError, ShapeMismatchError

logger = logging.getLogger(__name__)


def _broadcast_shape(op: str, a: torch.Tensor, b: torch.Tensor) -> torch.Size:
    try:
        return torch.broadcast_shapes(a.shape, b.shape)
    except RuntimeError:
        raise ShapeMismatchError(op, a.shape, b.shape) from None


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """矩阵乘法，最后两维按 (m, k) x (k, n) 对齐"""
    if a.dim() < 2 or b.dim() < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    return torch.matmul(a, b)


def add(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _broadcast_shape("add", a, b)
    return a + b


def sub(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _broadcast_shape("sub", a, b)
    return a - b


def mul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    _broadcast_shape("mul", a, b)
    return a * b


def scale(x: torch.Tensor, factor: float) -> torch.Tensor:
    return x * factor


def shift(x: torch.Tensor, offset: float) -> torch.Tensor:
    return x + offset


def softmax(x: torch.Tensor) -> torch.Tensor:
    """沿最后一维归一化"""
    return F.softmax(x, dim=-1)


def layer_norm(
    x: torch.Tensor,
    weight: Optional[torch.Tensor] = None,
    bias: Optional[torch.Tensor] = None,
    eps: float = 1e-5,
) -> torch.Tensor:
    width = x.shape[-1]
    for name, param in (("weight", weight), ("bias", bias)):
        if param is not None and tuple(param.shape) != (width,):
            raise ShapeMismatchError(f"layer_norm.{name}", x.shape, param.shape)
    return F.layer_norm(x, (width,), weight, bias, eps)


def embedding(ids: torch.Tensor, table: torch.Tensor) -> torch.Tensor:
    if table.dim() != 2:
        raise ShapeMismatchError("embedding", ids.shape, table.shape)
    if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= table.shape[0]):
        raise ShapeMismatchError("embedding", ids.shape, table.shape)
    return F.embedding(ids, table)


def conv2d(
    x: torch.Tensor,
    weight: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> torch.Tensor:
    """二维卷积，x 为 (B, C, H, W)，weight 为 (C_out, C, k, k)"""
    if x.dim() != 4 or weight.dim() != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError("conv2d", x.shape, weight.shape)
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def transpose(x: torch.Tensor, dim0: int, dim1: int) -> torch.Tensor:
    return x.transpose(dim0, dim1)


def reshape(x: torch.Tensor, shape: Sequence[int]) -> torch.Tensor:
    try:
        return x.reshape(tuple(shape))
    except RuntimeError:
        raise ShapeMismatchError("reshape", x.shape, shape) from None


def gelu(x: torch.Tensor) -> torch.Tensor:
    return F.gelu(x)


def cross_entropy(
    logits: torch.Tensor,
    targets: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    逐位置交叉熵，可选位置掩码

    Args:
        logits: (..., V)
        targets: (...) 整数类别
        mask: (...) 布尔或 0/1，True 表示计入损失

    Returns:
        被计入位置上的平均损失（标量）
    """
    if logits.shape[:-1] != targets.shape:
        raise ShapeMismatchError("cross_entropy", logits.shape, targets.shape)
    per_position = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), reduction="none"
    ).reshape(targets.shape)
    if mask is None:
        return per_position.mean()
    if mask.shape != targets.shape:
        raise ShapeMismatchError("cross_entropy.mask", targets.shape, mask.shape)
    weights = mask.to(per_position.dtype)
    return (per_position * weights).sum() / weights.sum().clamp_min(1.0)


def mean(x: torch.Tensor, dim: Optional[int] = None) -> torch.Tensor:
    return x.mean() if dim is None else x.mean(dim=dim)


def total(x: torch.Tensor, dim: Optional[int] = None) -> torch.Tensor:
    return x.sum() if dim is None else x.sum(dim=dim)


_PRIMITIVES: Dict[str, Callable[..., torch.Tensor]] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "shift": shift,
    "softmax": softmax,
    "layer_norm": layer_norm,
    "embedding": embedding,
    "conv2d": conv2d,
    "transpose": transpose,
    "reshape": reshape,
    "gelu": gelu,
    "cross_entropy": cross_entropy,
    "mean": mean,
    "sum": total,
}


def primitive_set() -> Dict[str, Callable[..., torch.Tensor]]:
    """
    返回引擎支持的基本算子目录

    每个算子的前向由 torch 计算，反向规则由 autograd 在动态图上记录
    """
    return dict(_PRIMITIVES)


def backward(
    loss: torch.Tensor,
    tensors: Mapping[str, torch.Tensor],
    retain_graph: bool = False,
) -> Dict[str, torch.Tensor]:
    """
    对标量损失做反向传播

    Args:
        loss: 标量损失
        tensors: 需要梯度的张量，名称 -> 张量
        retain_graph: 是否保留计算图

    Returns:
        名称 -> 梯度；不在损失路径上的张量得到全零梯度
    """
    if loss.numel() != 1 or loss.dim() != 0:
        raise NonScalarLossError(loss.shape)

    names = [name for name, t in tensors.items() if t.requires_grad]
    grads = torch.autograd.grad(
        loss,
        [tensors[name] for name in names],
        retain_graph=retain_graph,
        allow_unused=True,
    ) if names else ()

    result = {name: torch.zeros_like(t) for name, t in tensors.items()}
    for name, grad in zip(names, grads):
        if grad is not None:
            result[name] = grad
    return result


def finite_difference_check(
    fn: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    h: float = 1e-3,
    floor: float = 1e-6,
) -> float:
    """
    中心差分校验解析梯度

    Args:
        fn: 接收 inputs 返回标量的函数
        inputs: 需要校验的张量（会被设置 requires_grad）
        h: 差分步长
        floor: 相对误差分母下限

    Returns:
        所有分量上的最大相对误差
    """
    leaves = [x.detach().clone().requires_grad_(True) for x in inputs]
    analytic = backward(fn(*leaves), {str(i): x for i, x in enumerate(leaves)})

    worst = 0.0
    with torch.no_grad():
        for i, x in enumerate(leaves):
            flat = x.view(-1)
            grad = analytic[str(i)].reshape(-1)
            for j in range(flat.numel()):
                original = flat[j].item()
                flat[j] = original + h
                plus = fn(*leaves).item()
                flat[j] = original - h
                minus = fn(*leaves).item()
                flat[j] = original
                numeric = (plus - minus) / (2 * h)
                denom = max(abs(numeric), abs(grad[j].item()), floor)
                worst = max(worst, abs(numeric - grad[j].item()) / denom)
    return worst


def all_finite(tensors: Iterable[torch.Tensor]) -> bool:
    return all(bool(torch.isfinite(t).all()) for t in tensors)
