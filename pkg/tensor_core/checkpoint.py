"""
检查点文件格式

布局（全部小端）:
    8 字节   魔数 b"TSRCKPT1"
    8 字节   头部长度 L（uint64）
    L 字节   UTF-8 JSON 头部:
             {"metadata": {...},
              "tensors": [{"name", "shape", "dtype", "offset", "nbytes"}, ...]}
    其余     按头部顺序拼接的原始数据

模型参数都是 float32（<f4）；其他张量按头部 dtype 以各自的小端格式存储，整数和 float64 也能逐位还原。
JSON 以 sort_keys 写出，同样的输入得到逐字节相同的文件。
"""

import json
import struct
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple

import numpy as np
import torch

from exceptions import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"TSRCKPT1"

# dtype 名 -> (torch dtype, 磁盘上的 numpy 格式)
_DTYPES = {
    "float32": (torch.float32, "<f4"),
    "float64": (torch.float64, "<f8"),
    "int64": (torch.int64, "<i8"),
    "int32": (torch.int32, "<i4"),
    "bool": (torch.bool, "|b1"),
}


def save_checkpoint(
    path: Path,
    tensors: Mapping[str, torch.Tensor],
    metadata: Dict[str, Any],
) -> Path:
    """
    保存参数到检查点文件

    Args:
        path: 输出路径
        tensors: 参数名 -> 张量（通常是 state_dict）
        metadata: 配置、步数等元信息（须可 JSON 序列化）

    Returns:
        写入的路径
    """
    path = Path(path)
    entries = []
    payloads = []
    offset = 0
    for name, tensor in tensors.items():
        dtype_name = str(tensor.dtype).replace("torch.", "")
        if dtype_name not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {tensor.dtype} for {name}")
        data = tensor.detach().cpu().contiguous().numpy().astype(_DTYPES[dtype_name][1]).tobytes()
        entries.append({
            "name": name,
            "shape": list(tensor.shape),
            "dtype": dtype_name,
            "offset": offset,
            "nbytes": len(data),
        })
        payloads.append(data)
        offset += len(data)

    header = json.dumps(
        {"metadata": metadata, "tensors": entries},
        sort_keys=True,
        ensure_ascii=False,
    ).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for data in payloads:
            f.write(data)

    logger.info(f"✓ Saved checkpoint: {path.name} ({len(entries)} tensors, {offset / 1024:.1f}KB)")
    return path


def load_checkpoint(path: Path) -> Tuple["OrderedDict[str, torch.Tensor]", Dict[str, Any]]:
    """
    读取检查点文件

    Returns:
        (参数名 -> 张量, 元信息)
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")

    raw = path.read_bytes()
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic in {path}")

    (header_len,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt header in {path}: {e}") from e

    base = 16 + header_len
    tensors: "OrderedDict[str, torch.Tensor]" = OrderedDict()
    for entry in header["tensors"]:
        start = base + entry["offset"]
        chunk = raw[start:start + entry["nbytes"]]
        if len(chunk) != entry["nbytes"]:
            raise CheckpointError(f"truncated payload for {entry['name']} in {path}")
        if entry["dtype"] not in _DTYPES:
            raise CheckpointError(f"unknown dtype {entry['dtype']} for {entry['name']} in {path}")
        torch_dtype, disk_format = _DTYPES[entry["dtype"]]
        array = np.frombuffer(chunk, dtype=disk_format).reshape(entry["shape"])
        native = array.astype(np.dtype(disk_format).newbyteorder("="))
        tensors[entry["name"]] = torch.from_numpy(native).to(torch_dtype)

    return tensors, header["metadata"]
