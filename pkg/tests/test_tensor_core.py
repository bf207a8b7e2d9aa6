"""
张量引擎测试
算子梯度（有限差分）、反向传播、AdamW、学习率调度、检查点格式
"""

import sys
import math
import tempfile
from pathlib import Path

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging

import torch

logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)


def _uniform(gen: torch.Generator, *shape: int) -> torch.Tensor:
    return torch.rand(*shape, generator=gen, dtype=torch.float64) * 4.0 - 2.0


def test_primitives():
    """算子的基本性质和形状检查"""
    logger.info("="*60)
    logger.info("测试：基本算子")
    logger.info("="*60)

    from tensor_core import backward, primitive_set
    from exceptions import ShapeMismatchError

    ops = primitive_set()

    logger.info("\n[测试1] 算子目录")
    for name in ('matmul', 'add', 'sub', 'mul', 'scale', 'shift', 'softmax', 'layer_norm',
                 'embedding', 'conv2d', 'transpose', 'reshape', 'gelu', 'cross_entropy', 'mean', 'sum'):
        assert name in ops, f"缺少算子 {name}"
    logger.info(f"✓ 共 {len(ops)} 个算子")

    logger.info("\n[测试2] softmax([0, 0])")
    out = ops['softmax'](torch.zeros(2))
    assert torch.allclose(out, torch.tensor([0.5, 0.5]))
    logger.info(f"✓ {out.tolist()}")

    logger.info("\n[测试3] d(x*x)/dx at x=3")
    x = torch.tensor(3.0, requires_grad=True)
    grads = backward(ops['mul'](x, x), {'x': x})
    assert abs(grads['x'].item() - 6.0) < 1e-6
    logger.info(f"✓ 梯度 = {grads['x'].item()}")

    logger.info("\n[测试4] matmul 形状")
    a = torch.randn(2, 3, requires_grad=True)
    b = torch.randn(3, 4, requires_grad=True)
    out = ops['matmul'](a, b)
    assert out.shape == (2, 4)
    grads = backward(ops['sum'](out), {'a': a, 'b': b})
    assert grads['a'].shape == a.shape and grads['b'].shape == b.shape
    logger.info("✓ (2,3) x (3,4) -> (2,4)，梯度形状与输入一致")

    logger.info("\n[测试5] 形状不匹配")
    try:
        ops['matmul'](torch.zeros(2, 3), torch.zeros(4, 5))
    except ShapeMismatchError as e:
        assert e.op == 'matmul'
        assert e.shapes == [(2, 3), (4, 5)]
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("形状不匹配应当被拒绝")
    try:
        ops['add'](torch.zeros(2, 3), torch.zeros(4))
    except ShapeMismatchError as e:
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("无法广播的加法应当被拒绝")

    logger.info("\n[测试6] softmax 归一化 / layer_norm 统计量")
    gen = torch.Generator().manual_seed(0)
    x = _uniform(gen, 6, 8).float()
    probs = ops['softmax'](x)
    assert bool((probs >= 0).all())
    assert float((probs.sum(-1) - 1).abs().max()) < 1e-5
    normed = ops['layer_norm'](x)
    assert float(normed.mean(-1).abs().max()) < 1e-5
    assert float((normed.var(-1, unbiased=False) - 1).abs().max()) < 1e-3
    logger.info("✓ softmax 每行和为 1，layer_norm 每行均值 0 方差 1")

    logger.info("\n" + "="*60)
    logger.info("✓ 基本算子测试通过")
    logger.info("="*60)


def test_gradients():
    """每个算子的解析梯度与中心差分一致"""
    logger.info("="*60)
    logger.info("测试：有限差分梯度校验")
    logger.info("="*60)

    from tensor_core import finite_difference_check, primitive_set

    ops = primitive_set()
    gen = torch.Generator().manual_seed(7)
    w34 = _uniform(gen, 3, 4)
    w5 = _uniform(gen, 4, 5)
    targets = torch.tensor([0, 3, 1, 4])
    mask = torch.tensor([True, False, True, True])
    ids = torch.tensor([[0, 2], [5, 2]])
    w_conv = _uniform(gen, 1, 3, 3, 3)
    w_emb = _uniform(gen, 2, 2, 3)

    cases = {
        'matmul': (lambda a, b: ops['sum'](ops['mul'](ops['matmul'](a, b), w34)),
                   [_uniform(gen, 3, 5), _uniform(gen, 5, 4)]),
        'add': (lambda a, b: ops['sum'](ops['mul'](ops['add'](a, b), w34)),
                [_uniform(gen, 3, 4), _uniform(gen, 4)]),
        'sub': (lambda a, b: ops['sum'](ops['mul'](ops['sub'](a, b), w34)),
                [_uniform(gen, 3, 4), _uniform(gen, 3, 4)]),
        'mul': (lambda a, b: ops['sum'](ops['mul'](a, b)),
                [_uniform(gen, 3, 4), _uniform(gen, 3, 4)]),
        'scale/shift': (lambda x: ops['sum'](ops['mul'](ops['shift'](ops['scale'](x, 1.7), -0.3), w34)),
                        [_uniform(gen, 3, 4)]),
        'softmax': (lambda x: ops['sum'](ops['mul'](ops['softmax'](x), w34)),
                    [_uniform(gen, 3, 4)]),
        'layer_norm': (lambda x, g, b: ops['sum'](ops['mul'](ops['layer_norm'](x, g, b), w5)),
                       [_uniform(gen, 4, 5), _uniform(gen, 5), _uniform(gen, 5)]),
        'embedding': (lambda t: ops['sum'](ops['mul'](ops['embedding'](ids, t), w_emb)),
                      [_uniform(gen, 6, 3)]),
        'conv2d': (lambda x, k, b: ops['sum'](ops['mul'](ops['conv2d'](x, k, b, stride=2, padding=1), w_conv)),
                   [_uniform(gen, 1, 2, 5, 5), _uniform(gen, 3, 2, 3, 3), _uniform(gen, 3)]),
        'transpose/reshape': (lambda x: ops['sum'](ops['mul'](ops['reshape'](ops['transpose'](x, 0, 1), (3, 4)), w34)),
                              [_uniform(gen, 4, 3)]),
        'gelu': (lambda x: ops['sum'](ops['mul'](ops['gelu'](x), w34)),
                 [_uniform(gen, 3, 4)]),
        'cross_entropy': (lambda z: ops['cross_entropy'](z, targets, mask),
                          [_uniform(gen, 4, 5)]),
        'mean': (lambda x: ops['mean'](ops['mul'](x, x)),
                 [_uniform(gen, 3, 4)]),
    }

    logger.info("\n[测试1] 逐算子校验 (h=1e-3, float64)")
    for name, (fn, inputs) in cases.items():
        error = finite_difference_check(fn, inputs, h=1e-3, floor=1e-3)
        assert error < 1e-3, f"{name} 相对误差 {error:.2e}"
        logger.info(f"✓ {name}: 最大相对误差 {error:.2e}")

    logger.info("\n[测试2] 三层 MLP")
    x = _uniform(gen, 4, 6)
    params = [_uniform(gen, 6, 8), _uniform(gen, 8), _uniform(gen, 8, 8), _uniform(gen, 8),
              _uniform(gen, 8, 3), _uniform(gen, 3)]

    def mlp(w1, b1, w2, b2, w3, b3):
        h = ops['gelu'](ops['add'](ops['matmul'](x, w1), b1))
        h = ops['gelu'](ops['add'](ops['matmul'](h, w2), b2))
        logits = ops['add'](ops['matmul'](h, w3), b3)
        return ops['cross_entropy'](logits, torch.tensor([0, 1, 2, 1]))

    error = finite_difference_check(mlp, params, h=1e-3, floor=1e-3)
    assert error < 1e-3, f"MLP 相对误差 {error:.2e}"
    logger.info(f"✓ MLP 最大相对误差 {error:.2e}")

    logger.info("\n" + "="*60)
    logger.info("✓ 梯度校验通过")
    logger.info("="*60)


def test_backward():
    """反向传播入口"""
    logger.info("="*60)
    logger.info("测试：反向传播")
    logger.info("="*60)

    from tensor_core import backward
    from exceptions import NonScalarLossError

    logger.info("\n[测试1] sum(w * x) 对 x 的梯度等于 w")
    w = torch.tensor([1.5, -2.0, 0.25])
    x = torch.randn(3, requires_grad=True)
    unused = torch.randn(2, requires_grad=True)
    grads = backward((w * x).sum(), {'x': x, 'unused': unused})
    assert torch.allclose(grads['x'], w)
    logger.info(f"✓ 梯度 = {grads['x'].tolist()}")

    logger.info("\n[测试2] 不在损失路径上的张量")
    assert torch.equal(grads['unused'], torch.zeros(2))
    logger.info("✓ 得到全零梯度")

    logger.info("\n[测试3] 非标量损失")
    try:
        backward(x * 2, {'x': x})
    except NonScalarLossError as e:
        assert e.shape == (3,)
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("非标量损失应当被拒绝")


def test_optimizer():
    """AdamW 单步更新与学习率调度"""
    logger.info("="*60)
    logger.info("测试：AdamW 与学习率调度")
    logger.info("="*60)

    from tensor_core import AdamWConfig, LrSchedule, adamw_step, build_optimizer, lr_at
    from exceptions import ConfigError

    def one_step(value: float, grad: float, weight_decay: float):
        p = torch.nn.Parameter(torch.tensor([value]))
        opt = build_optimizer([p], AdamWConfig(lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=weight_decay))
        p.grad = torch.tensor([grad])
        result = adamw_step(opt, grad_clip=None)
        return p.detach().item(), result

    logger.info("\n[测试1] 零梯度、无权重衰减")
    value, result = one_step(1.0, 0.0, 0.0)
    assert result.applied and value == 1.0
    logger.info("✓ 参数不变")

    logger.info("\n[测试2] g=1, lr=0.1 的第一步")
    value, _ = one_step(1.0, 1.0, 0.0)
    assert abs((value - 1.0) + 0.1) < 1e-5
    logger.info(f"✓ Δp = {value - 1.0:.6f}")

    logger.info("\n[测试3] 解耦权重衰减")
    value, _ = one_step(2.0, 0.0, 0.1)
    assert abs(value - (2.0 - 0.1 * 0.1 * 2.0)) < 1e-6
    logger.info(f"✓ p: 2.0 -> {value:.6f}")

    logger.info("\n[测试4] NaN 梯度")
    value, result = one_step(1.0, float('nan'), 0.0)
    assert not result.applied and result.diagnostic
    assert value == 1.0
    logger.info(f"✓ 放弃本步: {result.diagnostic}")

    logger.info("\n[测试5] 线性预热 + 余弦退火")
    schedule = LrSchedule(base_lr=1e-3, warmup_steps=10, total_steps=110)
    assert lr_at(schedule, 0) == 0.0
    assert abs(lr_at(schedule, 10) - 1e-3) < 1e-12
    assert abs(lr_at(schedule, 60) - 5e-4) < 1e-12
    assert abs(lr_at(schedule, 110)) < 1e-12
    assert lr_at(schedule, 200) == 0.0
    logger.info("✓ step 0 / 10 / 60 / 110 / 200 -> 0 / base / base/2 / 0 / 0")

    logger.info("\n[测试6] 非法调度")
    for warmup, total in ((10, 10), (-1, 5)):
        try:
            LrSchedule(base_lr=1e-3, warmup_steps=warmup, total_steps=total)
        except ConfigError:
            logger.info(f"✓ warmup={warmup}, total={total} 被拒绝")
        else:
            raise AssertionError("非法调度应当被拒绝")

    logger.info("\n" + "="*60)
    logger.info("✓ 优化器测试通过")
    logger.info("="*60)


def test_checkpoint():
    """检查点写入与读取"""
    logger.info("="*60)
    logger.info("测试：检查点格式")
    logger.info("="*60)

    from tensor_core import load_checkpoint, save_checkpoint
    from exceptions import CheckpointError

    tensors = {
        'encoder.weight': torch.randn(3, 4),
        'decoder.bias': torch.tensor([1e-30, -0.0, 3.25]),
        'steps': torch.tensor([7, 9], dtype=torch.int64),
        'counter': torch.tensor([2**53 + 1, -(2**40) - 3], dtype=torch.int64),
        'scale': torch.tensor([1.0 / 3.0], dtype=torch.float64),
        'mask': torch.tensor([True, False]),
    }
    metadata = {'config': {'width': 4}, 'step': 12}

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        logger.info("\n[测试1] 逐位还原")
        path = save_checkpoint(tmp / 'a.ckpt', tensors, metadata)
        loaded, meta = load_checkpoint(path)
        assert list(loaded) == list(tensors), "参数顺序应保持"
        for name, tensor in tensors.items():
            assert loaded[name].dtype == tensor.dtype, name
            assert torch.equal(loaded[name], tensor), name
        assert meta == metadata
        # float32 放不下 2**53 + 1，必须按原 dtype 存储
        assert int(loaded['counter'][0]) == 2**53 + 1
        assert float(loaded['scale'][0]) == 1.0 / 3.0
        logger.info(f"✓ {len(loaded)} 个张量还原一致")

        logger.info("\n[测试2] 相同输入得到相同字节")
        again = save_checkpoint(tmp / 'b.ckpt', tensors, metadata)
        assert path.read_bytes() == again.read_bytes()
        logger.info("✓ 文件逐字节相同")

        logger.info("\n[测试3] 坏文件")
        bad = tmp / 'bad.ckpt'
        bad.write_bytes(b'NOTACKPT' + b'\x00' * 16)
        for target in (bad, tmp / 'missing.ckpt'):
            try:
                load_checkpoint(target)
            except CheckpointError as e:
                logger.info(f"✓ {e}")
            else:
                raise AssertionError(f"{target.name} 应当被拒绝")

        logger.info("\n[测试4] 训练指标 CSV")
        from tensor_core import MetricsLog
        log = MetricsLog(['step', 'loss'], tmp / 'metrics.csv')
        log.append(step=1, loss=2.5)
        log.append(step=2, loss=1.25)
        lines = (tmp / 'metrics.csv').read_text(encoding='utf-8').splitlines()
        assert lines == ['step,loss', '1,2.5', '2,1.25']
        assert log.column('loss') == [2.5, 1.25]
        logger.info("✓ CSV 列固定")

    logger.info("\n" + "="*60)
    logger.info("✓ 检查点测试通过")
    logger.info("="*60)


def test_determinism():
    """同一种子、同一输入得到逐位相同的输出"""
    logger.info("="*60)
    logger.info("测试：确定性")
    logger.info("="*60)

    from config import seed_everything
    from tensor_core import to_image_tensor

    def run():
        seed_everything(5)
        layer = torch.nn.Linear(8, 3)
        return layer(torch.randn(2, 8))

    assert torch.equal(run(), run())
    logger.info("✓ 两次运行结果逐位一致")

    import numpy as np
    batch = to_image_tensor([np.zeros((4, 6, 3), dtype=np.float32)] * 2)
    assert batch.shape == (2, 3, 4, 6)
    assert math.isclose(float(batch.sum()), 0.0)
    logger.info("✓ HxWxC 图像转换为 NxCxHxW")


def main() -> int:
    tests = [test_primitives, test_gradients, test_backward, test_optimizer, test_checkpoint, test_determinism]
    failed = 0
    for test in tests:
        try:
            test()
        except Exception as e:
            failed += 1
            logger.error(f"\n✗ {test.__name__} 失败: {e}")
            import traceback
            traceback.print_exc()
    return 0 if failed == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
