"""
VQ-VAE 测试
网格形状、Gumbel-Softmax、量化、解码、训练与检查点
"""

import sys
import tempfile
from pathlib import Path

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging

import numpy as np
import torch

logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)


def _small_config(**overrides):
    from vqvae import VqvaeConfig

    values = dict(codebook_size=8, code_dim=16, hidden_channels=(8, 16, 16), image_size=32)
    values.update(overrides)
    return VqvaeConfig(**values)


def test_shapes():
    """编码器网格与解码器形状"""
    logger.info("="*60)
    logger.info("测试：VQ-VAE 形状")
    logger.info("="*60)

    from vqvae import VqvaeConfig, VqvaeModel
    from exceptions import ConfigError, ShapeMismatchError

    torch.manual_seed(0)
    model = VqvaeModel(VqvaeConfig(codebook_size=32, code_dim=16))

    logger.info("\n[测试1] 网格大小")
    assert model.grid_shape(448, 448) == (28, 28)
    assert model.grid_shape(112, 112) == (7, 7)
    try:
        model.grid_shape(100, 112)
    except ShapeMismatchError as e:
        logger.info(f"✓ 不能被 16 整除: {e}")
    else:
        raise AssertionError("不能被 16 整除的尺寸应当被拒绝")
    logger.info("✓ 448 -> 28x28，112 -> 7x7")

    logger.info("\n[测试2] logits")
    images = torch.rand(2, 3, 112, 112)
    logits = model.encode_logits(images)
    assert logits.shape == (2, 7, 7, 32)
    assert bool(torch.isfinite(logits).all())
    logger.info(f"✓ logits 形状 {tuple(logits.shape)}")

    logger.info("\n[测试3] 解码形状")
    weights = torch.softmax(logits, dim=-1)
    assert model.decode(weights).shape == images.shape
    indices = logits.argmax(-1)
    one_hot = torch.nn.functional.one_hot(indices, 32).float()
    assert torch.allclose(model.decode(one_hot), model.decode_indices(indices), atol=1e-6)
    try:
        model.decode(torch.zeros(1, 7, 7, 31))
    except ShapeMismatchError as e:
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("码本维度不匹配应当被拒绝")
    logger.info("✓ one-hot 软解码与硬解码一致")

    logger.info("\n[测试4] 非法配置")
    for bad in (dict(codebook_size=1), dict(patch_size=8), dict(hidden_channels=(8, 16))):
        try:
            VqvaeModel(_small_config(**bad))
        except ConfigError as e:
            logger.info(f"✓ {e}")
        else:
            raise AssertionError(f"{bad} 应当被拒绝")


def test_gumbel_softmax():
    """Gumbel-Softmax 松弛与量化"""
    logger.info("="*60)
    logger.info("测试：Gumbel-Softmax")
    logger.info("="*60)

    from tensor_core import finite_difference_check
    from vqvae import gumbel_noise, gumbel_softmax, quantize
    from exceptions import ConfigError

    logger.info("\n[测试1] 均匀 logits、零噪声")
    weights = gumbel_softmax(torch.zeros(5), 1.0, noise=torch.zeros(5))
    assert torch.allclose(weights, torch.full((5,), 0.2))
    logger.info("✓ 权重均为 1/K")

    logger.info("\n[测试2] 低温")
    logits = torch.tensor([10.0, 0.0, 0.0])
    weights = gumbel_softmax(logits, 0.01, noise=torch.zeros(3))
    assert float(weights.max()) > 0.999
    logger.info(f"✓ 最大权重 {float(weights.max()):.6f}")

    logger.info("\n[测试3] 温度必须为正")
    for tau in (0.0, -1.0):
        try:
            gumbel_softmax(logits, tau)
        except ConfigError:
            logger.info(f"✓ tau={tau} 被拒绝")
        else:
            raise AssertionError("非正温度应当被拒绝")

    logger.info("\n[测试4] 权重性质")
    gen = torch.Generator().manual_seed(0)
    weights = gumbel_softmax(torch.randn(4, 6, generator=gen), 0.5, generator=gen)
    assert bool(torch.isfinite(weights).all())
    assert bool((weights >= 0).all())
    assert float((weights.sum(-1) - 1).abs().max()) < 1e-5
    logger.info("✓ 非负且和为 1")

    logger.info("\n[测试5] 梯度校验")
    w = torch.rand(3, 5, generator=gen, dtype=torch.float64)
    noise = torch.zeros(3, 5, dtype=torch.float64)
    error = finite_difference_check(
        lambda z: (gumbel_softmax(z, 0.7, noise=noise) * w).sum(),
        [torch.randn(3, 5, generator=gen, dtype=torch.float64)],
        h=1e-3,
        floor=1e-3,
    )
    assert error < 1e-3
    logger.info(f"✓ 最大相对误差 {error:.2e}")

    logger.info("\n[测试6] 直通估计")
    z = torch.randn(2, 4, generator=gen, requires_grad=True)
    hard = gumbel_softmax(z, 1.0, noise=torch.zeros(2, 4), hard=True)
    assert torch.equal(hard.detach().sum(-1), torch.ones(2))
    assert set(hard.detach().unique().tolist()) <= {0.0, 1.0}
    (hard * torch.arange(4.0)).sum().backward()
    assert float(z.grad.abs().sum()) > 0
    logger.info("✓ 前向 one-hot，反向有梯度")

    logger.info("\n[测试7] 量化")
    assert int(quantize(torch.tensor([0.0, 0.0, 1.0, 0.0]))) == 2
    tie = torch.zeros(10)
    tie[3] = tie[7] = 5.0
    assert int(quantize(tie)) == 3
    logits = torch.randn(8, 8, 16, generator=gen)
    limit = quantize(gumbel_softmax(logits, 1e-3, noise=torch.zeros_like(logits)))
    assert torch.equal(limit, quantize(logits))
    logger.info("✓ one-hot -> 下标，并列取最小下标，tau->0 时与 argmax 一致")

    logger.info("\n[测试8] 采样噪声")
    noise = gumbel_noise((200000,), torch.Generator().manual_seed(1))
    assert bool(torch.isfinite(noise).all())
    # 标准 Gumbel 分布均值为欧拉常数 0.5772
    assert abs(float(noise.mean()) - 0.5772) < 0.02
    again = gumbel_noise((200000,), torch.Generator().manual_seed(1))
    assert torch.equal(noise, again)
    noise64 = gumbel_noise((4, 6), torch.Generator().manual_seed(0), dtype=torch.float64)
    assert bool(torch.isfinite(noise64).all())
    logger.info(f"✓ 噪声有限，均值 {float(noise.mean()):.4f}，同一种子结果一致")

    logger.info("\n" + "="*60)
    logger.info("✓ Gumbel-Softmax 测试通过")
    logger.info("="*60)


def test_training():
    """常数图像上的训练、发散检测与检查点"""
    logger.info("="*60)
    logger.info("测试：VQ-VAE 训练")
    logger.info("="*60)

    from vqvae import (
        VqvaeModel,
        VqvaeTrainConfig,
        dump_token_grid,
        load_vqvae,
        reconstruction_mse,
        save_token_grid,
        save_vqvae,
        temperature_at,
        tokenize,
        train_vqvae,
    )
    from tensor_core import to_image_tensor
    from exceptions import CheckpointError, TrainingDivergedError

    logger.info("\n[测试1] 温度退火")
    cfg = VqvaeTrainConfig(steps=100)
    assert temperature_at(cfg, 0) == 1.0
    assert abs(temperature_at(cfg, 25) - 0.25) < 1e-9
    assert abs(temperature_at(cfg, 50) - 0.0625) < 1e-9
    assert abs(temperature_at(cfg, 99) - 0.0625) < 1e-9
    logger.info("✓ 1.0 -> 0.0625，后半程固定")

    logger.info("\n[测试2] 常数图像")
    color = np.array([0.2, 0.6, 0.9], dtype=np.float32)
    images = [np.broadcast_to(color, (32, 32, 3)).copy() for _ in range(8)]
    cfg = VqvaeTrainConfig(model=_small_config(), steps=600, batch_size=4, lr=1e-2, warmup_steps=10, log_every=0)
    before = reconstruction_mse(VqvaeModel(_small_config()), images)
    model, losses = train_vqvae(images, cfg, seed=0, show_progress=False)
    after = reconstruction_mse(model, images)
    assert len(losses) == 600
    assert np.mean(losses[-50:]) < np.mean(losses[:50])
    assert after < 1e-4, f"MSE {after:.2e}"
    logger.info(f"✓ 重建 MSE {before:.4e} -> {after:.4e}")

    logger.info("\n[测试3] 同一种子结果一致")
    short = VqvaeTrainConfig(model=_small_config(), steps=5, batch_size=2, warmup_steps=1, log_every=0)
    _, first = train_vqvae(images, short, seed=3, show_progress=False)
    _, second = train_vqvae(images, short, seed=3, show_progress=False)
    assert first == second
    logger.info("✓ 损失序列逐位一致")

    logger.info("\n[测试4] 发散检测")
    gray = [np.full((32, 32, 3), 0.5, dtype=np.float32) for _ in range(4)]
    wild = VqvaeTrainConfig(model=_small_config(), steps=10, batch_size=4, lr=10.0, warmup_steps=0, log_every=0)
    try:
        train_vqvae(gray, wild, seed=0, show_progress=False)
    except TrainingDivergedError as e:
        assert e.loss > 10 * e.initial_loss
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("学习率过大时应当检测到发散")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        logger.info("\n[测试5] 检查点")
        path = save_vqvae(tmp / 'vqvae.ckpt', model, step=600)
        loaded = load_vqvae(path)
        batch = to_image_tensor(images[:2])
        assert torch.equal(tokenize(loaded, batch), tokenize(model, batch))
        from tensor_core import save_checkpoint
        other = save_checkpoint(tmp / 'other.ckpt', {'w': torch.zeros(1)}, {'kind': 'task'})
        try:
            load_vqvae(other)
        except CheckpointError as e:
            logger.info(f"✓ {e}")
        else:
            raise AssertionError("类型不符的检查点应当被拒绝")
        logger.info("✓ 读回的模型给出相同的视觉 token")

        logger.info("\n[测试6] token 网格")
        grid, text = dump_token_grid(loaded, images[0])
        assert grid.shape == (2, 2)
        assert 0 <= grid.min() and grid.max() < 8
        assert len(text.strip().splitlines()) == 3
        save_token_grid(tmp / 'grid.txt', grid)
        rows = (tmp / 'grid.txt').read_text(encoding='utf-8').splitlines()
        assert [[int(v) for v in row.split()] for row in rows] == grid.tolist()
        logger.info(f"\n{text}")

    logger.info("\n" + "="*60)
    logger.info("✓ VQ-VAE 训练测试通过")
    logger.info("="*60)


def main() -> int:
    tests = [test_shapes, test_gumbel_softmax, test_training]
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
