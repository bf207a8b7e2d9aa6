"""
任务模型测试
编码器变体、因果解码器、教师强制损失、贪心解码、训练与检查点
"""

import sys
import tempfile
from pathlib import Path
from unittest import mock

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging

import numpy as np
import torch

logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)


def _tiny_model(task: str = 'structure', image_size: int = 32, dropout: float = 0.0):
    from codec import build_structure_vocab
    from models import TrainConfig, build_task_model

    torch.manual_seed(0)
    cfg = TrainConfig(decoder_layers=1, dropout=dropout)
    return build_task_model(task, build_structure_vocab(), cfg, image_size=image_size).eval()


def test_encoder():
    """两种图块嵌入变体"""
    logger.info("="*60)
    logger.info("测试：视觉编码器")
    logger.info("="*60)

    from models import EncoderConfig, VisualEncoder, count_parameters
    from exceptions import ConfigError, ShapeMismatchError

    torch.manual_seed(0)
    images = torch.rand(2, 3, 112, 112)

    logger.info("\n[测试1] 输出形状")
    sizes = {}
    for variant in ('linear_projection', 'hybrid_conv_stem'):
        encoder = VisualEncoder(EncoderConfig.preset('tiny', variant=variant, image_size=112)).eval()
        memory = encoder(images)
        assert memory.shape == (2, 49, 128)
        assert bool(torch.isfinite(memory).all())
        sizes[variant] = count_parameters(encoder)
        logger.info(f"✓ {variant}: {tuple(memory.shape)}, {sizes[variant]} 个参数")
    assert sizes['linear_projection'] != sizes['hybrid_conv_stem']

    logger.info("\n[测试2] 非法配置")
    for bad in (
        dict(variant='hybrid_conv_stem', patch_size=8),
        dict(width=130),
        dict(variant='resnet'),
        dict(image_size=100),
    ):
        try:
            VisualEncoder(EncoderConfig.preset('tiny', **bad))
        except ConfigError as e:
            logger.info(f"✓ {e}")
        else:
            raise AssertionError(f"{bad} 应当被拒绝")
    try:
        EncoderConfig.preset('huge')
    except ConfigError:
        logger.info("✓ 未知预设被拒绝")
    else:
        raise AssertionError("未知预设应当被拒绝")

    logger.info("\n[测试3] 输入尺寸与配置不符")
    encoder = VisualEncoder(EncoderConfig.preset('tiny', image_size=112))
    try:
        encoder(torch.rand(1, 3, 224, 224))
    except ShapeMismatchError as e:
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("尺寸不符应当被拒绝")

    logger.info("\n[测试4] 参数规模")
    base = EncoderConfig.preset('base', image_size=112)
    assert (base.layers, base.heads, base.width) == (4, 8, 512)
    assert EncoderConfig.preset('tiny').shape_signature().get('dropout') is None
    logger.info("✓ 预设与形状签名正确")


def test_decoder():
    """因果性、教师强制与填充"""
    logger.info("="*60)
    logger.info("测试：任务解码器")
    logger.info("="*60)

    from models import causal_mask, pad_targets, token_accuracy
    from exceptions import SequenceOverflowError

    logger.info("\n[测试1] 因果掩码")
    assert causal_mask(3).tolist() == [[False, True, True], [False, False, True], [False, False, False]]
    logger.info("✓ 上三角为不可见")

    logger.info("\n[测试2] 位置 i 只依赖前缀")
    model = _tiny_model()
    vocab = model.vocab
    images = torch.rand(1, 3, 32, 32)
    ids = vocab.encode(['<tbody>', '<tr>', '<td>[]</td>', '<td></td>', '</tr>', '</tbody>'])
    targets = torch.tensor([ids[1:]])
    changed = targets.clone()
    changed[0, 3:] = vocab.token_id('<td>[]</td>')
    with torch.no_grad():
        a = model.forward_teacher_forced(images, targets)
        b = model.forward_teacher_forced(images, changed)
    assert a.shape == (1, targets.shape[1], len(vocab))
    assert torch.allclose(a[:, :4], b[:, :4], atol=1e-6)
    assert not torch.allclose(a[:, 4:], b[:, 4:], atol=1e-6)
    logger.info("✓ 修改位置 3 之后的目标不影响前 4 个位置的 logits")

    logger.info("\n[测试3] 目标补齐")
    padded = pad_targets([[1, 10, 11, 2], [1, 12, 2]], vocab.pad_id)
    assert padded.tolist() == [[10, 11, 2], [12, 2, 0]]
    assert model.decoder_inputs(padded).tolist() == [[1, 10, 11], [1, 12, 2]]
    logger.info("✓ 去掉 BOS，右侧补 PAD；解码输入右移一位补 BOS")

    logger.info("\n[测试4] 损失与准确率忽略 PAD")
    logits = torch.full((1, 3, len(vocab)), -10.0)
    logits[0, 0, 10] = logits[0, 1, 2] = 10.0
    logits[0, 2, 5] = 10.0
    assert token_accuracy(logits, torch.tensor([[10, 2, 0]]), vocab.pad_id) == (2, 2)
    loss, _ = model.loss(images, padded[:1])
    assert loss.dim() == 0 and float(loss) > 0
    logger.info(f"✓ loss = {float(loss):.4f}")

    logger.info("\n[测试5] 超长序列")
    try:
        model.forward_teacher_forced(images, torch.full((1, 512), 10, dtype=torch.long))
    except SequenceOverflowError as e:
        assert e.max_length == 512
        logger.info(f"✓ {e}")
    else:
        raise AssertionError("超过 512 的结构序列应当被拒绝")


def test_greedy_decode():
    """贪心解码的停止条件"""
    logger.info("="*60)
    logger.info("测试：贪心解码")
    logger.info("="*60)

    from models import greedy_decode

    model = _tiny_model()
    vocab = model.vocab
    images = torch.rand(2, 3, 32, 32)
    head = model.decoder.head

    logger.info("\n[测试1] 一直不出现 EOS")
    with torch.no_grad():
        head.weight.zero_()
        head.bias.zero_()
        head.bias[vocab.token_id('<tr>')] = 5.0
    results = greedy_decode(model, images, max_len=6)
    for result in results:
        assert result.truncated
        assert not result.seq.is_complete(vocab)
        assert result.seq.ids == [vocab.bos_id] + [vocab.token_id('<tr>')] * 5
    logger.info("✓ 达到 max_len 时标记 truncated")

    logger.info("\n[测试2] 立即输出 EOS")
    with torch.no_grad():
        head.bias.zero_()
        head.bias[vocab.eos_id] = 5.0
    results = greedy_decode(model, images)
    assert [r.seq.ids for r in results] == [[vocab.bos_id, vocab.eos_id]] * 2
    assert not any(r.truncated for r in results)
    assert all(r.seq.is_complete(vocab) for r in results)
    assert results[0].seq.task == 'structure'
    logger.info("✓ [BOS, EOS]")

    logger.info("\n[测试3] 并列取最小 id")
    with torch.no_grad():
        head.bias.zero_()
    results = greedy_decode(model, images, max_len=3)
    assert results[0].seq.ids == [vocab.bos_id, 0, 0]
    logger.info("✓ 全零 logits 选中 id 0")


def test_training():
    """样本校验、记忆小训练集与检查点"""
    logger.info("="*60)
    logger.info("测试：任务训练")
    logger.info("="*60)

    from codec import build_structure_vocab
    from models import (
        TaskModel,
        TaskSample,
        TrainConfig,
        check_samples,
        greedy_decode,
        load_ssp_encoder,
        load_task_model,
        save_task_model,
        train_task,
    )
    from tensor_core import save_checkpoint, to_image_tensor
    from exceptions import CheckpointError, CodecError, ConfigError, SequenceOverflowError, TrainingDivergedError

    vocab = build_structure_vocab()

    logger.info("\n[测试1] 样本校验")
    image = np.zeros((32, 32, 3), dtype=np.float32)
    bad_cases = [
        ([], ConfigError),
        ([TaskSample(image, [vocab.bos_id, 10])], CodecError),
        ([TaskSample(image, [vocab.bos_id, len(vocab) + 3, vocab.eos_id])], CodecError),
        ([TaskSample(image, [vocab.bos_id] + [10] * 600 + [vocab.eos_id])], SequenceOverflowError),
    ]
    for samples, error in bad_cases:
        try:
            check_samples('structure', samples, vocab)
        except error as e:
            logger.info(f"✓ {type(e).__name__}: {e}")
        else:
            raise AssertionError(f"应当抛出 {error.__name__}")

    logger.info("\n[测试2] 训练配置")
    for bad in (TrainConfig(epochs=0), TrainConfig(batch_size=0), TrainConfig(warmup_fraction=1.0),
                TrainConfig(max_steps=0)):
        try:
            bad.validate()
        except ConfigError as e:
            logger.info(f"✓ {e}")
        else:
            raise AssertionError(f"{bad} 应当被拒绝")
    sample = TaskSample(image, vocab.encode(['<tbody>', '<tr>', '<td></td>', '</tr>', '</tbody>']))
    for kwargs in (dict(task='caption'), dict(task='structure', init='imagenet'), dict(task='structure', init='ssp')):
        try:
            train_task(samples=[sample], vocab=vocab, cfg=TrainConfig(epochs=1), show_progress=False, **kwargs)
        except ConfigError as e:
            logger.info(f"✓ {e}")
        else:
            raise AssertionError(f"{kwargs} 应当被拒绝")

    logger.info("\n[测试3] 记忆两个样本")
    rng = np.random.default_rng(0)
    samples = [
        TaskSample(rng.random((32, 32, 3), dtype=np.float32),
                   vocab.encode(['<tbody>', '<tr>', '<td>[]</td>', '</tr>', '</tbody>'])),
        TaskSample(rng.random((32, 32, 3), dtype=np.float32),
                   vocab.encode(['<thead>', '<tr>', '<td></td>', '<td>[]</td>', '</tr>', '</thead>'])),
    ]
    cfg = TrainConfig(epochs=300, batch_size=2, lr=1e-3, dropout=0.0, decoder_layers=1, log_every=50)
    model, metrics = train_task('structure', samples, vocab, cfg, seed=0, show_progress=False)
    assert len(metrics.rows) == 300
    assert metrics.last()['loss'] < metrics.rows[0]['loss']
    images = to_image_tensor([s.image for s in samples])
    decoded = [r.seq.ids for r in greedy_decode(model, images)]
    assert decoded == [s.ids for s in samples], decoded
    logger.info(f"✓ 训练集上贪心解码完全正确, 最终 loss {metrics.last()['loss']:.4f}")

    logger.info("\n[测试4] max_steps 截断")
    _, short = train_task('structure', samples, vocab, TrainConfig(epochs=50, batch_size=1, max_steps=7),
                          seed=0, show_progress=False)
    assert [row['step'] for row in short.rows] == list(range(1, 8))
    assert all(row['applied'] == 1 for row in short.rows)
    logger.info("✓ 恰好 7 步")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        logger.info("\n[测试5] 检查点")
        path = save_task_model(tmp / "structure.ckpt", model, step=300)
        loaded = load_task_model(path)
        assert loaded.vocab == vocab and loaded.task == 'structure'
        assert [r.seq.ids for r in greedy_decode(loaded, images)] == decoded
        logger.info("✓ 读回的模型给出相同解码")

        logger.info("\n[测试6] 检查点类型")
        other = save_checkpoint(tmp / 'other.ckpt', {'w': torch.zeros(1)}, {'kind': 'vqvae'})
        for loader in (load_task_model, lambda p: load_ssp_encoder(model, p)):
            try:
                loader(other)
            except CheckpointError as e:
                logger.info(f"✓ {e}")
            else:
                raise AssertionError("类型不符的检查点应当被拒绝")

    logger.info("\n[测试7] 发散检测")
    nan_image = np.full((32, 32, 3), np.nan, dtype=np.float32)
    try:
        train_task('structure', [TaskSample(nan_image, samples[0].ids)], vocab, TrainConfig(epochs=3, batch_size=1),
                   seed=0, show_progress=False)
    except TrainingDivergedError as e:
        assert e.step == 0
        logger.info(f"✓ NaN 损失: {e}")
    else:
        raise AssertionError("NaN 损失应当中止训练")

    original_loss = TaskModel.loss
    calls = []

    def exploding_loss(self, images, targets):
        loss, logits = original_loss(self, images, targets)
        calls.append(len(calls))
        return (loss if len(calls) == 1 else loss * 100.0), logits

    with mock.patch.object(TaskModel, 'loss', exploding_loss):
        try:
            train_task('structure', samples, vocab, TrainConfig(epochs=5, batch_size=1), seed=0, show_progress=False)
        except TrainingDivergedError as e:
            assert e.step == 1 and e.loss > 10 * e.initial_loss
            logger.info(f"✓ 损失爆炸: {e}")
        else:
            raise AssertionError("损失超过初始 10 倍应当中止训练")

    logger.info("\n" + "="*60)
    logger.info("✓ 任务训练测试通过")
    logger.info("="*60)


def main() -> int:
    tests = [test_encoder, test_decoder, test_greedy_decode, test_training]
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
