"""
桌面规模实验
VQ-VAE 重建、SSP 掩码准确率、SSP 与从零训练对比、两种图块嵌入对比、
预训练语料规模、端到端记忆和标注检查注入对照，每个实验写一个 JSON 摘要
"""

import argparse
import json
import logging
import math
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Sequence

# 添加项目根目录到路径
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from annotations import Annotation, BBox
from codec import merge_html
from config import LOG_FORMAT, LOG_LEVEL, RUNS_DIR, config_to_dict, seed_everything
from exceptions import CodecError
from metrics import teds
from models import TaskModel, TaskSample, TrainConfig, greedy_decode, train_task
from pipeline import TaskModels, build_task_samples, evaluate_corpus, lint_corpus, lint_annotation, split_samples
from pipeline.datasets import load_images
from ssp import SspConfig, evaluate_masked_accuracy, export_encoder, pretrain, tokenize_all
from synthgen import FaultConfig, GenConfig, load_corpus, make_corpus
from synthgen.corpus import ANNOTATIONS_FILE
from tensor_core import to_image_tensor
from vqvae import VqvaeConfig, VqvaeModel, VqvaeTrainConfig, reconstruction_mse, train_vqvae

# 配置日志
logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
logger = logging.getLogger(__name__)

EXPERIMENTS = ('vqvae', 'ssp', 'ssp-vs-scratch', 'hybrid', 'corpus-size', 'memorize', 'lint')


# ============================================================
# 公共工具
# ============================================================

def _banner(title: str) -> None:
    logger.info("\n" + "=" * 80)
    logger.info(title)
    logger.info("=" * 80)


def _write_summary(out_dir: Path, name: str, summary: Dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(summary, f, ensure_ascii=False, indent=2)
    logger.info(f"✓ 摘要: {path}")
    return path


def _corpus(work_dir: Path, name: str, count: int, seed: int, **gen_overrides) -> Path:
    out = work_dir / name
    if not (out / ANNOTATIONS_FILE).exists():
        make_corpus(replace(GenConfig(), **gen_overrides), seed, count, out, show_progress=False)
    return out


def _corpus_images(corpus: Path) -> List[np.ndarray]:
    return load_images(corpus, load_corpus(corpus))


def structure_steds(model: TaskModel, samples: Sequence[TaskSample], batch_size: int = 16) -> float:
    """验证集上的平均 S-TEDS（只比较结构，内容全部置空）"""
    vocab = model.vocab
    scores = []
    for start in range(0, len(samples), batch_size):
        batch = samples[start:start + batch_size]
        results = greedy_decode(model, to_image_tensor([s.image for s in batch]))
        for sample, result in zip(batch, results):
            gt_html = merge_html(vocab.decode(sample.ids), [], strict=False)
            try:
                pred_html = merge_html(vocab.decode(result.seq.ids), [], strict=False)
            except CodecError:
                scores.append(0.0)
                continue
            scores.append(teds(pred_html, gt_html, structure_only=True))
    return float(np.mean(scores)) if scores else 0.0


def _small_vqvae_train(image_size: int, codebook_size: int, steps: int) -> VqvaeTrainConfig:
    return VqvaeTrainConfig(
        model=VqvaeConfig(codebook_size=codebook_size, image_size=image_size),
        steps=steps,
        log_every=max(steps // 10, 1),
    )


# ============================================================
# 实验
# ============================================================

def run_vqvae(args, work_dir: Path) -> Dict:
    """重建误差下降、常数图像、K=16 与 K=256 对比"""
    _banner("实验: VQ-VAE 重建")
    images = _corpus_images(_corpus(work_dir, 'corpus', args.count, args.seed))
    size = images[0].shape[0]

    runs = {}
    for k in (16, 256):
        cfg = _small_vqvae_train(size, k, args.vqvae_steps)
        seed_everything(args.seed)
        untrained = VqvaeModel(cfg.model)
        initial = reconstruction_mse(untrained, images)
        model, losses = train_vqvae(images, cfg, seed=args.seed, show_progress=not args.quiet)
        final = reconstruction_mse(model, images)
        runs[str(k)] = {'initial_mse': initial, 'final_mse': final, 'ratio': final / initial}
        logger.info(f"K={k}: MSE {initial:.5f} -> {final:.5f} ({final / initial:.1%})")

    constant = [np.full((size, size, 3), 0.8, dtype=np.float32) for _ in range(8)]
    cfg = _small_vqvae_train(size, 16, args.vqvae_steps)
    model, _ = train_vqvae(constant, cfg, seed=args.seed, show_progress=not args.quiet)
    constant_mse = reconstruction_mse(model, constant)
    logger.info(f"常数图像 MSE {constant_mse:.2e}")

    summary = {
        'runs': runs,
        'constant_mse': constant_mse,
        'reduction_ok': runs['256']['ratio'] < 0.2,
        'constant_ok': constant_mse < 1e-4,
        'larger_codebook_better': runs['256']['final_mse'] < runs['16']['final_mse'],
    }
    return summary


def _trained_vqvae(args, images: List[np.ndarray], k: int = 256) -> VqvaeModel:
    cfg = _small_vqvae_train(images[0].shape[0], k, args.vqvae_steps)
    model, _ = train_vqvae(images, cfg, seed=args.seed, show_progress=not args.quiet)
    return model


def run_ssp(args, work_dir: Path) -> Dict:
    """初始损失接近 ln K，预训练后掩码准确率不低于 5 倍随机水平"""
    _banner("实验: SSP 掩码 token 预测")
    images = _corpus_images(_corpus(work_dir, 'corpus', args.count, args.seed))
    vqvae = _trained_vqvae(args, images)
    k = vqvae.codebook_size

    cfg = SspConfig(steps=args.ssp_steps)
    model, metrics = pretrain(images, vqvae, cfg, seed=args.seed, show_progress=not args.quiet)
    initial_loss = metrics.column('loss')[0]

    data = to_image_tensor(images)
    accuracy = evaluate_masked_accuracy(model, data, tokenize_all(vqvae, data), cfg.mask_ratio, seed=args.seed + 1)
    chance = 1.0 / k
    logger.info(f"初始损失 {initial_loss:.4f} (ln K = {math.log(k):.4f}), 掩码准确率 {accuracy:.4f} = {accuracy / chance:.1f}x 随机")

    path = export_encoder(model, work_dir / 'ssp_encoder.ckpt', metadata={'config': config_to_dict(cfg), 'seed': args.seed})
    return {
        'codebook_size': k,
        'initial_loss': initial_loss,
        'ln_k': math.log(k),
        'initial_loss_within_2pct': abs(initial_loss - math.log(k)) <= 0.02 * math.log(k),
        'masked_accuracy': accuracy,
        'chance_multiple': accuracy / chance,
        'five_times_chance': accuracy >= 5 * chance,
        'encoder_checkpoint': str(path),
    }


def _ssp_encoder(args, work_dir: Path, images: List[np.ndarray], name: str) -> Path:
    path = work_dir / f"{name}.ckpt"
    if not path.exists():
        vqvae = _trained_vqvae(args, images)
        model, _ = pretrain(images, vqvae, SspConfig(steps=args.ssp_steps), seed=args.seed, show_progress=not args.quiet)
        export_encoder(model, path)
    return path


def _finetune_steds(args, samples, vocab, cfg: TrainConfig, seed: int, init: str = 'scratch', ssp_checkpoint: Path = None) -> float:
    split = split_samples(samples, 0.2, seed)
    model, _ = train_task(
        'structure', split['train'], vocab, cfg,
        init=init, ssp_checkpoint=ssp_checkpoint, seed=seed, show_progress=not args.quiet,
    )
    return structure_steds(model, split['val'])


def run_ssp_vs_scratch(args, work_dir: Path) -> Dict:
    """同样的微调预算下，SSP 初始化与从零训练的验证集 S-TEDS"""
    _banner("实验: SSP 初始化 vs 从零训练")
    corpus = _corpus(work_dir, 'corpus', args.count, args.seed)
    encoder = _ssp_encoder(args, work_dir, _corpus_images(corpus), 'ssp_encoder_full')
    samples, vocab = build_task_samples('structure', corpus)
    cfg = TrainConfig(epochs=args.epochs)

    rows = []
    for seed in range(args.seed, args.seed + 3):
        scratch = _finetune_steds(args, samples, vocab, cfg, seed)
        ssp = _finetune_steds(args, samples, vocab, cfg, seed, init='ssp', ssp_checkpoint=encoder)
        rows.append({'seed': seed, 'scratch': scratch, 'ssp': ssp})
        logger.info(f"seed={seed}: scratch S-TEDS {scratch:.4f}, ssp S-TEDS {ssp:.4f}")

    wins = sum(1 for r in rows if r['ssp'] >= r['scratch'])
    return {'rows': rows, 'ssp_wins': wins, 'majority': wins >= 2}


def run_hybrid(args, work_dir: Path) -> Dict:
    """卷积 stem 与线性投影在同一损失下训练，S-TEDS 差距不超过 5 个百分点"""
    _banner("实验: 卷积 stem vs 线性投影")
    corpus = _corpus(work_dir, 'corpus', args.count, args.seed)
    samples, vocab = build_task_samples('structure', corpus)
    scores = {}
    for variant in ('linear_projection', 'hybrid_conv_stem'):
        scores[variant] = _finetune_steds(args, samples, vocab, TrainConfig(variant=variant, epochs=args.epochs), args.seed)
        logger.info(f"{variant}: S-TEDS {scores[variant]:.4f}")
    gap = scores['linear_projection'] - scores['hybrid_conv_stem']
    return {'steds': scores, 'gap': gap, 'within_5pp': gap <= 0.05}


def run_corpus_size(args, work_dir: Path) -> Dict:
    """预训练语料规模对掩码准确率和下游 S-TEDS 的影响"""
    _banner("实验: 预训练语料规模")
    finetune_corpus = _corpus(work_dir, 'corpus', args.count, args.seed)
    samples, vocab = build_task_samples('structure', finetune_corpus)
    rows = []
    for size in (args.count // 4, args.count):
        pretrain_corpus = _corpus(work_dir, f'pretrain_{size}', size, args.seed + 1000)
        images = _corpus_images(pretrain_corpus)
        encoder = _ssp_encoder(args, work_dir, images, f'ssp_encoder_{size}')
        score = _finetune_steds(args, samples, vocab, TrainConfig(epochs=args.epochs), args.seed, init='ssp', ssp_checkpoint=encoder)
        rows.append({'pretrain_images': size, 'steds': score})
        logger.info(f"预训练 {size} 张: S-TEDS {score:.4f}")
    return {'rows': rows}


def run_memorize(args, work_dir: Path) -> Dict:
    """三个任务模型记住 16 个样本后，端到端 TEDS 应为 1"""
    _banner("实验: 端到端记忆")
    corpus = _corpus(work_dir, 'memorize', 16, args.seed)
    cfg = TrainConfig(epochs=args.memorize_epochs, batch_size=4, lr=1e-3, dropout=0.0, log_every=100)
    models = {}
    for task in ('structure', 'bbox', 'content'):
        samples, vocab = build_task_samples(task, corpus)
        models[task], _ = train_task(task, samples, vocab, cfg, seed=args.seed, show_progress=not args.quiet)
    report = evaluate_corpus(corpus, TaskModels(**models), show_progress=not args.quiet)
    per_sample = [s['TEDS'] for s in report['samples']]
    logger.info(f"TEDS: 平均 {np.mean(per_sample):.4f}, 满分 {sum(1 for t in per_sample if t == 1.0)}/16")
    return {
        'teds': per_sample,
        'aggregates': report['aggregates'],
        'all_perfect': all(t == 1.0 for t in per_sample),
    }


def run_lint(args, work_dir: Path) -> Dict:
    """1000 个样本中注入 531 个越界标注，检查比例应恰好为 0.5310"""
    _banner("实验: 标注检查注入对照")
    corpus = work_dir / 'lint'
    make_corpus(
        GenConfig(min_rows=2, min_cols=2), args.seed, 1000, corpus,
        faults=FaultConfig(out_of_bounds=531), show_progress=False,
    )
    report = lint_corpus(corpus, show_progress=not args.quiet)
    flagged = {line for line, items in report.findings.items() if items}
    injected = {i for i, r in enumerate(load_corpus(corpus)) if r.faults}

    example = lint_annotation(
        Annotation(['<tr>', '<td>[]</td>', '</tr>'], [BBox(-4.6, 278.6, 19.5, 292.4)], ['X']), 448, 448,
    )
    logger.info(f"检查比例 {report.fraction:.4f}; 示例框: {[f.kind for f in example]}")
    return {
        'fraction': report.fraction,
        'exact': report.fraction == 0.531,
        'false_positives': len(flagged - injected),
        'false_negatives': len(injected - flagged),
        'example_box_kinds': [f.kind for f in example],
    }


RUNNERS = {
    'vqvae': run_vqvae,
    'ssp': run_ssp,
    'ssp-vs-scratch': run_ssp_vs_scratch,
    'hybrid': run_hybrid,
    'corpus-size': run_corpus_size,
    'memorize': run_memorize,
    'lint': run_lint,
}


def main():
    parser = argparse.ArgumentParser(description='桌面规模实验')
    parser.add_argument('experiments', nargs='*', help=f"要运行的实验，默认全部: {', '.join(EXPERIMENTS)}")
    parser.add_argument('--out-dir', default=str(RUNS_DIR / 'experiments'), help='摘要输出目录')
    parser.add_argument('--work-dir', default=None, help='语料与检查点目录，默认用临时目录')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--count', type=int, default=512, help='语料样本数')
    parser.add_argument('--vqvae-steps', type=int, default=1000)
    parser.add_argument('--ssp-steps', type=int, default=2000)
    parser.add_argument('--epochs', type=int, default=30, help='结构任务微调轮数')
    parser.add_argument('--memorize-epochs', type=int, default=400)
    parser.add_argument('--quiet', action='store_true', help='不显示进度条')
    args = parser.parse_args()
    unknown = [name for name in args.experiments if name not in RUNNERS]
    if unknown:
        parser.error(f"unknown experiments: {', '.join(unknown)}")
    args.experiments = args.experiments or list(EXPERIMENTS)

    out_dir = Path(args.out_dir)

    with tempfile.TemporaryDirectory() as tmp:
        work_dir = Path(args.work_dir) if args.work_dir else Path(tmp)
        work_dir.mkdir(parents=True, exist_ok=True)
        failed = []
        for name in args.experiments:
            try:
                summary = RUNNERS[name](args, work_dir)
                _write_summary(out_dir, name, summary)
            except Exception as e:
                logger.error(f"✗ 实验 {name} 失败: {e}", exc_info=True)
                failed.append(name)

    _banner("实验完成")
    logger.info(f"成功: {len(args.experiments) - len(failed)}/{len(args.experiments)}")
    if failed:
        logger.error(f"✗ 失败: {', '.join(failed)}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
