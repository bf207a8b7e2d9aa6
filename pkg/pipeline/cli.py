"""
命令行入口
synth / train-vqvae / pretrain / finetune / eval / lint / infer / tokens / vocab
"""

import json
import sys
import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from codec import build_bbox_vocab, build_content_vocab, build_structure_vocab
from config import (
    CHECKPOINT_DIR,
    CONTENT_IMAGE_SIZE,
    CORPUS_DIR,
    DEFAULT_SEED,
    IMAGE_SIZE,
    LINT_OVERLAP_THRESHOLD,
    LOG_FORMAT,
    LOG_LEVEL,
    RUNS_DIR,
    TASKS,
    VOCAB_DIR,
    apply_overrides,
    config_to_dict,
    load_json_config,
    seed_everything,
)
from exceptions import ConfigError, TsrError
from models import TrainConfig, load_task_model, save_task_model, train_task
from ssp import SspConfig, export_encoder, pretrain
from synthgen import ALPHABET, FaultConfig, GenConfig, load_corpus, make_corpus, read_image
from vqvae import VqvaeTrainConfig, dump_token_grid, load_vqvae, save_token_grid, save_vqvae, train_vqvae
from .datasets import build_task_samples, load_images
from .evaluate import METRIC_ALIASES, TaskModels, evaluate_corpus, format_metrics_table
from .infer import infer
from .lint import lint_corpus

logger = logging.getLogger(__name__)


def _metrics_path(checkpoint: Path) -> Path:
    return Path(checkpoint).with_suffix('.metrics.csv')


def _log_banner(title: str) -> None:
    logger.info("=" * 80)
    logger.info(title)
    logger.info("=" * 80)


# ============================================================
# 子命令
# ============================================================

def cmd_synth(args, overrides) -> int:
    gen_config = apply_overrides(GenConfig(), overrides.get('gen'))
    faults = apply_overrides(FaultConfig(
        out_of_bounds=args.fault_out_of_bounds,
        overlap=args.fault_overlap,
        word_wise=args.fault_word_wise,
        outside_table=args.fault_outside_table,
    ), overrides.get('faults'))
    _log_banner(f"生成语料: {args.count} 张, seed={args.seed}")
    manifest = make_corpus(
        gen_config, args.seed, args.count, Path(args.out),
        faults=faults, workers=args.workers, show_progress=not args.quiet,
    )
    logger.info(f"✓ 语料已写入 {args.out}（截断单元格 {manifest.get('truncated_cells', 0)} 个）")
    return 0


def cmd_train_vqvae(args, overrides) -> int:
    records = load_corpus(args.corpus, args.limit)
    images = load_images(args.corpus, records, show_progress=not args.quiet)
    cfg = apply_overrides(VqvaeTrainConfig(), overrides)
    cfg = replace(cfg, model=replace(cfg.model, image_size=images[0].shape[0]))
    _log_banner(f"训练 VQ-VAE: {len(images)} 张图像, K={cfg.model.codebook_size}")
    model, losses = train_vqvae(images, cfg, seed=args.seed, metrics_path=_metrics_path(args.out), show_progress=not args.quiet)
    save_vqvae(Path(args.out), model, step=cfg.steps)
    logger.info(f"✓ VQ-VAE 已保存: {args.out}")
    return 0


def cmd_pretrain(args, overrides) -> int:
    records = load_corpus(args.corpus, args.limit)
    images = load_images(args.corpus, records, show_progress=not args.quiet)
    vqvae = load_vqvae(Path(args.vqvae))
    cfg = apply_overrides(SspConfig(), overrides)
    _log_banner(f"SSP 预训练: {len(images)} 张图像")
    model, metrics = pretrain(images, vqvae, cfg, seed=args.seed, metrics_path=_metrics_path(args.out), show_progress=not args.quiet)
    export_encoder(model, Path(args.out), metadata={'config': config_to_dict(cfg), 'seed': args.seed})
    return 0


def cmd_finetune(args, overrides) -> int:
    if args.init == 'ssp' and not args.ssp_checkpoint:
        raise ConfigError("--init ssp needs --ssp-checkpoint", ["ssp_checkpoint"])
    samples, vocab = build_task_samples(args.task, Path(args.corpus), args.limit, show_progress=not args.quiet)
    cfg = apply_overrides(TrainConfig(), overrides)
    model, metrics = train_task(
        args.task, samples, vocab, cfg,
        init=args.init,
        ssp_checkpoint=Path(args.ssp_checkpoint) if args.ssp_checkpoint else None,
        seed=args.seed,
        metrics_path=_metrics_path(args.out),
        show_progress=not args.quiet,
    )
    save_task_model(Path(args.out), model, step=len(metrics.rows), extra={'init': args.init, 'seed': args.seed})
    logger.info(f"✓ {args.task} 模型已保存: {args.out}")
    return 0


def _load_models(args) -> TaskModels:
    return TaskModels(
        structure=load_task_model(Path(args.structure)),
        bbox=load_task_model(Path(args.bbox)),
        content=load_task_model(Path(args.content)),
    )


def cmd_eval(args, overrides) -> int:
    seed_everything(args.seed)
    report = evaluate_corpus(
        Path(args.corpus), _load_models(args),
        limit=args.limit,
        report_path=Path(args.report) if args.report else None,
        car_from_prediction=bool(overrides.get('car_from_prediction', False)),
        workers=args.workers,
        show_progress=not args.quiet,
    )
    aggregates = report['aggregates']
    if args.metric:
        print(f"{aggregates[METRIC_ALIASES[args.metric]]:.4f}")
    else:
        print(format_metrics_table(aggregates))
    return 0


def cmd_lint(args, overrides) -> int:
    threshold = overrides.get('threshold', args.threshold)
    report = lint_corpus(
        Path(args.corpus), threshold,
        report_path=Path(args.report) if args.report else None,
        workers=args.workers,
        show_progress=not args.quiet,
    )
    print(f"{report.fraction:.4f}")
    return 0


def cmd_infer(args, overrides) -> int:
    seed_everything(args.seed)
    models = _load_models(args)
    image = read_image(Path(args.image))
    result = infer(image, models.structure, models.bbox, models.content, workers=args.workers)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    json_path = out_dir / f"{stem}.json"
    with open(json_path, 'w', encoding='utf-8') as f:
        json.dump(result.to_dict(), f, ensure_ascii=False, indent=2)
    logger.info(f"✓ 推理结果: {json_path}")
    if result.html is not None:
        html_path = out_dir / f"{stem}.html"
        html_path.write_text(result.html, encoding='utf-8')
        logger.info(f"✓ HTML: {html_path}")
    else:
        logger.warning("✗ 结构不合法，未生成 HTML")
    if result.flags:
        logger.warning(f"标记: {', '.join(result.flags)}")
    return 0


def cmd_tokens(args, overrides) -> int:
    model = load_vqvae(Path(args.vqvae))
    grid, text = dump_token_grid(model, read_image(Path(args.image)))
    print(text, end='')
    if args.out:
        save_token_grid(Path(args.out), grid)
        logger.info(f"✓ token 网格已保存: {args.out}")
    return 0


def cmd_vocab(args, overrides) -> int:
    out_dir = Path(args.out_dir)
    written = [
        build_structure_vocab().save(out_dir / "structure.json"),
        build_content_vocab([ALPHABET]).save(out_dir / "content.json"),
    ]
    for size in args.image_size:
        written.append(build_bbox_vocab(size).save(out_dir / f"bbox{size}.json"))
    for path in written:
        logger.info(f"✓ 词表: {path}")
    return 0


# ============================================================
# 参数解析
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=DEFAULT_SEED, help='随机种子')
    common.add_argument('--config', type=str, default=None, help='JSON 配置文件，覆盖默认参数')
    common.add_argument('--quiet', action='store_true', help='不显示进度条')
    common.add_argument('--workers', type=int, default=1, help='并行线程数')

    parser = argparse.ArgumentParser(prog='tsr', description='桌面规模表格识别：语料生成、训练、推理、评估与标注检查')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help='生成合成表格语料')
    p.add_argument('--out', default=str(CORPUS_DIR / 'default'), help='语料输出目录')
    p.add_argument('--count', type=int, default=512, help='样本数')
    p.add_argument('--fault-out-of-bounds', type=int, default=0, help='注入越界框的样本数')
    p.add_argument('--fault-overlap', type=int, default=0, help='注入重叠框的样本数')
    p.add_argument('--fault-word-wise', type=int, default=0, help='改成单词级框的样本数')
    p.add_argument('--fault-outside-table', type=int, default=0, help='在表格外加文字框的样本数')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('train-vqvae', parents=[common], help='训练 VQ-VAE 视觉分词器')
    p.add_argument('--corpus', required=True)
    p.add_argument('--out', default=str(CHECKPOINT_DIR / 'vqvae.ckpt'))
    p.add_argument('--limit', type=int, default=None)
    p.set_defaults(handler=cmd_train_vqvae)

    p = sub.add_parser('pretrain', parents=[common], help='自监督预训练视觉编码器')
    p.add_argument('--corpus', required=True)
    p.add_argument('--vqvae', required=True, help='VQ-VAE 检查点')
    p.add_argument('--out', default=str(CHECKPOINT_DIR / 'ssp_encoder.ckpt'))
    p.add_argument('--limit', type=int, default=None)
    p.set_defaults(handler=cmd_pretrain)

    p = sub.add_parser('finetune', parents=[common], help='训练任务模型')
    p.add_argument('--task', required=True, choices=TASKS)
    p.add_argument('--init', default='scratch', choices=('scratch', 'ssp'))
    p.add_argument('--ssp-checkpoint', default=None)
    p.add_argument('--corpus', required=True)
    p.add_argument('--out', default=None)
    p.add_argument('--limit', type=int, default=None)
    p.set_defaults(handler=cmd_finetune)

    model_args = argparse.ArgumentParser(add_help=False)
    model_args.add_argument('--structure', default=str(CHECKPOINT_DIR / 'structure.ckpt'))
    model_args.add_argument('--bbox', default=str(CHECKPOINT_DIR / 'bbox.ckpt'))
    model_args.add_argument('--content', default=str(CHECKPOINT_DIR / 'content.ckpt'))

    p = sub.add_parser('eval', parents=[common, model_args], help='在语料上评估')
    p.add_argument('--corpus', required=True)
    p.add_argument('--metric', choices=tuple(METRIC_ALIASES), default=None)
    p.add_argument('--report', default=None, help='评估报告 JSON')
    p.add_argument('--limit', type=int, default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('lint', parents=[common], help='检查语料标注')
    p.add_argument('--corpus', required=True)
    p.add_argument('--threshold', type=float, default=LINT_OVERLAP_THRESHOLD)
    p.add_argument('--report', default=None, help='LintReport JSON')
    p.set_defaults(handler=cmd_lint)

    p = sub.add_parser('infer', parents=[common, model_args], help='对单张图像推理')
    p.add_argument('--image', required=True)
    p.add_argument('--out-dir', default=str(RUNS_DIR / 'infer'))
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser('tokens', parents=[common], help='输出图像的视觉 token 网格')
    p.add_argument('--vqvae', required=True)
    p.add_argument('--image', required=True)
    p.add_argument('--out', default=None, help='token 网格文本文件')
    p.set_defaults(handler=cmd_tokens)

    p = sub.add_parser('vocab', parents=[common], help='重新生成 vocab/ 下的词表文件')
    p.add_argument('--out-dir', default=str(VOCAB_DIR))
    p.add_argument('--image-size', type=int, nargs='+', default=sorted({IMAGE_SIZE, CONTENT_IMAGE_SIZE, 448}))
    p.set_defaults(handler=cmd_vocab)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Returns:
        0 成功；1 运行错误；参数错误由 argparse 以 2 退出
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)

    if getattr(args, 'command', None) == 'finetune' and args.out is None:
        args.out = str(CHECKPOINT_DIR / f"{args.task}.ckpt")

    try:
        overrides = load_json_config(args.config)
        return args.handler(args, overrides)
    except TsrError as e:
        logger.error(f"✗ {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
