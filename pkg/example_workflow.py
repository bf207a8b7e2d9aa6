"""
完整工作流示例
展示如何使用 Python API 生成语料、预训练、训练三个任务模型并推理评估
"""

import logging
from pathlib import Path

# 导入所有模块
from config import CHECKPOINT_DIR, CORPUS_DIR, RUNS_DIR, seed_everything
from synthgen import GenConfig, FaultConfig, make_corpus, load_corpus, load_record_image
from vqvae import VqvaeTrainConfig, VqvaeConfig, train_vqvae, save_vqvae
from ssp import SspConfig, pretrain, export_encoder
from models import TrainConfig, train_task, save_task_model
from pipeline import TaskModels, build_task_samples, load_images, infer, evaluate_corpus, format_metrics_table, lint_corpus

# 配置日志
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def example_workflow():
    """完整工作流示例"""

    logger.info("="*80)
    logger.info("表格识别 - 工作流示例")
    logger.info("="*80)

    seed = 0
    seed_everything(seed)
    corpus = CORPUS_DIR / 'example'
    eval_corpus = CORPUS_DIR / 'example_eval'

    # ========== 步骤1: 生成合成语料 ==========
    logger.info("\n步骤1: 生成合成语料")
    logger.info("-"*80)

    # 64 张用于训练（演示用，实际建议 512 张以上），16 张用于评估
    make_corpus(GenConfig(), seed, 64, corpus, show_progress=False)
    make_corpus(GenConfig(), seed + 1, 16, eval_corpus, show_progress=False)
    records = load_corpus(corpus)
    images = load_images(corpus, records)
    logger.info(f"训练语料 {len(records)} 张，图像 {images[0].shape[0]}px")

    # ========== 步骤2: 训练 VQ-VAE ==========
    logger.info("\n步骤2: 训练 VQ-VAE 视觉分词器")
    logger.info("-"*80)

    vqvae_cfg = VqvaeTrainConfig(model=VqvaeConfig(image_size=images[0].shape[0]), steps=200)
    vqvae, losses = train_vqvae(images, vqvae_cfg, seed=seed)
    save_vqvae(CHECKPOINT_DIR / 'example_vqvae.ckpt', vqvae, step=vqvae_cfg.steps)
    logger.info(f"重建损失 {losses[0]:.4f} -> {losses[-1]:.4f}")

    # ========== 步骤3: 自监督预训练 ==========
    logger.info("\n步骤3: 自监督预训练视觉编码器")
    logger.info("-"*80)

    ssp_model, ssp_metrics = pretrain(images, vqvae, SspConfig(steps=200), seed=seed)
    encoder_path = export_encoder(ssp_model, CHECKPOINT_DIR / 'example_ssp_encoder.ckpt')
    logger.info(f"最终掩码准确率 {ssp_metrics.last()['masked_accuracy']:.4f}")

    # ========== 步骤4: 微调三个任务模型 ==========
    logger.info("\n步骤4: 微调结构、框、内容三个任务模型")
    logger.info("-"*80)

    models = {}
    for task in ('structure', 'bbox', 'content'):
        samples, vocab = build_task_samples(task, corpus)
        model, metrics = train_task(
            task, samples, vocab, TrainConfig(epochs=5),
            init='ssp', ssp_checkpoint=encoder_path, seed=seed,
        )
        save_task_model(CHECKPOINT_DIR / f'example_{task}.ckpt', model, step=len(metrics.rows))
        models[task] = model
        logger.info(f"✓ {task}: 最终损失 {metrics.last()['loss']:.4f}")

    # ========== 步骤5: 单张图像推理 ==========
    logger.info("\n步骤5: 单张图像推理")
    logger.info("-"*80)

    eval_records = load_corpus(eval_corpus, limit=1)
    image = load_record_image(eval_corpus, eval_records[0])
    result = infer(image, models['structure'], models['bbox'], models['content'])
    logger.info(f"单元格 {len(result.bboxes)} 个，内容 {result.contents[:5]}")
    logger.info(f"HTML: {(result.html or '(结构不合法)')[:200]}")
    if result.flags:
        logger.warning(f"标记: {result.flags}")

    # ========== 步骤6: 语料评估 ==========
    logger.info("\n步骤6: 在评估语料上计算指标")
    logger.info("-"*80)

    report = evaluate_corpus(
        eval_corpus, TaskModels(**models),
        report_path=RUNS_DIR / 'example_eval.json', show_progress=False,
    )
    logger.info("\n" + format_metrics_table(report['aggregates']))

    # ========== 步骤7: 标注检查 ==========
    logger.info("\n步骤7: 带故障注入的标注检查")
    logger.info("-"*80)

    lint_dir = CORPUS_DIR / 'example_lint'
    make_corpus(GenConfig(min_rows=2, min_cols=2), seed, 50, lint_dir, faults=FaultConfig(out_of_bounds=10, overlap=5), show_progress=False)
    lint_report = lint_corpus(lint_dir, show_progress=False)
    logger.info(f"有问题的标注比例 {lint_report.fraction:.4f}（注入 15/50 = 0.3000）")

    logger.info("\n" + "="*80)
    logger.info("工作流示例完成！")
    logger.info("="*80)


if __name__ == "__main__":
    example_workflow()
