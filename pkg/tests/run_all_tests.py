"""
运行所有测试
每个测试文件在独立的子进程中运行，互不影响随机状态和线程设置
"""

import sys
import argparse
import subprocess
import time
from pathlib import Path
from typing import Dict, List, Optional

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging

logging.basicConfig(level=logging.INFO, format='%(message)s')
logger = logging.getLogger(__name__)

TESTS_DIR = Path(__file__).parent

# slow=True 的文件里有短程训练，CPU 上每个需要数分钟
TEST_FILES: List[Dict] = [
    {'name': 'test_config', 'description': '配置模块', 'slow': False},
    {'name': 'test_tensor_core', 'description': '张量工具', 'slow': False},
    {'name': 'test_codec', 'description': '序列编解码', 'slow': False},
    {'name': 'test_synthgen', 'description': '合成表格生成', 'slow': False},
    {'name': 'test_metrics', 'description': '评测指标', 'slow': False},
    {'name': 'test_vqvae', 'description': 'VQ-VAE', 'slow': True},
    {'name': 'test_ssp', 'description': '自监督预训练', 'slow': True},
    {'name': 'test_models', 'description': '编码器-解码器模型', 'slow': True},
    {'name': 'test_pipeline', 'description': '推理与评测流水线', 'slow': True},
]


def run_test_file(name: str, description: str, timeout: Optional[float] = None) -> Dict:
    """
    在子进程中运行一个测试文件

    Returns:
        {'description', 'success', 'elapsed'}；超时记为失败
    """
    logger.info("\n" + "="*80)
    logger.info(f"运行测试: {description} ({name}.py)")
    logger.info("="*80)

    started = time.time()
    try:
        completed = subprocess.run([sys.executable, str(TESTS_DIR / f"{name}.py")], cwd=project_root, timeout=timeout)
        success = completed.returncode == 0
    except subprocess.TimeoutExpired:
        logger.error(f"\n✗ {description} 超时 ({timeout:.0f}秒)")
        success = False
    elapsed = time.time() - started

    if success:
        logger.info(f"\n✓ {description} 通过 (耗时: {elapsed:.1f}秒)")
    else:
        logger.error(f"\n✗ {description} 失败 (耗时: {elapsed:.1f}秒)")
    return {'description': description, 'success': success, 'elapsed': elapsed}


def select_tests(only: Optional[List[str]], skip_slow: bool) -> List[Dict]:
    selected = []
    for test in TEST_FILES:
        if only and test['name'] not in only:
            continue
        if skip_slow and test['slow']:
            logger.info(f"⊘ 跳过: {test['description']} (慢速)")
            continue
        selected.append(test)
    return selected


def main() -> int:
    parser = argparse.ArgumentParser(description='运行所有测试')
    parser.add_argument('--skip-slow', action='store_true', help='跳过需要训练模型的慢速测试')
    parser.add_argument('--only', nargs='+', default=None, help='只运行指定的测试文件，如 test_codec test_metrics')
    parser.add_argument('--timeout', type=float, default=None, help='单个测试文件的超时秒数')
    args = parser.parse_args()

    known = {t['name'] for t in TEST_FILES}
    unknown = [name for name in (args.only or []) if name not in known]
    if unknown:
        parser.error(f"未知的测试文件: {', '.join(unknown)}")

    logger.info("="*80)
    logger.info("表格识别 - 测试套件")
    logger.info("="*80)

    results = [run_test_file(t['name'], t['description'], args.timeout) for t in select_tests(args.only, args.skip_slow)]

    logger.info("\n\n" + "="*80)
    logger.info("测试总结")
    logger.info("="*80)
    for result in results:
        mark = "✓" if result['success'] else "✗"
        logger.info(f"{mark} {result['description']:<16} {result['elapsed']:>7.1f}秒")

    failed = [r for r in results if not r['success']]
    logger.info("="*80)
    logger.info(f"总计: {len(results) - len(failed)}/{len(results)} 通过, 耗时 {sum(r['elapsed'] for r in results):.1f}秒")
    if failed:
        logger.error(f"✗ {len(failed)} 个测试失败")
        return 1
    logger.info("✓ 所有测试通过！")
    return 0


if __name__ == "__main__":
    sys.exit(main())
