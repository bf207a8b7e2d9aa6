"""
配置模块测试
验证路径、预设、JSON 配置读取和 dataclass 覆盖
"""

import sys
import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import logging

import torch

logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)


@dataclass
class _Inner:
    depth: int = 2


@dataclass
class _Outer:
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    inner: _Inner = field(default_factory=_Inner)


def test_config():
    """测试配置常量"""
    logger.info("="*60)
    logger.info("测试：配置模块")
    logger.info("="*60)

    from config import (
        PROJECT_ROOT, DATA_DIR, VOCAB_DIR, TASKS, TASK_MAX_LENGTH,
        ENCODER_PRESETS, IMAGE_SIZE, PATCH_SIZE, CONTENT_IMAGE_SIZE,
    )

    logger.info("\n[测试1] 路径配置")
    assert PROJECT_ROOT.exists(), "项目根目录不存在"
    assert DATA_DIR.exists(), "数据目录未创建"
    logger.info(f"✓ 项目根目录: {PROJECT_ROOT}")
    logger.info(f"✓ 词表目录: {VOCAB_DIR}")

    logger.info("\n[测试2] 任务序列上限")
    assert TASKS == ('structure', 'bbox', 'content')
    assert TASK_MAX_LENGTH == {'structure': 512, 'bbox': 1024, 'content': 200}
    logger.info(f"✓ 任务: {', '.join(TASKS)}")

    logger.info("\n[测试3] 编码器预设")
    for name, preset in ENCODER_PRESETS.items():
        assert preset['width'] % preset['heads'] == 0, f"{name} 宽度不能被头数整除"
    assert IMAGE_SIZE % PATCH_SIZE == 0
    assert CONTENT_IMAGE_SIZE % PATCH_SIZE == 0
    logger.info(f"✓ 预设: {', '.join(ENCODER_PRESETS)}")

    logger.info("\n" + "="*60)
    logger.info("✓ 配置模块测试通过")
    logger.info("="*60)


def test_json_config():
    """测试 JSON 配置读取和字段覆盖"""
    logger.info("="*60)
    logger.info("测试：JSON 配置与覆盖")
    logger.info("="*60)

    from config import apply_overrides, config_to_dict, load_json_config
    from exceptions import ConfigError

    logger.info("\n[测试1] 空路径")
    assert load_json_config(None) == {}
    logger.info("✓ 未指定配置文件时返回空配置")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)

        logger.info("\n[测试2] 文件不存在 / JSON 非法 / 根不是对象")
        for path, content in (
            (tmp / 'missing.json', None),
            (tmp / 'bad.json', '{"lr": '),
            (tmp / 'list.json', '[1, 2]'),
        ):
            if content is not None:
                path.write_text(content, encoding='utf-8')
            try:
                load_json_config(str(path))
            except ConfigError as e:
                logger.info(f"✓ {path.name}: {e}")
            else:
                raise AssertionError(f"{path.name} 应当被拒绝")

        logger.info("\n[测试3] 正常读取")
        good = tmp / 'good.json'
        good.write_text(json.dumps({'lr': 0.01}), encoding='utf-8')
        assert load_json_config(str(good)) == {'lr': 0.01}
        logger.info("✓ 读取成功")

    logger.info("\n[测试4] 覆盖字段")
    cfg = apply_overrides(_Outer(), {'lr': 0.5, 'betas': [0.8, 0.9], 'inner': {'depth': 7}})
    assert cfg.lr == 0.5
    assert cfg.betas == (0.8, 0.9), "列表应转换为元组"
    assert cfg.inner.depth == 7, "嵌套 dataclass 应递归覆盖"
    assert config_to_dict(cfg) == {'lr': 0.5, 'betas': [0.8, 0.9], 'inner': {'depth': 7}}
    logger.info(f"✓ 覆盖结果: {config_to_dict(cfg)}")

    logger.info("\n[测试5] 未知字段")
    try:
        apply_overrides(_Outer(), {'lr': 1.0, 'lrr': 2.0, 'bogus': 3})
    except ConfigError as e:
        assert e.keys == ['bogus', 'lrr']
        logger.info(f"✓ 未知字段被拒绝: {e.keys}")
    else:
        raise AssertionError("未知字段应当被拒绝")

    logger.info("\n" + "="*60)
    logger.info("✓ JSON 配置测试通过")
    logger.info("="*60)


def test_seed_everything():
    """同一种子得到逐位相同的随机数"""
    logger.info("="*60)
    logger.info("测试：随机种子")
    logger.info("="*60)

    from config import seed_everything

    seed_everything(123)
    first = torch.rand(5)
    seed_everything(123)
    second = torch.rand(5)
    assert torch.equal(first, second)
    logger.info("✓ 同一种子结果一致")


def main() -> int:
    tests = [test_config, test_json_config, test_seed_everything]
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
