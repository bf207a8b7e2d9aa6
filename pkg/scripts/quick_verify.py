"""
快速验证脚本
检查语料、检查点和词表文件的状态
"""

import sys
from pathlib import Path

# 添加项目根目录到路径
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import CHECKPOINT_DIR, CORPUS_DIR, VOCAB_DIR
from exceptions import TsrError
from codec import Vocab
from synthgen import iter_records, load_manifest
from tensor_core import load_checkpoint


def show_corpus(corpus: Path) -> None:
    try:
        manifest = load_manifest(corpus)
    except TsrError as e:
        print(f"  {corpus.name}: ✗ {e}")
        return
    good = bad = 0
    for _, record, error in iter_records(corpus):
        if error is None:
            good += 1
        else:
            bad += 1
    print(f"  {corpus.name}: {good} 条记录, 图像 {manifest.get('image_size')}px, seed={manifest.get('seed')}")
    print(f"    风格分布: {manifest.get('styles', {})}")
    faults = {k: v for k, v in manifest.get('faults', {}).items() if v}
    if faults:
        print(f"    注入故障: {faults}")
    if bad:
        print(f"    ⚠️ 无法解析的行: {bad}")


def main():
    print("="*80)
    print("快速验证")
    print("="*80)

    # 检查语料
    corpora = sorted(p for p in CORPUS_DIR.iterdir() if p.is_dir()) if CORPUS_DIR.exists() else []
    print(f"\n📊 语料: {len(corpora)} 个")
    for corpus in corpora:
        show_corpus(corpus)
    if not corpora:
        print("  (无语料，先运行 python scripts/tsr.py synth)")

    # 检查检查点
    checkpoints = sorted(CHECKPOINT_DIR.glob("*.ckpt"))
    print(f"\n🧠 检查点: {len(checkpoints)} 个")
    for path in checkpoints:
        size = path.stat().st_size / (1024 * 1024)
        try:
            tensors, metadata = load_checkpoint(path)
        except TsrError as e:
            print(f"    {path.name}: ✗ {e}")
            continue
        kind = metadata.get('kind', '?')
        task = metadata.get('config', {}).get('task', '')
        print(f"    {path.name}: {kind} {task} {len(tensors)} 个张量, step={metadata.get('step', 0)}, {size:.2f}MB")
    if not checkpoints:
        print("  (无检查点)")

    # 检查词表
    vocab_files = sorted(VOCAB_DIR.glob("*.json"))
    print(f"\n📝 词表文件: {len(vocab_files)} 个")
    for path in vocab_files:
        try:
            vocab = Vocab.load(path)
        except TsrError as e:
            print(f"    {path.name}: ✗ {e}")
            continue
        print(f"    {path.name}: {vocab.name} {len(vocab)} 个 token")

    print("\n" + "="*80)


if __name__ == '__main__':
    main()
