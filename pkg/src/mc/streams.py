"""
カウンタ方式の乱数ストリーム

パス p の正規乱数は Philox(key = seed | p << 64) から引く。ストリームは
パス番号だけで決まるため、スレッド数・ブロックの大きさ・まとめて引く
ステップ数によらず各パスの軌道は同一になる。
"""

from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1


def path_generator(seed: int, path: int) -> np.random.Generator:
    """
    パス用の乱数生成器

    Args:
        seed: 64ビットの基底シード
        path: パス番号（0始まり）

    Returns:
        Philox ベースの Generator
    """
    key = (int(seed) & MASK64) | (int(path) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def derived_seed(seed: int, *labels: Union[int, str]) -> int:
    """
    基底シードとラベル列から独立な64ビットシードを導く

    同じ (seed, labels) からは常に同じ値が得られる。
    """
    spawn_key = tuple(_label_to_int(label) for label in labels)
    state = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=spawn_key).generate_state(1, np.uint64)
    return int(state[0])


def _label_to_int(label: Union[int, str]) -> int:
    if isinstance(label, str):
        return int.from_bytes(label.encode('utf-8'), 'little') & MASK64
    return int(label) & MASK64
