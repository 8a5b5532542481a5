"""
Helper utilities: seeded random streams and structured records
"""
import json
import os
import zlib
from typing import Iterable, List, Mapping, Union

import numpy as np

SeedKey = Union[int, str]


def _key_to_int(key: SeedKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    if key < 0:
        raise ValueError(f"seed keys must be non-negative, got {key}")
    return int(key)


def derive_rng(seed: int, *keys: SeedKey) -> np.random.Generator:
    """Independent generator for (seed, keys...); same inputs give the same stream"""
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def write_record(path: str, record: Mapping[str, object]) -> None:
    """Append one JSON line to ``path``"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'a', encoding='utf-8') as f:
        f.write(json.dumps(record, ensure_ascii=False, sort_keys=False) + '\n')


def read_records(path: str) -> List[dict]:
    with open(path, 'r', encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def chunked(items: List, size: int) -> Iterable[List]:
    for start in range(0, len(items), size):
        yield items[start:start + size]
