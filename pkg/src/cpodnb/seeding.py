"""Purpose-scoped deterministic seeds: independent streams per (master, tag, index)."""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, tag: str, index: int = 0) -> int:
    key = f"{int(master)}:{tag}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def stream(master: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, tag, index))
