"""Named, seedable random streams.

Every stream is a PCG64 generator keyed by ``(seed, *names)``, so adding a
new consumer never shifts the numbers drawn by an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(name: object) -> int:
    return zlib.crc32(str(name).encode("utf-8"))


def stream(seed: int, *names: object) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF, *(_key(n) for n in names)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
