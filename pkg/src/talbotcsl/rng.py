"""Named, reproducible random substreams.

Every consumer derives its generator from ``(seed, name, index...)`` so the
draws do not depend on call order or on how work is split across workers.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def substream(seed, *names):
    """Generator for the substream ``names`` of ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy, spawn_key=tuple(_key(n) for n in names))))
