"""Named, seedable random substreams (PCG64 over SeedSequence spawn keys)."""

import numpy as np

SEQUENCE = 0
NOISE = 1
BALLS = 2


def substream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Generator for ``(seed, purpose, index)``; distinct triples give independent streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.PCG64(ss))
