"""Counter-based, splittable random streams.

Every random draw in the package comes from a Philox generator keyed by a
``SeedSequence`` built from ``(master_seed, *keys)``. Keys are small
non-negative integers (replicate index, fold index, stream tag), so any task
can rebuild its stream without knowing how work was scheduled.
"""

from __future__ import annotations

import secrets

import numpy as np

# stream tags, kept stable so recorded seeds stay meaningful
DATA = 0
SPLIT = 1
BOOTSTRAP = 2
ORACLE = 3
REPLICATE = 4
RETRY = 5


def generator(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(v < 0 for v in entropy):
        raise ValueError("seeds and stream keys must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit child seed, for handing to code that wants a plain integer."""
    return int(generator(seed, *keys).integers(0, 2**63 - 1))


def fresh_seed() -> int:
    return secrets.randbits(63)
