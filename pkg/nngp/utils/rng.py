"""Seeded, splittable random streams.

Every random draw in the package comes from a numpy ``Generator`` backed by the
counter-based Philox-4x64 bit generator. A stream is identified by
``(seed, purpose, *indices)``: the tuple is hashed by ``numpy.random.SeedSequence``
(``entropy=seed``, ``spawn_key=(purpose code, *indices)``) into the Philox key, so
stream ``i`` of an ensemble never depends on how many other streams exist or on
the order in which workers request them.
"""

from typing import Sequence

import numpy as np

from ..exceptions import ConfigError

MAX_SEED = 2**64 - 1

# Stable integer codes for the spawn key; never reorder.
PURPOSES = {
    "expectation": 1,
    "measure": 2,
    "network": 3,
    "replica": 4,
    "width": 5,
    "barron": 6,
    "barron_oracle": 7,
    "bootstrap": 8,
    "hpi": 9,
    "l1sphere": 10,
    "restart": 11,
    "two_layer": 12,
}


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed."""
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}", key="seed")
    return seed


def seed_sequence(seed: int, purpose: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for the stream ``(seed, purpose, *indices)``."""
    key: Sequence[int] = (PURPOSES[purpose], *(int(i) for i in indices))
    return np.random.SeedSequence(entropy=check_seed(seed), spawn_key=key)


def stream(seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Independent Philox generator for ``(seed, purpose, *indices)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, purpose, *indices)))


def derive_seed(seed: int, purpose: str, *indices: int) -> int:
    """64-bit child seed, for handing a reproducible stream to another operation."""
    words = seed_sequence(seed, purpose, *indices).generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 32) | int(words[1])
