"""Named random streams derived from one integer seed.

Every consumer of randomness asks for its own stream by name, so adding a
new consumer never shifts the numbers another one sees.
"""

import zlib

import numpy as np

STREAMS = ("init", "shuffle", "noise", "generator", "data", "test-data")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def rng_for(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name`` under the master ``seed``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(stream_key(name),))
    return np.random.default_rng(ss)


def derive_seed(seed: int, name: str) -> int:
    """A 32-bit child seed, for places that store a plain integer seed."""
    return int(rng_for(seed, name).integers(0, 2**31 - 1))
