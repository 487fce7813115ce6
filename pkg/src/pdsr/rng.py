"""Seed derivation shared by every stochastic stage.

All randomness flows from PCG64 generators whose 64-bit seeds are derived by
hashing a master seed together with integer labels. Adding a new label (a new
round, platform or repetition) never perturbs the streams of existing ones.
"""

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, *labels: int) -> int:
    """Hash ``master`` and ``labels`` into a 64-bit seed.

    Every argument is reduced modulo 2**64 and packed little-endian, so the
    result is identical on every platform and Python version.
    """
    payload = struct.pack(f"<{len(labels) + 1}Q", *(int(v) & _MASK64 for v in (master, *labels)))
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
