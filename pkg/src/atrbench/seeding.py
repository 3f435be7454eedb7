"""Stable seed derivation so every artifact is a pure function of (config, seed).

Python's builtin hash() is salted per process and must never be used here;
all substreams are derived by hashing a tag path with blake2b.
"""

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Collapse a tag path (strings, ints, ...) into a stable 64-bit seed."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(*parts) -> np.random.Generator:
    """Deterministic generator for a tag path, independent of call order."""
    return np.random.default_rng(derive_seed(*parts))
