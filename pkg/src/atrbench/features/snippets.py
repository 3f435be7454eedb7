"""Seeded sampling of square texture snippets from a frame."""

import numpy as np

from ..errors import ParameterError
from ..seeding import rng_for

SNIPPET_SIZE = 128


def snippet_positions(frame, n: int, seed: int, size: int = SNIPPET_SIZE) -> np.ndarray:
    """Top-left (row, col) corners of n snippets, reproducible from (frame identity, seed)."""
    rows, cols = frame.pixels.shape
    if rows < size or cols < size:
        raise ParameterError(f"frame {rows}x{cols} smaller than snippet size {size}")
    if n < 1:
        raise ParameterError("need at least one snippet")
    rng = rng_for("snippets", frame.domain_id, frame.frame_index, seed)
    r = rng.integers(0, rows - size + 1, size=n)
    c = rng.integers(0, cols - size + 1, size=n)
    return np.stack([r, c], axis=1)


def sample_snippets(frame, n: int, seed: int, size: int = SNIPPET_SIZE) -> np.ndarray:
    """Crop n size x size patches at deterministic pseudo-random in-bounds positions."""
    positions = snippet_positions(frame, n, seed, size)
    out = np.empty((n, size, size), dtype=frame.pixels.dtype)
    for i, (r, c) in enumerate(positions):
        out[i] = frame.pixels[r : r + size, c : c + size]
    return out
