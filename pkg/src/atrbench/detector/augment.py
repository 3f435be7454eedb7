"""On-the-fly training augmentations: cheap geometric transforms and blurring."""

import numpy as np
from scipy.ndimage import uniform_filter

AUGMENT_OPS = ("identity", "hflip", "vflip", "rot180", "blur3")


def apply_augment(patch: np.ndarray, op: str) -> np.ndarray:
    if op == "identity":
        return patch.copy()
    if op == "hflip":
        return patch[:, ::-1].copy()
    if op == "vflip":
        return patch[::-1, :].copy()
    if op == "rot180":
        return patch[::-1, ::-1].copy()
    if op == "blur3":
        # nearest-edge padding keeps a constant patch exactly constant
        return uniform_filter(patch, size=3, mode="nearest")
    raise ValueError(f"unknown augmentation {op!r}")


def draw_augment_op(op_seed: int) -> str:
    rng = np.random.default_rng(op_seed)
    return AUGMENT_OPS[rng.integers(len(AUGMENT_OPS))]


def augment(patch: np.ndarray, op_seed: int) -> np.ndarray:
    """Apply one deterministically drawn augmentation; intensities stay in [0, 1]."""
    return apply_augment(patch, draw_augment_op(op_seed))
