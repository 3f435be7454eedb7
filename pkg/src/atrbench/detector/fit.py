"""Offline fitting of the patch classifier on a set of labeled frames.

Objects are rare, so plain shuffled mini-batches barely ever see a positive;
batches are rebalanced to a fixed positive fraction instead (positives drawn
with replacement).
"""

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_seed, rng_for
from .model import ModelState, init_model, train_step
from .patches import training_patches


@dataclass(frozen=True)
class FitConfig:
    epochs: int = 60
    batch_size: int = 128
    learning_rate: float = 0.05
    pos_cap: int = 8
    neg_per_frame: int = 4
    stride: int = 32
    pos_fraction: float = 0.25
    min_steps: int = 400  # floor on total balanced batches for small banks


def build_patch_bank(frames, rng, config: FitConfig):
    """Training patches pooled over frames; (patches, labels)."""
    bank_patches, bank_labels = [], []
    for frame in frames:
        patches, labels = training_patches(
            frame.pixels, frame.annotations, rng,
            pos_cap=config.pos_cap, neg_count=config.neg_per_frame,
            stride=config.stride,
        )
        bank_patches.append(patches)
        bank_labels.append(labels)
    return (
        np.concatenate(bank_patches).astype(np.float32),
        np.concatenate(bank_labels),
    )


def fit_patch_classifier(frames, seed: int, config: FitConfig) -> tuple:
    """Train a fresh detector on the frames; returns (model, bank stats)."""
    rng = rng_for("fit-bank", seed)
    patches, labels = build_patch_bank(frames, rng, config)
    pos_idx = np.flatnonzero(labels > 0)
    neg_idx = np.flatnonzero(labels == 0)

    model = init_model(derive_seed("fit-init", seed))
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        # degenerate bank: fall back to plain shuffled batches
        order_rng = rng_for("fit-epochs", seed)
        for _ in range(config.epochs):
            order = order_rng.permutation(len(patches))
            for start in range(0, len(order), config.batch_size):
                sel = order[start : start + config.batch_size]
                train_step(model, (patches[sel], labels[sel]), config.learning_rate)
        return model, {"bank_patches": int(len(patches)), "bank_positives": int(len(pos_idx))}

    order_rng = rng_for("fit-epochs", seed)
    batch = config.batch_size
    n_pos = max(1, int(round(batch * config.pos_fraction)))
    batches_per_epoch = max(1, len(patches) // batch)
    total_steps = max(config.epochs * batches_per_epoch, config.min_steps)
    for _ in range(total_steps):
        pi = order_rng.choice(pos_idx, size=n_pos, replace=True)
        ni = order_rng.choice(neg_idx, size=min(batch - n_pos, len(neg_idx)),
                              replace=False)
        sel = np.concatenate([pi, ni])
        train_step(model, (patches[sel], labels[sel]), config.learning_rate)
    return model, {"bank_patches": int(len(patches)), "bank_positives": int(len(pos_idx))}
