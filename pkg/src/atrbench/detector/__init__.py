"""Patch-based multi-class detector: the trainable ATR under study."""

from .augment import AUGMENT_OPS, apply_augment, augment, draw_augment_op
from .model import (
    HIDDEN_UNITS,
    N_CLASSES,
    PATCH_SIZE,
    ModelState,
    checkpoint_name,
    cross_entropy_from_logits,
    forward_logits,
    init_model,
    load_model,
    loss_and_grads,
    save_model,
    softmax,
    train_step,
)
from .patches import extract_patches, label_patches, patch_grid, training_patches
from .predict import (
    Detection,
    frame_inference,
    frame_loss,
    merge_candidates,
    nms,
    predict_frame,
)

__all__ = [
    "AUGMENT_OPS",
    "Detection",
    "HIDDEN_UNITS",
    "ModelState",
    "N_CLASSES",
    "PATCH_SIZE",
    "apply_augment",
    "augment",
    "checkpoint_name",
    "cross_entropy_from_logits",
    "draw_augment_op",
    "extract_patches",
    "forward_logits",
    "frame_inference",
    "frame_loss",
    "init_model",
    "label_patches",
    "load_model",
    "loss_and_grads",
    "merge_candidates",
    "nms",
    "patch_grid",
    "predict_frame",
    "save_model",
    "softmax",
    "train_step",
    "training_patches",
]
