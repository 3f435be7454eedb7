"""Sliding patch grid, IoU-based patch labeling, and training-patch selection."""

import numpy as np

from ..boxes import iou_matrix
from ..errors import ParameterError
from ..frames import CLASS_NAMES
from .model import PATCH_SIZE

LABEL_IOU = 0.3


def patch_grid(stride: int, height: int, width: int, size: int = PATCH_SIZE) -> np.ndarray:
    """(N, 4) boxes (x, y, w, h) tiling the frame; all fully in-bounds."""
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    xs = np.arange(0, width - size + 1, stride)
    ys = np.arange(0, height - size + 1, stride)
    gx, gy = np.meshgrid(xs, ys)
    boxes = np.stack(
        [gx.ravel(), gy.ravel(), np.full(gx.size, size), np.full(gx.size, size)], axis=1
    )
    return boxes.astype(np.int32)


def extract_patches(frame, stride: int = 32):
    """All 64x64 patches on the stride grid; returns (patches, boxes)."""
    pixels = getattr(frame, "pixels", frame)
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    height, width = pixels.shape
    win = np.lib.stride_tricks.sliding_window_view(pixels, (PATCH_SIZE, PATCH_SIZE))
    sub = win[::stride, ::stride]
    patches = sub.reshape(-1, PATCH_SIZE, PATCH_SIZE)
    boxes = patch_grid(stride, height, width)
    return patches, boxes


def label_patches(boxes: np.ndarray, annotations, iou_threshold: float = LABEL_IOU) -> np.ndarray:
    """Class index per patch: the best-overlapping annotation at IoU >= threshold,
    else background (0)."""
    labels = np.zeros(len(boxes), dtype=np.int64)
    if not annotations:
        return labels
    ann_boxes = np.array([a.bbox for a in annotations], dtype=np.float64)
    ious = iou_matrix(boxes, ann_boxes)
    best = ious.argmax(axis=1)
    best_iou = ious[np.arange(len(boxes)), best]
    hit = best_iou >= iou_threshold
    class_index = np.array([1 + CLASS_NAMES.index(a.class_id) for a in annotations])
    labels[hit] = class_index[best[hit]]
    return labels


AMBIGUOUS_IOU = 0.05


def training_patches(pixels: np.ndarray, annotations, rng: np.random.Generator,
                     pos_cap: int = 6, neg_count: int = 6, stride: int = 32,
                     ambiguous_iou: float = AMBIGUOUS_IOU):
    """Patches used for (re)training on one frame: every labeled-positive patch up
    to pos_cap, plus neg_count seeded background patches.

    Patches that graze an object below the labeling threshold are excluded from
    the negatives; training on them would contradict the positives one grid
    step away."""
    height, width = pixels.shape
    boxes = patch_grid(stride, height, width)
    labels = label_patches(boxes, annotations)
    if annotations:
        best_iou = iou_matrix(
            boxes, np.array([a.bbox for a in annotations], dtype=np.float64)
        ).max(axis=1)
    else:
        best_iou = np.zeros(len(boxes))
    pos_idx = np.flatnonzero(labels > 0)
    neg_idx = np.flatnonzero((labels == 0) & (best_iou < ambiguous_iou))
    if len(pos_idx) > pos_cap:
        pos_idx = rng.choice(pos_idx, size=pos_cap, replace=False)
    if len(neg_idx) > neg_count:
        neg_idx = rng.choice(neg_idx, size=neg_count, replace=False)
    keep = np.concatenate([pos_idx, neg_idx])
    keep.sort()
    patches = np.stack(
        [pixels[y : y + PATCH_SIZE, x : x + PATCH_SIZE] for x, y, _, _ in boxes[keep]]
    )
    return patches, labels[keep]
