"""Frame-level prediction: candidate patches, merging NMS, and classification loss."""

from dataclasses import dataclass

import numpy as np

from ..boxes import box_center, box_iou
from ..errors import ParameterError
from ..frames import CLASS_NAMES
from .model import forward_logits, softmax
from .patches import LABEL_IOU, extract_patches, label_patches

SCORE_THRESHOLD = 0.5
NMS_IOU = 0.5
MERGE_RADIUS = 48.0  # px; merges diagonal stride-32 grid neighbors (45.3 px apart)


@dataclass(frozen=True)
class Detection:
    class_id: str
    bbox: tuple  # (x, y, w, h) floats
    score: float

    def to_json(self):
        return {
            "class": self.class_id,
            "bbox": [round(float(v), 2) for v in self.bbox],
            "score": round(float(self.score), 6),
        }


def _sort_key(det: Detection):
    return (-det.score, det.bbox[1], det.bbox[0], det.class_id)


def merge_candidates(candidates, nms_iou: float = NMS_IOU,
                     merge_radius: float = MERGE_RADIUS):
    """Greedy score-ordered suppression that merges rather than discards.

    The highest-scoring candidate absorbs every same-class candidate whose box
    overlaps it at IoU >= nms_iou or whose center lies within merge_radius; the
    surviving detection keeps the top score and takes the score-weighted mean
    of the absorbed boxes, which positions a detection between grid patches.
    """
    remaining = sorted(candidates, key=_sort_key)
    merged = []
    while remaining:
        keeper = remaining[0]
        kx, ky = box_center(keeper.bbox)
        members, rest = [], []
        for det in remaining:
            if det.class_id == keeper.class_id:
                cx, cy = box_center(det.bbox)
                close = (cx - kx) ** 2 + (cy - ky) ** 2 <= merge_radius**2
                if close or box_iou(det.bbox, keeper.bbox) >= nms_iou:
                    members.append(det)
                    continue
            rest.append(det)
        weights = np.array([m.score for m in members], dtype=np.float64)
        weights /= weights.sum()
        boxes = np.array([m.bbox for m in members], dtype=np.float64)
        bbox = tuple(float(v) for v in weights @ boxes)
        merged.append(Detection(class_id=keeper.class_id, bbox=bbox, score=keeper.score))
        remaining = rest
    return merged


def nms(detections, iou_threshold: float = NMS_IOU):
    """Classic greedy non-maximum suppression, per class, keeping top scores."""
    kept = []
    for det in sorted(detections, key=_sort_key):
        if all(
            det.class_id != k.class_id or box_iou(det.bbox, k.bbox) < iou_threshold
            for k in kept
        ):
            kept.append(det)
    return kept


def detections_from_logits(logits: np.ndarray, boxes: np.ndarray,
                           score_threshold: float = SCORE_THRESHOLD,
                           nms_iou: float = NMS_IOU,
                           merge_radius: float = MERGE_RADIUS):
    probs = softmax(np.asarray(logits, dtype=np.float64))
    cls = probs.argmax(axis=1)
    score = probs[np.arange(len(probs)), cls]
    keep = (cls > 0) & (score >= score_threshold)
    candidates = [
        Detection(class_id=CLASS_NAMES[cls[i] - 1],
                  bbox=tuple(float(v) for v in boxes[i]),
                  score=float(score[i]))
        for i in np.flatnonzero(keep)
    ]
    merged = merge_candidates(candidates, nms_iou=nms_iou, merge_radius=merge_radius)
    return sorted(nms(merged, iou_threshold=nms_iou), key=_sort_key)


def predict_frame(model, frame, score_threshold: float = SCORE_THRESHOLD,
                  nms_iou: float = NMS_IOU, stride: int = 32,
                  merge_radius: float = MERGE_RADIUS):
    """Classify every patch and reduce the positives to a detection list."""
    if not model.is_finite():
        raise ParameterError("model weights are not finite")
    patches, boxes = extract_patches(frame, stride)
    logits = forward_logits(model, patches)
    return detections_from_logits(
        logits, boxes, score_threshold=score_threshold,
        nms_iou=nms_iou, merge_radius=merge_radius,
    )


def frame_loss(model, frame, annotations=None, stride: int = 32,
               label_iou: float = LABEL_IOU) -> float:
    """Mean cross-entropy over the frame's patch grid, labels assigned by IoU
    overlap with the (possibly empty) annotation list."""
    from .model import cross_entropy_from_logits

    if annotations is None:
        annotations = frame.annotations
    patches, boxes = extract_patches(frame, stride)
    logits = forward_logits(model, patches)
    labels = label_patches(boxes, annotations, iou_threshold=label_iou)
    return cross_entropy_from_logits(logits, labels)


def frame_inference(model, frame, annotations=None, score_threshold: float = SCORE_THRESHOLD,
                    nms_iou: float = NMS_IOU, stride: int = 32,
                    merge_radius: float = MERGE_RADIUS):
    """Detections and classification loss from a single forward pass."""
    from .model import cross_entropy_from_logits

    if annotations is None:
        annotations = frame.annotations
    patches, boxes = extract_patches(frame, stride)
    logits = forward_logits(model, patches)
    detections = detections_from_logits(
        logits, boxes, score_threshold=score_threshold,
        nms_iou=nms_iou, merge_radius=merge_radius,
    )
    labels = label_patches(boxes, annotations)
    loss = cross_entropy_from_logits(logits, labels)
    return detections, loss
