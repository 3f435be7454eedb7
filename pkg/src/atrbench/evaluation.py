"""Detection evaluation: mean average precision over score-ranked detections.

Protocol: per class, detections from all frames are sorted by descending
score and greedily matched to the best-IoU unmatched ground-truth box of the
same frame at IoU >= threshold. AP is the area under the monotone precision
envelope of the resulting precision-recall curve; mAP averages the per-class
APs, skipping classes absent from both truth and detections.
"""

import numpy as np

from .boxes import box_iou
from .frames import CLASS_NAMES

EVAL_IOU = 0.5


def _average_precision(flags, n_truth: int) -> float:
    """AP from an ordered TP/FP flag sequence (already sorted by score)."""
    if n_truth == 0:
        return 0.0
    if not flags:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum([not f for f in flags])
    recall = tp / n_truth
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        if r > prev_r:
            ap += (r - prev_r) * p
            prev_r = r
    return float(ap)


def compute_map(detections_per_frame, truths_per_frame, iou_threshold: float = EVAL_IOU,
                class_names=CLASS_NAMES) -> float:
    """mAP over aligned per-frame detection and ground-truth lists."""
    if len(detections_per_frame) != len(truths_per_frame):
        raise ValueError("detections and truths must cover the same frames")
    per_class = []
    for cls in class_names:
        dets = []
        for frame_i, frame_dets in enumerate(detections_per_frame):
            for order, det in enumerate(frame_dets):
                if det.class_id == cls:
                    dets.append((-det.score, frame_i, order, det))
        truth_boxes = {}
        n_truth = 0
        for frame_i, anns in enumerate(truths_per_frame):
            boxes = [a.bbox for a in anns if a.class_id == cls]
            if boxes:
                truth_boxes[frame_i] = boxes
                n_truth += len(boxes)
        if n_truth == 0 and not dets:
            continue  # class absent everywhere: excluded from the mean
        dets.sort(key=lambda t: t[:3])
        matched = {fi: [False] * len(bx) for fi, bx in truth_boxes.items()}
        flags = []
        for _, frame_i, _, det in dets:
            best_iou, best_j = 0.0, -1
            for j, tbox in enumerate(truth_boxes.get(frame_i, ())):
                if matched[frame_i][j]:
                    continue
                iou = box_iou(det.bbox, tbox)
                if iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j >= 0 and best_iou >= iou_threshold:
                matched[frame_i][best_j] = True
                flags.append(True)
            else:
                flags.append(False)
        per_class.append(_average_precision(flags, n_truth))
    if not per_class:
        return 0.0
    return float(np.mean(per_class))


def rolling_map(detections_per_frame, truths_per_frame, window: int = 20,
                iou_threshold: float = EVAL_IOU):
    """mAP over a sliding window of frames; entry t covers frames [t-window+1, t]."""
    n = len(detections_per_frame)
    out = []
    for t in range(n):
        lo = max(0, t - window + 1)
        out.append(
            compute_map(
                detections_per_frame[lo : t + 1],
                truths_per_frame[lo : t + 1],
                iou_threshold=iou_threshold,
            )
        )
    return out
