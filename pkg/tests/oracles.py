"""Independent reference implementations used to check production code.

Everything here is deliberately written with plain Python loops and without
reusing the production helpers, so a bug cannot hide on both sides.
"""


def iou_corners(a, b) -> float:
    """IoU from corner arithmetic; independent of atrbench.boxes."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ax1, ay1 = ax0 + aw, ay0 + ah
    bx1, by1 = bx0 + bw, by0 + bh
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (aw * ah + bw * bh - inter)


def brute_force_map(dets_per_frame, truths_per_frame, iou_threshold, class_names):
    """Greedy score-ordered matching and direct precision-envelope integration."""
    aps = []
    for cls in class_names:
        records = []
        for fi, dets in enumerate(dets_per_frame):
            for order, det in enumerate(dets):
                if det.class_id == cls:
                    records.append((fi, order, det))
        truths = {
            fi: [a for a in anns if a.class_id == cls]
            for fi, anns in enumerate(truths_per_frame)
        }
        n_truth = sum(len(v) for v in truths.values())
        if n_truth == 0 and not records:
            continue
        if n_truth == 0:
            aps.append(0.0)
            continue
        records.sort(key=lambda t: (-t[2].score, t[0], t[1]))
        used = {fi: set() for fi in truths}
        flags = []
        for fi, _, det in records:
            best_iou, best_j = 0.0, None
            for j, truth in enumerate(truths.get(fi, [])):
                if j in used.get(fi, set()):
                    continue
                iou = iou_corners(det.bbox, truth.bbox)
                if iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j is not None and best_iou >= iou_threshold:
                used[fi].add(best_j)
                flags.append(1)
            else:
                flags.append(0)
        tp = fp = 0
        points = []
        for flag in flags:
            tp += flag
            fp += 1 - flag
            points.append((tp / n_truth, tp / (tp + fp)))
        ap = 0.0
        prev_recall = 0.0
        for i, (recall, _) in enumerate(points):
            if recall > prev_recall:
                envelope = max(p for _, p in points[i:])
                ap += (recall - prev_recall) * envelope
                prev_recall = recall
        aps.append(ap)
    if not aps:
        return 0.0
    return sum(aps) / len(aps)


def emd_by_mass_moving(p, q, bin_width):
    """W1 by explicitly carrying mass between adjacent bins."""
    carry = 0.0
    work = 0.0
    for pi, qi in zip(p, q):
        carry += pi - qi
        work += abs(carry)
    return work * bin_width


def eq1_probabilities(losses, epsilon):
    """Hand transcription of the loss-sampling equation."""
    lbar = sum(losses) / len(losses)
    weights = [l + epsilon * lbar for l in losses]
    total = sum(weights)
    return [w / total for w in weights]
