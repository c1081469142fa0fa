"""Losses and detection/segmentation metrics.

Covers the mask branch loss (per-pixel binary cross entropy on the ground
truth class channel), the combined loss, binary mask IoU, and COCO-style
average precision with greedy score-descending matching and all-point
precision-envelope interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detect import PROB_CLIP, _bce
from .geometry import box_iou

DEFAULT_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
PR_CURVE_THRESHOLDS = (0.5, 0.65, 0.75)


@dataclass
class EvalRecord:
    """One frame's detections (box, score) and ground-truth boxes."""

    frame: int
    detections: list = field(default_factory=list)
    gt_boxes: list = field(default_factory=list)

    def __post_init__(self):
        checked = []
        for box, score in self.detections:
            score = float(score)
            if not 0.0 <= score <= 1.0:
                raise ValueError("detection scores must be in [0, 1]")
            checked.append((np.asarray(box, dtype=float).reshape(4), score))
        self.detections = checked
        self.gt_boxes = [np.asarray(b, dtype=float).reshape(4) for b in self.gt_boxes]


def mask_loss(pred_masks, gt_masks, gt_classes):
    """Mean per-pixel binary cross entropy on the ground-truth class channel.

    Args:
        pred_masks: (N, K, m, m) predicted probabilities (K class channels).
        gt_masks: (N, m, m) binary ground-truth masks.
        gt_classes: (N,) ground-truth class index per box.

    Only channel gt_classes[i] of box i contributes; the others are free.
    """
    preds = np.asarray(pred_masks, dtype=float)
    gts = np.asarray(gt_masks, dtype=float)
    classes = np.asarray(gt_classes, dtype=int).reshape(-1)
    if preds.ndim != 4:
        raise ValueError("pred_masks must be (N, K, m, m)")
    n = preds.shape[0]
    if n < 1:
        raise ValueError("need at least one box")
    if gts.shape != (n,) + preds.shape[2:]:
        raise ValueError(f"gt shape {gts.shape} does not match predictions")
    if classes.shape != (n,) or np.any(classes < 0) or np.any(classes >= preds.shape[1]):
        raise ValueError("gt_classes must index the prediction channels")
    selected = preds[np.arange(n), classes]  # (N, m, m)
    return float(np.mean([_bce(selected[i], gts[i]).mean() for i in range(n)]))


def mask_loss_grad(pred_masks, gt_masks, gt_classes):
    """Analytic gradient of mask_loss w.r.t. the predicted probabilities."""
    preds = np.asarray(pred_masks, dtype=float)
    gts = np.asarray(gt_masks, dtype=float)
    classes = np.asarray(gt_classes, dtype=int).reshape(-1)
    n = preds.shape[0]
    if n < 1:
        raise ValueError("need at least one box")
    grad = np.zeros_like(preds)
    pixels = preds.shape[2] * preds.shape[3]
    for i in range(n):
        p = preds[i, classes[i]]
        inside = (p > PROB_CLIP) & (p < 1.0 - PROB_CLIP)
        pc = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
        grad[i, classes[i]] = inside * (-gts[i] / pc + (1.0 - gts[i]) / (1.0 - pc))
    return grad / (n * pixels)


def total_loss(detection_term, mask_term):
    """Combined objective: detection loss plus mask loss."""
    if not (np.isfinite(detection_term) and np.isfinite(mask_term)):
        raise ValueError("loss terms must be finite")
    return float(detection_term) + float(mask_term)


def mask_iou(a, b):
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    for m in (a, b):
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("masks must be binary")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _ordered_detections(records):
    """Pool detections over frames, sorted by score desc, then frame, then index."""
    pooled = []
    for rec in records:
        for j, (box, score) in enumerate(rec.detections):
            pooled.append((rec.frame, j, box, score))
    pooled.sort(key=lambda it: (-it[3], it[0], it[1]))
    return pooled


def _greedy_match(ordered, gt_by_frame, threshold):
    """True-positive flags for score-ranked detections at one IoU threshold.

    Each ground truth matches at most once; a detection takes the unmatched
    ground truth of highest IoU >= threshold in its frame.
    """
    taken = {frame: [False] * len(boxes) for frame, boxes in gt_by_frame.items()}
    tp = np.zeros(len(ordered), dtype=bool)
    for rank, (frame, _, box, _) in enumerate(ordered):
        best_iou = 0.0
        best = -1
        for gi, gt in enumerate(gt_by_frame.get(frame, [])):
            if taken.get(frame)[gi]:
                continue
            iou = box_iou(box, gt)
            if iou >= threshold and iou > best_iou:
                best_iou = iou
                best = gi
        if best >= 0:
            tp[rank] = True
            taken[frame][best] = True
    return tp


def _ap_from_flags(tp, num_gt):
    """All-point interpolated AP plus the raw precision/recall points."""
    if num_gt == 0 or tp.size == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    cum = np.cumsum(tp)
    precision = cum / np.arange(1, tp.size + 1)
    recall = cum / num_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev = 0.0
    for i in range(tp.size):
        if recall[i] > prev:
            ap += (recall[i] - prev) * envelope[i]
            prev = recall[i]
    return float(ap), precision, recall


def average_precision(records, iou_thresholds=None):
    """COCO-style AP/recall report over per-frame evaluation records.

    Detections are pooled across frames and ranked by score; matching is
    greedy per IoU threshold with each ground truth used at most once.  AP
    integrates the all-point precision envelope over recall.  With zero
    ground truths, AP and recall are 0 by convention even if detections
    exist.  Returns a JSON-ready dict including PR curves at 0.5/0.65/0.75.
    """
    records = list(records)
    thresholds = tuple(iou_thresholds) if iou_thresholds else DEFAULT_IOU_THRESHOLDS
    ordered = _ordered_detections(records)
    gt_by_frame = {rec.frame: rec.gt_boxes for rec in records}
    num_gt = sum(len(rec.gt_boxes) for rec in records)

    ap_per = {}
    recall_per = {}
    for thr in thresholds:
        tp = _greedy_match(ordered, gt_by_frame, thr)
        ap, _, _ = _ap_from_flags(tp, num_gt)
        ap_per[f"{thr:.2f}"] = ap
        recall_per[f"{thr:.2f}"] = float(tp.sum() / num_gt) if num_gt else 0.0

    pr_curves = {}
    for thr in PR_CURVE_THRESHOLDS:
        tp = _greedy_match(ordered, gt_by_frame, thr)
        _, precision, recall = _ap_from_flags(tp, num_gt)
        pr_curves[f"{thr:.2f}"] = [[float(r), float(p)]
                                   for r, p in zip(recall, precision)]

    aps = list(ap_per.values())
    report = {
        "ap_per_threshold": ap_per,
        "ap_50_95": float(np.mean(aps)) if aps else 0.0,
        "ap_50": ap_per.get("0.50", 0.0),
        "ap_75": ap_per.get("0.75", 0.0),
        "recall": recall_per.get("0.50", 0.0),
        "recall_per_threshold": recall_per,
        "pr_curves": pr_curves,
        "num_detections": len(ordered),
        "num_ground_truths": num_gt,
    }
    return report


def pr_curves_to_csv(report, path):
    """Write the report's PR curves as threshold,recall,precision rows."""
    lines = ["threshold,recall,precision"]
    for thr in sorted(report["pr_curves"]):
        for recall, precision in report["pr_curves"][thr]:
            lines.append(f"{thr},{recall!r},{precision!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
