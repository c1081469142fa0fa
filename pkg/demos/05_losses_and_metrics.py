"""Loss functions and detection metrics on toy fixtures.

Shows the detection loss (classification + box regression), the mask loss,
the combined objective, mask IoU, and a COCO-style AP/recall evaluation with
PR-curve export.
"""

from pathlib import Path

import numpy as np

from rfsilhouette import (DetectionTarget, EvalRecord, average_precision,
                          detection_loss, mask_iou, mask_loss, pr_curves_to_csv,
                          total_loss)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# --- detection loss -------------------------------------------------------
targets = [DetectionTarget(1, coords=(1.0, 1.0, 2.0, 2.0)),
           DetectionTarget(0)]
good = [(0.95, (1.02, 0.98, 2.01, 1.99)), (0.05, (0.0, 0.0, 0.0, 0.0))]
bad = [(0.55, (1.4, 0.6, 2.5, 1.6)), (0.60, (0.0, 0.0, 0.0, 0.0))]
l_good = detection_loss(good, targets)
l_bad = detection_loss(bad, targets)
print(f"detection loss: good predictions {l_good:.4f}, sloppy ones {l_bad:.4f}")

# --- mask loss -------------------------------------------------------------
rng = np.random.default_rng(0)
gt_mask = np.zeros((28, 28))
gt_mask[6:22, 10:18] = 1.0
sharp = np.stack([1.0 - gt_mask, np.clip(gt_mask + rng.normal(0, 0.05, gt_mask.shape), 0, 1)])
blurry = np.full((2, 28, 28), 0.5)
l_sharp = mask_loss(sharp[None], gt_mask[None], [1])
l_blurry = mask_loss(blurry[None], gt_mask[None], [1])
print(f"mask loss: sharp {l_sharp:.4f}, uninformative {l_blurry:.4f} (= ln 2)")
print(f"total loss (good det + sharp mask): {total_loss(l_good, l_sharp):.4f}")

# --- mask IoU ---------------------------------------------------------------
shifted = np.roll(gt_mask, 3, axis=1)
print(f"mask IoU of the truth against a 3-px shifted copy: "
      f"{mask_iou(gt_mask.astype(int), shifted.astype(int)):.3f}")

# --- AP / recall / PR curves ------------------------------------------------
records = []
for frame in range(6):
    gts = [np.array([1.0 + 0.1 * frame, 1.0, 2.0 + 0.1 * frame, 2.0])]
    detections = [(gts[0] + rng.normal(0, 0.05, 4), float(rng.uniform(0.7, 0.99)))]
    if frame % 2 == 0:  # sprinkle a false alarm
        detections.append((np.array([3.0, 3.0, 3.6, 3.6]),
                           float(rng.uniform(0.3, 0.6))))
    records.append(EvalRecord(frame, detections, gts))

report = average_precision(records)
print("\nAP per threshold:")
for thr, ap in report["ap_per_threshold"].items():
    print(f"  IoU {thr}: {ap:.3f}")
print(f"AP50:95 {report['ap_50_95']:.3f}, recall {report['recall']:.3f}")
pr_curves_to_csv(report, OUT / "pr_curves.csv")
print(f"wrote {OUT / 'pr_curves.csv'}")
