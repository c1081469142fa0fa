"""Classical human detection on horizontal heatmaps.

A cell-averaging CFAR detector stands in for a learned region-proposal
stage: each cell is compared against the mean of a training ring around it
(a guard ring keeps the target's own energy out of the estimate), seed
cells are merged by connected components, and every blob becomes one box.
Vertical boxes follow from a fixed height range, and RoI features are
cropped without coordinate quantization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Box3D, box_iou
from .interp import bilinear_sample

PROB_CLIP = 1e-7


@dataclass
class Detection:
    """One detected human candidate on a plane grid."""

    box_cells: np.ndarray  # [x1, y1, x2, y2] in continuous grid cells
    box_m: np.ndarray      # same box in plane meters
    score: float
    peak_cell: tuple = (0, 0)  # (row, col) of the seeding peak
    label: str = "human"

    def __post_init__(self):
        self.box_cells = np.asarray(self.box_cells, dtype=float).reshape(4)
        self.box_m = np.asarray(self.box_m, dtype=float).reshape(4)
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("detection score must be in [0, 1]")


@dataclass
class DetectionTarget:
    """Ground truth for one predicted box: class label and box coordinates."""

    label: int                 # 0 background, 1 human
    coords: np.ndarray = field(default_factory=lambda: np.zeros(4))
    box: np.ndarray | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("target label must be 0 (background) or 1 (human)")
        self.coords = np.asarray(self.coords, dtype=float).reshape(4)

    @property
    def one_hot(self):
        return np.array([1.0 - self.label, float(self.label)])


def _clipped_window_sum(values, half):
    """Sum over the (2*half+1)^2 window around each cell, clipped at edges."""
    h, w = values.shape
    integral = np.zeros((h + 1, w + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(values, axis=0), axis=1)
    r0 = np.clip(np.arange(h) - half, 0, h)[:, None]
    r1 = np.clip(np.arange(h) + half + 1, 0, h)[:, None]
    c0 = np.clip(np.arange(w) - half, 0, w)[None, :]
    c1 = np.clip(np.arange(w) + half + 1, 0, w)[None, :]
    return integral[r1, c1] - integral[r0, c1] - integral[r1, c0] + integral[r0, c0]


def _clipped_window_count(shape, half):
    h, w = shape
    rows = (np.clip(np.arange(h) + half + 1, 0, h)
            - np.clip(np.arange(h) - half, 0, h))[:, None]
    cols = (np.clip(np.arange(w) + half + 1, 0, w)
            - np.clip(np.arange(w) - half, 0, w))[None, :]
    return rows * cols


def cfar_detect(heatmap, frame=0, guard=2, train=4, threshold_factor=3.0,
                box_extent=0.6, min_value=0.0):
    """Cell-averaging CFAR detection on one real-valued heatmap frame.

    A cell seeds a detection when its value exceeds ``threshold_factor``
    times the mean of its training ring (cells at Chebyshev distance in
    (guard, guard + train]; the ring is clipped at grid borders).  Seeds are
    merged by 8-connected components; each component yields one Detection
    centered on its peak cell with a fixed ``box_extent`` (meters) box,
    scored by peak-to-ring-mean ratio s mapped into [0, 1] as s / (1 + s).

    ``min_value`` adds an absolute floor on top of the relative test; on
    magnitude-normalized maps it rejects sidelobe blobs that beat their
    local ring but are far below the frame peak.
    """
    if heatmap.is_complex:
        raise ValueError("CFAR needs a real-valued heatmap (magnitude-normalize first)")
    if not 0 <= frame < heatmap.frame_count:
        raise IndexError(f"frame {frame} out of range")
    values = np.asarray(heatmap.values[frame], dtype=float)
    if np.any(values < 0):
        raise ValueError("CFAR expects non-negative values")
    if guard < 0 or train < 1:
        raise ValueError("guard must be >= 0 and train >= 1")
    if threshold_factor < 1.0:
        raise ValueError("threshold_factor must be >= 1")
    h, w = values.shape
    outer = guard + train
    if 2 * outer + 1 > min(h, w):
        raise ValueError(f"guard/train rings ({2 * outer + 1} cells wide) exceed "
                         f"the {h}x{w} grid")

    ring_sum = _clipped_window_sum(values, outer) - _clipped_window_sum(values, guard)
    ring_count = (_clipped_window_count(values.shape, outer)
                  - _clipped_window_count(values.shape, guard))
    ring_mean = ring_sum / ring_count

    seeds = values > threshold_factor * ring_mean
    if min_value > 0.0:
        seeds &= values >= min_value
    labels, count = ndimage.label(seeds, structure=np.ones((3, 3), dtype=bool))
    detections = []
    if count == 0:
        return detections
    peaks = ndimage.maximum_position(values, labels, index=range(1, count + 1))
    grid = heatmap.grid
    lo_f, lo_s, hi_f, hi_s = grid.bounds
    half_extent = box_extent / 2.0
    for row, col in peaks:
        mean = ring_mean[row, col]
        if mean <= 0.0:
            score = 1.0
        else:
            ratio = values[row, col] / mean
            score = ratio / (1.0 + ratio)
        cf, cs = grid.cell_center(row, col)
        box_m = np.array([max(cf - half_extent, lo_f), max(cs - half_extent, lo_s),
                          min(cf + half_extent, hi_f), min(cs + half_extent, hi_s)])
        box_cells = np.concatenate([grid.to_cells(box_m[:2]), grid.to_cells(box_m[2:])])
        detections.append(Detection(box_cells, box_m, score, (int(row), int(col))))
    return detections


def nms(detections, iou_threshold=0.5):
    """Greedy non-maximum suppression on metric boxes, highest score first."""
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i].score, i))
    kept = []
    for i in order:
        if all(box_iou(detections[i].box_m, detections[j].box_m) < iou_threshold
               for j in kept):
            kept.append(i)
    return [detections[i] for i in sorted(kept)]


def vertical_box_from_horizontal(hbox, height_range=(0.0, 2.0)):
    """Vertical-plane box [y1, z_min, y2, z_max] for a horizontal [x1, y1, x2, y2] box.

    People occupy a fixed band of heights, so the vertical box copies the
    horizontal box's range (y) span and takes its z span from that band.
    """
    z_min, z_max = (float(v) for v in height_range)
    if not z_min < z_max:
        raise ValueError("height range must satisfy z_min < z_max")
    hbox = np.asarray(hbox, dtype=float).reshape(4)
    return np.array([hbox[1], z_min, hbox[3], z_max])


def box3d_from_planes(hbox, vbox):
    """Compose a 3D box from paired horizontal (x, y) and vertical (y, z) boxes."""
    hbox = np.asarray(hbox, dtype=float).reshape(4)
    vbox = np.asarray(vbox, dtype=float).reshape(4)
    return Box3D((hbox[0], hbox[1], vbox[1]), (hbox[2], hbox[3], vbox[3]))


def roi_crop(values, box, out_size, oversample=2):
    """RoIAlign-style crop: bilinear sampling on a continuous box, no quantization.

    Args:
        values: (H, W) or (C, H, W) grid; value (i, j) sits at continuous
            coordinates (x = j, y = i).
        box: [x1, y1, x2, y2] in those continuous cell coordinates.
        out_size: output resolution P or (Ph, Pw).
        oversample: regular sub-points per output-cell axis; each output cell
            averages oversample**2 bilinear samples.

    Samples outside the grid clamp to the edge.
    """
    arr = np.asarray(values, dtype=float)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError("values must be (H, W) or (C, H, W)")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not (x2 > x1 and y2 > y1):
        raise ValueError("degenerate box")
    if np.isscalar(out_size):
        out_h = out_w = int(out_size)
    else:
        out_h, out_w = (int(v) for v in out_size)
    if out_h < 1 or out_w < 1 or oversample < 1:
        raise ValueError("output size and oversample must be positive")

    bin_w = (x2 - x1) / out_w
    bin_h = (y2 - y1) / out_h
    sub = (np.arange(oversample) + 0.5) / oversample
    xs = x1 + (np.arange(out_w)[:, None] + sub[None, :]) * bin_w  # (out_w, S)
    ys = y1 + (np.arange(out_h)[:, None] + sub[None, :]) * bin_h  # (out_h, S)
    xx = xs.reshape(-1)[None, :]  # (1, out_w*S)
    yy = ys.reshape(-1)[:, None]  # (out_h*S, 1)
    out = np.empty((arr.shape[0], out_h, out_w))
    for c in range(arr.shape[0]):
        sampled = bilinear_sample(arr[c], np.broadcast_to(xx, (out_h * oversample,
                                                               out_w * oversample)),
                                  np.broadcast_to(yy, (out_h * oversample,
                                                       out_w * oversample)))
        blocks = sampled.reshape(out_h, oversample, out_w, oversample)
        out[c] = blocks.mean(axis=(1, 3))
    return out[0] if squeeze else out


def smooth_l1(x, beta=1.0):
    """Huber-style loss: 0.5 x^2 below ``beta``, |x| - beta/2 above."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return np.where(ax < beta, 0.5 * x**2 / beta, ax - 0.5 * beta)


def smooth_l1_grad(x, beta=1.0):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < beta, x / beta, np.sign(x))


def _bce(prob, target):
    """Binary cross entropy with probabilities clipped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(prob, dtype=float), PROB_CLIP, 1.0 - PROB_CLIP)
    t = np.asarray(target, dtype=float)
    return -(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))


def detection_loss(predictions, targets, lam_det=1.0):
    """Multi-task box loss: classification plus coordinate regression.

    Per box: binary cross entropy between the predicted human score and the
    target class, plus ``lam_det`` times the summed smooth-l1 coordinate
    error -- the latter only for foreground (human) targets.  Returns the
    mean over boxes.

    Args:
        predictions: sequence of (human_score, coords[4]) pairs.
        targets: sequence of DetectionTarget, aligned with predictions.
    """
    predictions = list(predictions)
    targets = list(targets)
    if len(predictions) != len(targets):
        raise ValueError("prediction and target lists are misaligned")
    if not predictions:
        raise ValueError("need at least one box")
    total = 0.0
    for (score, coords), tgt in zip(predictions, targets):
        score = float(score)
        if not (np.isfinite(score) and 0.0 <= score <= 1.0):
            raise ValueError(f"class score {score} outside [0, 1]")
        p_true = score if tgt.label >= 1 else 1.0 - score
        term = float(_bce(p_true, 1.0))
        if tgt.label >= 1:
            diff = np.asarray(coords, dtype=float).reshape(4) - tgt.coords
            term += lam_det * float(np.sum(smooth_l1(diff)))
        total += term
    return total / len(predictions)


def detection_loss_grad(predictions, targets, lam_det=1.0):
    """Analytic gradients of detection_loss w.r.t. scores and coordinates.

    Returns (d_scores, d_coords) with shapes (N,) and (N, 4).  Where the
    forward pass clips a probability, the gradient is zero.
    """
    predictions = list(predictions)
    targets = list(targets)
    if len(predictions) != len(targets):
        raise ValueError("prediction and target lists are misaligned")
    n = len(predictions)
    if n == 0:
        raise ValueError("need at least one box")
    d_scores = np.zeros(n)
    d_coords = np.zeros((n, 4))
    for i, ((score, coords), tgt) in enumerate(zip(predictions, targets)):
        score = float(score)
        p_true = score if tgt.label >= 1 else 1.0 - score
        if PROB_CLIP < p_true < 1.0 - PROB_CLIP:
            sign = 1.0 if tgt.label >= 1 else -1.0
            d_scores[i] = -sign / (p_true * n)
        if tgt.label >= 1:
            diff = np.asarray(coords, dtype=float).reshape(4) - tgt.coords
            d_coords[i] = lam_det * smooth_l1_grad(diff) / n
    return d_scores, d_coords
