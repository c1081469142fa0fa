"""Independent brute-force reference implementations used as test oracles.

Deliberately naive (plain Python loops, no shared code with the package
internals beyond data containers) so that they stay an independent check
on the optimized paths.
"""

import numpy as np


def naive_beamform(cube, grid):
    """Triple-loop evaluation of the coherent plane sum, cell by cell."""
    k_n, m_n, t_n = cube.data.shape
    lam = cube.config.wavelengths
    elements = cube.array.element_positions
    out = np.zeros((t_n, grid.height, grid.width), dtype=complex)
    for row in range(grid.height):
        for col in range(grid.width):
            first, second = grid.cell_center(row, col)
            if grid.plane == "horizontal":
                cell = np.array([first, second, grid.lift])
            else:
                cell = np.array([grid.lift, first, second])
            for t in range(t_n):
                acc = 0.0 + 0.0j
                for k in range(k_n):
                    for m in range(m_n):
                        d = 2.0 * np.linalg.norm(elements[m] - cell)
                        acc += cube.data[k, m, t] * np.exp(2j * np.pi * d / lam[k])
                out[t, row, col] = acc
    return out


def naive_bilinear(values, x, y):
    """Scalar bilinear interpolation with edge clamping, nodes at integers."""
    h, w = values.shape
    x = min(max(float(x), 0.0), w - 1.0)
    y = min(max(float(y), 0.0), h - 1.0)
    x0 = min(int(np.floor(x)), max(w - 2, 0))
    y0 = min(int(np.floor(y)), max(h - 2, 0))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    return (values[y0, x0] * (1 - fx) * (1 - fy)
            + values[y0, x1] * fx * (1 - fy)
            + values[y1, x0] * (1 - fx) * fy
            + values[y1, x1] * fx * fy)


def naive_roi_crop(values, box, out_size, oversample=2):
    """Per-cell RoI crop: average of oversample^2 bilinear samples per bin."""
    x1, y1, x2, y2 = box
    out = np.zeros((out_size, out_size))
    bin_w = (x2 - x1) / out_size
    bin_h = (y2 - y1) / out_size
    for i in range(out_size):
        for j in range(out_size):
            acc = 0.0
            for si in range(oversample):
                for sj in range(oversample):
                    sx = x1 + (j + (sj + 0.5) / oversample) * bin_w
                    sy = y1 + (i + (si + 0.5) / oversample) * bin_h
                    acc += naive_bilinear(values, sx, sy)
            out[i, j] = acc / oversample**2
    return out


def naive_attention_layer(seq, layer, num_heads):
    """Per-head scaled dot-product attention written out longhand."""
    n, d = seq.shape
    dh = d // num_heads
    q_full = seq @ layer.wq + layer.bq
    k_full = seq @ layer.wk + layer.bk
    v_full = seq @ layer.wv + layer.bv
    ctx = np.zeros((n, d))
    attn = np.zeros((num_heads, n, n))
    for head in range(num_heads):
        sl = slice(head * dh, (head + 1) * dh)
        q, k, v = q_full[:, sl], k_full[:, sl], v_full[:, sl]
        for i in range(n):
            logits = np.array([q[i] @ k[j] / np.sqrt(dh) for j in range(n)])
            e = np.exp(logits - logits.max())
            weights = e / e.sum()
            attn[head, i] = weights
            ctx[i, sl] = sum(weights[j] * v[j] for j in range(n))
    return seq + ctx @ layer.wo + layer.bo, attn


def naive_ap(detections, gt_boxes_by_frame, threshold, iou_fn):
    """AP from an explicitly enumerated precision/recall table.

    Re-runs the greedy matching from scratch for every ranked prefix and
    computes the all-point interpolation by exhaustive maxima.

    Args:
        detections: list of (frame, box, score), any order.
        gt_boxes_by_frame: dict frame -> list of boxes.
        threshold: IoU threshold.
        iou_fn: box IoU function.
    """
    ranked = sorted(enumerate(detections),
                    key=lambda it: (-it[1][2], it[1][0], it[0]))
    ranked = [det for _, det in ranked]
    num_gt = sum(len(v) for v in gt_boxes_by_frame.values())
    if num_gt == 0 or not ranked:
        return 0.0, [], []

    def match_prefix(prefix):
        taken = {f: [False] * len(v) for f, v in gt_boxes_by_frame.items()}
        tp = 0
        for frame, box, _ in prefix:
            best_iou, best = 0.0, -1
            for gi, gt in enumerate(gt_boxes_by_frame.get(frame, [])):
                if taken[frame][gi]:
                    continue
                iou = iou_fn(box, gt)
                if iou >= threshold and iou > best_iou:
                    best_iou, best = iou, gi
            if best >= 0:
                taken[frame][best] = True
                tp += 1
        return tp

    precisions, recalls = [], []
    for n in range(1, len(ranked) + 1):
        tp = match_prefix(ranked[:n])
        precisions.append(tp / n)
        recalls.append(tp / num_gt)

    # all-point interpolation, exhaustively: for each recall step take the
    # best precision at recall >= r
    ap = 0.0
    prev_recall = 0.0
    for i in range(len(ranked)):
        if recalls[i] > prev_recall:
            best_p = max(precisions[j] for j in range(len(ranked))
                         if recalls[j] >= recalls[i])
            ap += (recalls[i] - prev_recall) * best_p
            prev_recall = recalls[i]
    return ap, precisions, recalls


def nearest_pairs(camera_ts, radar_ts, max_residual):
    """Exhaustive nearest-neighbor pairing (earlier frame wins ties)."""
    pairs = []
    for i, t in enumerate(camera_ts):
        residuals = [abs(r - t) for r in radar_ts]
        best = min(range(len(radar_ts)), key=lambda j: (residuals[j], j))
        if residuals[best] <= max_residual:
            pairs.append((i, best, residuals[best]))
    return pairs
