"""Bilinear sampling on grids whose values sit at integer node coordinates."""

from __future__ import annotations

import numpy as np


def bilinear_sample(values, x, y):
    """Sample ``values[row, col]`` at continuous (x = col, y = row).

    Coordinates outside the grid clamp to the edge (replicate padding).
    """
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    x = np.clip(np.asarray(x, dtype=float), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=float), 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(y).astype(int), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    return (values[y0, x0] * (1 - fx) * (1 - fy)
            + values[y0, x1] * fx * (1 - fy)
            + values[y1, x0] * (1 - fx) * fy
            + values[y1, x1] * fx * fy)


def bilinear_resize(values, out_shape):
    """Resize a 2D array, mapping output pixel centers onto the input extent."""
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    oh, ow = out_shape
    if oh < 1 or ow < 1:
        raise ValueError("output shape must be at least 1x1")
    x = (np.arange(ow) + 0.5) * (w / ow) - 0.5
    y = (np.arange(oh) + 0.5) * (h / oh) - 0.5
    xx, yy = np.meshgrid(x, y)
    return bilinear_sample(values, xx, yy)
