"""Projection of chirp samples onto horizontal and vertical imaging planes.

Each grid cell is lifted to 3D and the raw samples are coherently summed
with the matched round-trip phase:

    value(cell, t) = sum_k sum_m s[k, m, t] * exp(+j 2 pi d_m(cell) / lambda_k)

A reflector therefore adds up in phase exactly at the cell containing it.
Static multipath is removed afterwards by frame differencing, which has to
happen on the complex values: magnitudes alone would not cancel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

PLANES = ("horizontal", "vertical")


@dataclass(frozen=True)
class PlaneGrid:
    """Discretization of one imaging plane.

    horizontal: axes (x, y), cells lifted to z = lift (mount height).
    vertical:   axes (y, z), cells lifted to x = lift (lateral offset).

    ``origin`` is the low corner of cell (row 0, col 0); columns run along
    the first named axis, rows along the second, and cell (i, j) is centered
    at origin + (j + 0.5, i + 0.5) * cell_size.
    """

    plane: str
    origin: tuple
    cell_size: float
    width: int
    height: int
    lift: float = 0.0

    def __post_init__(self):
        if self.plane not in PLANES:
            raise ValueError(f"plane must be one of {PLANES}")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell per axis")
        origin = tuple(float(v) for v in self.origin)
        if len(origin) != 2 or not all(np.isfinite(origin)):
            raise ValueError("origin must be two finite coordinates")
        object.__setattr__(self, "origin", origin)

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    @property
    def bounds(self):
        """(first_min, second_min, first_max, second_max) in meters."""
        return (self.origin[0], self.origin[1],
                self.origin[0] + self.width * self.cell_size,
                self.origin[1] + self.height * self.cell_size)

    def cell_center(self, row, col):
        """Plane coordinates (first, second) of the center of cell (row, col)."""
        return (self.origin[0] + (col + 0.5) * self.cell_size,
                self.origin[1] + (row + 0.5) * self.cell_size)

    def to_cells(self, coords):
        """Plane coordinates -> continuous cell coordinates (col-like, row-like)."""
        coords = np.asarray(coords, dtype=float)
        return (coords - np.asarray(self.origin)) / self.cell_size

    def cell_centers_3d(self):
        """3D positions of all cell centers, row-major, shape (H*W, 3)."""
        first = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        second = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        ff, ss = np.meshgrid(first, second)  # (H, W)
        lift = np.full_like(ff, self.lift)
        if self.plane == "horizontal":
            pts = np.stack([ff, ss, lift], axis=-1)  # (x, y, z=lift)
        else:
            pts = np.stack([lift, ff, ss], axis=-1)  # (x=lift, y, z)
        return pts.reshape(-1, 3)


@dataclass
class Heatmap:
    """Per-frame plane values, shape (T, H, W); complex until magnitudes are taken."""

    grid: PlaneGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise ValueError("heatmap values must be (frames, height, width)")
        t, h, w = self.values.shape
        if t < 1:
            raise ValueError("heatmap needs at least one frame")
        if (h, w) != (self.grid.height, self.grid.width):
            raise ValueError(f"value shape {(h, w)} does not match grid "
                             f"{(self.grid.height, self.grid.width)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("heatmap values must be finite")

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


def beamform_plane(cube, grid, cell_chunk=512):
    """Coherently sum a sample cube onto a plane grid.

    Direct summation over (k, m) per cell; evaluation is chunked over cells
    purely for memory, each cell's sum being independent of the chunking.
    """
    if cube.data.size == 0:
        raise ValueError("empty cube")
    if grid.plane != cube.array.orientation:
        raise ValueError(f"grid plane '{grid.plane}' does not match array "
                         f"orientation '{cube.array.orientation}'")
    k, m, t = cube.data.shape
    cfg = cube.config
    elements = cube.array.element_positions  # (M, 3)
    centers = grid.cell_centers_3d()         # (N, 3)

    # s[k, m, t] flattened so index m*K + k lines up with the steering matrix
    samples = np.transpose(cube.data, (1, 0, 2)).reshape(m * k, t)
    out = np.empty((centers.shape[0], t), dtype=complex)
    freq_step = cfg.bandwidth / (k - 1)
    for lo in range(0, centers.shape[0], cell_chunk):
        chunk = centers[lo:lo + cell_chunk]
        dist = 2.0 * np.linalg.norm(chunk[:, None, :] - elements[None, :, :], axis=2)
        # phase_k = 2 pi d f_k / c with f_k linear in k: fill the k axis by a
        # geometric recurrence instead of one exp per sample
        steer = np.empty(dist.shape + (k,), dtype=complex)
        steer[:, :, 0] = np.exp(1j * (2.0 * np.pi / SPEED_OF_LIGHT) * cfg.start_freq * dist)
        step = np.exp(1j * (2.0 * np.pi / SPEED_OF_LIGHT) * freq_step * dist)
        for ki in range(1, k):
            np.multiply(steer[:, :, ki - 1], step, out=steer[:, :, ki])
        steer = steer.reshape(chunk.shape[0], m * k)
        # one product per frame: identical frames then beamform bit-identically,
        # which a single all-frames product does not guarantee (column-dependent
        # BLAS kernels may reassociate the reduction)
        for ti in range(t):
            out[lo:lo + chunk.shape[0], ti] = steer @ samples[:, ti]
    values = out.T.reshape(t, grid.height, grid.width)
    return Heatmap(grid, values)


def background_subtract(heatmap, lag=1):
    """Frame differencing: output frame t is input[t + lag] - input[t].

    Static reflections cancel exactly; movers survive.  Output is ``lag``
    frames shorter than the input.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if heatmap.frame_count <= lag:
        raise ValueError(f"lag {lag} must be smaller than frame count "
                         f"{heatmap.frame_count}")
    v = heatmap.values
    return Heatmap(heatmap.grid, v[lag:] - v[:-lag])


def magnitude_normalize(heatmap):
    """Per-frame |value| / max, in [0, 1]; all-zero frames stay zero."""
    mag = np.abs(heatmap.values).astype(float)
    peaks = mag.max(axis=(1, 2), keepdims=True)
    return Heatmap(heatmap.grid, mag / np.where(peaks > 0.0, peaks, 1.0))
