"""Coordinate transforms: imaging-plane projection, multi-view triangulation,
keypoint clustering, and mask pasting.

Box convention throughout the package: a 2D box is [x1, y1, x2, y2] with
x1 <= x2 and y1 <= y2, in whatever units the caller is working in (meters,
grid cells, or pixels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interp import bilinear_sample

PROJECTION_EPS = 1e-9


@dataclass(frozen=True)
class ResultPlane:
    """Virtual imaging plane at depth r, pin-hole style.

    A point (a, b, depth) projects to (r*a/depth + p_x, r*b/depth + p_y)
    in plane meters; ``pixel_scale`` and ``image_size`` place that onto a
    pixel canvas with the optical axis at the image center.
    """

    r: float
    p_x: float = 0.0
    p_y: float = 0.0
    pixel_scale: float = 1.0
    image_size: tuple = (256, 256)

    def __post_init__(self):
        if self.r == 0:
            raise ValueError("plane depth r must be nonzero")
        if self.pixel_scale <= 0:
            raise ValueError("pixel_scale must be positive")
        size = tuple(int(v) for v in self.image_size)
        if len(size) != 2 or size[0] < 1 or size[1] < 1:
            raise ValueError("image_size must be (width, height) with positive entries")
        object.__setattr__(self, "image_size", size)

    def to_pixels(self, xy):
        """Plane meters -> pixel coordinates (origin at image center)."""
        xy = np.asarray(xy, dtype=float)
        half = np.asarray(self.image_size, dtype=float) / 2.0
        return xy * self.pixel_scale + half


def project_point(plane, point):
    """Perspective projection of a 3D point onto the result plane.

    The third coordinate is the depth along the projection axis and must be
    positive (in front of the center).
    """
    p = np.asarray(point, dtype=float).reshape(3)
    z = p[2]
    if z <= PROJECTION_EPS:
        raise ValueError(f"point depth {z} is behind or at the projection center")
    return np.array([plane.r * p[0] / z + plane.p_x,
                     plane.r * p[1] / z + plane.p_y])


@dataclass(frozen=True)
class Box3D:
    """Axis-aligned 3D box given by its min and max corners."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(3)
        hi = np.asarray(self.max_corner, dtype=float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box corners must be finite")
        if np.any(lo > hi):
            raise ValueError("min corner must not exceed max corner")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    def vertices(self):
        """All 8 corners, shape (8, 3)."""
        lo, hi = self.min_corner, self.max_corner
        pts = [(x, y, z) for x in (lo[0], hi[0])
               for y in (lo[1], hi[1])
               for z in (lo[2], hi[2])]
        return np.asarray(pts)


def project_box3d(plane, box):
    """Axis-aligned hull of the 8 projected box vertices, [x1, y1, x2, y2]."""
    projected = np.array([project_point(plane, v) for v in box.vertices()])
    lo = projected.min(axis=0)
    hi = projected.max(axis=0)
    return np.array([lo[0], lo[1], hi[0], hi[1]])


def room_to_camera(point):
    """Room coordinates (x lateral, y depth, z height) -> projection frame.

    The imaging plane is perpendicular to both radar planes, looking along
    the room's y axis, so depth goes last: (x, y, z) -> (x, z, y).
    """
    p = np.asarray(point, dtype=float).reshape(3)
    return np.array([p[0], p[2], p[1]])


@dataclass(frozen=True)
class CameraModel:
    """Projective camera given by its 3x4 matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 4):
            raise ValueError("camera matrix must be 3x4")
        if not np.all(np.isfinite(m)):
            raise ValueError("camera matrix must be finite")
        if abs(np.linalg.det(m[:, :3])) < 1e-12:
            raise ValueError("camera matrix has a singular 3x3 block")
        object.__setattr__(self, "matrix", m)

    def project(self, point):
        """3D point -> 2D image coordinates via homogeneous projection."""
        p = np.asarray(point, dtype=float).reshape(3)
        q = self.matrix[:, :3] @ p + self.matrix[:, 3]
        if abs(q[2]) < PROJECTION_EPS:
            raise ValueError("point projects to infinity for this camera")
        return q[:2] / q[2]


@dataclass
class Keypoint2D:
    """Image observation of a joint."""

    xy: np.ndarray
    joint: int = 0
    person: int | None = None
    camera: int | None = None

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=float).reshape(2)
        if not np.all(np.isfinite(xy)):
            raise ValueError("keypoint coordinates must be finite")
        self.xy = xy


@dataclass
class Keypoint3D:
    """Triangulated joint position in meters."""

    xyz: np.ndarray
    joint: int = 0
    person: int | None = None

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=float).reshape(3)
        if not np.all(np.isfinite(xyz)):
            raise ValueError("keypoint coordinates must be finite")
        self.xyz = xyz


def _reprojection_refine(x, observations, max_iterations, step_tol):
    """Gauss-Newton on the reprojection residuals, starting from the DLT point."""
    x = np.asarray(x, dtype=float).copy()
    for _ in range(max_iterations):
        residuals = []
        jacobian = []
        for cam, kp in observations:
            m = cam.matrix
            q = m[:, :3] @ x + m[:, 3]
            w = q[2]
            if abs(w) < PROJECTION_EPS:
                return x  # stepped out of the valid region; keep the last iterate
            residuals.append(q[0] / w - kp[0])
            residuals.append(q[1] / w - kp[1])
            jacobian.append((m[0, :3] * w - q[0] * m[2, :3]) / w**2)
            jacobian.append((m[1, :3] * w - q[1] * m[2, :3]) / w**2)
        step, *_ = np.linalg.lstsq(np.asarray(jacobian), -np.asarray(residuals),
                                   rcond=None)
        x = x + step
        if np.linalg.norm(step) < step_tol:
            break
    return x


def triangulate(observations, refine=True, max_iterations=10, step_tol=1e-10):
    """Recover a 3D point from >= 2 camera observations.

    Solves the stacked linear constraints (two per view) by SVD, then
    polishes the reprojection error with a few Gauss-Newton steps.

    Args:
        observations: sequence of (CameraModel, (u, v)) pairs.

    Raises:
        ValueError: fewer than two views, or the constraint system does not
            pin down a finite point (duplicate cameras, parallel rays).
    """
    obs = [(cam, np.asarray(kp, dtype=float).reshape(2)) for cam, kp in observations]
    if len(obs) < 2:
        raise ValueError("triangulation needs at least two views")
    rows = []
    for cam, kp in obs:
        m = cam.matrix
        rows.append(kp[0] * m[2] - m[0])
        rows.append(kp[1] * m[2] - m[1])
    a = np.asarray(rows)
    _, s, vt = np.linalg.svd(a)
    if s[-2] <= 1e-9 * s[0]:
        raise ValueError("degenerate triangulation system (duplicate or parallel views)")
    x_h = vt[-1]
    if abs(x_h[3]) < 1e-12 * np.linalg.norm(x_h[:3]):
        raise ValueError("triangulated point lies at infinity")
    x = x_h[:3] / x_h[3]
    if refine:
        x = _reprojection_refine(x, obs, max_iterations, step_tol)
    return x


def reprojection_rms(point, observations):
    """Root-mean-square reprojection error of a 3D point over all views."""
    errs = []
    for cam, kp in observations:
        proj = cam.project(point)
        errs.append(np.sum((proj - np.asarray(kp, dtype=float))**2))
    return float(np.sqrt(np.mean(errs)))


@dataclass
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list


def cluster_keypoints(points, num_clusters, seed=0, max_iterations=100):
    """Group 3D keypoints into persons with Lloyd's algorithm.

    Initialization is deterministic farthest-point seeding: the seeded RNG
    picks the first center, each further center is the point farthest from
    the chosen set.  Iterates to an assignment fixpoint or 100 rounds.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[0]
    if num_clusters < 1:
        raise ValueError("need at least one cluster")
    if n < num_clusters:
        raise ValueError(f"cannot split {n} points into {num_clusters} clusters")

    rng = np.random.default_rng(seed)
    centers = [pts[int(rng.integers(n))]]
    for _ in range(num_clusters - 1):
        d2 = np.min(((pts[:, None, :] - np.asarray(centers)[None, :, :])**2).sum(-1),
                    axis=1)
        centers.append(pts[int(np.argmax(d2))])
    centroids = np.asarray(centers, dtype=float)

    labels = None
    history = []
    for _ in range(max_iterations):
        d2 = ((pts[:, None, :] - centroids[None, :, :])**2).sum(-1)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(num_clusters):
            members = pts[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return ClusterResult(labels, centroids, history)


def paste_mask(mask, box, canvas):
    """Resize a probability mask into a box on a canvas and OR it in.

    The mask is bilinearly stretched to the box extent, thresholded at 0.5,
    and written onto the canvas (existing content is kept); parts of the box
    outside the canvas are clipped.  ``canvas`` is either a boolean array
    (copied, not mutated) or an (height, width) tuple for a fresh one.

    Pixels belong to the box when their centers fall inside it.
    """
    mask = np.asarray(mask, dtype=float)
    if mask.ndim != 2 or min(mask.shape) < 1:
        raise ValueError("mask must be a 2D grid")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not (x2 > x1 and y2 > y1):
        raise ValueError("empty box")
    if isinstance(canvas, tuple):
        out = np.zeros(canvas, dtype=bool)
    else:
        out = np.asarray(canvas, dtype=bool).copy()
    height, width = out.shape

    col_lo = max(int(np.ceil(x1 - 0.5)), 0)
    col_hi = min(int(np.floor(x2 - 0.5)), width - 1)
    row_lo = max(int(np.ceil(y1 - 0.5)), 0)
    row_hi = min(int(np.floor(y2 - 0.5)), height - 1)
    if col_lo > col_hi or row_lo > row_hi:
        return out  # box entirely off the canvas

    mh, mw = mask.shape
    cols = np.arange(col_lo, col_hi + 1)
    rows = np.arange(row_lo, row_hi + 1)
    u = ((cols + 0.5) - x1) / (x2 - x1) * mw - 0.5
    v = ((rows + 0.5) - y1) / (y2 - y1) * mh - 0.5
    uu, vv = np.meshgrid(u, v)
    values = bilinear_sample(mask, uu, vv)
    out[row_lo:row_hi + 1, col_lo:col_hi + 1] |= values >= 0.5
    return out


def box_iou(a, b):
    """Intersection over union of two [x1, y1, x2, y2] boxes."""
    ax1, ay1, ax2, ay2 = (float(v) for v in a)
    bx1, by1, bx2, by2 = (float(v) for v in b)
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    area_a = max(0.0, ax2 - ax1) * max(0.0, ay2 - ay1)
    area_b = max(0.0, bx2 - bx1) * max(0.0, by2 - by1)
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0
