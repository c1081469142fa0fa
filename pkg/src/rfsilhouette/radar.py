"""FMCW MIMO radar scene synthesis.

Generates raw chirp-sample cubes s[k, m, t]: frequency sample k of the
sweep, virtual antenna m, frame t.  Each virtual element is treated as
monostatic (transmit and receive collocated), so a point reflector at p
contributes exp(-j 2 pi d_m(p) / lambda_k), with d_m the round-trip
distance to element m, attenuated by two-way free-space spreading 1/d^2
measured from the array center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

ORIENTATIONS = ("horizontal", "vertical")


@dataclass(frozen=True)
class ChirpConfig:
    """Linear FMCW sweep parameters.

    Sample k of a sweep sits at frequency start_freq + bandwidth * k / (K - 1),
    so the per-sample wavelengths decrease monotonically across the sweep.
    """

    start_freq: float
    bandwidth: float
    num_samples: int
    sample_period: float = 1e-6
    frames_per_second: float = 20.0

    def __post_init__(self):
        if self.start_freq <= 0:
            raise ValueError("start_freq must be positive")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.num_samples < 2:
            raise ValueError("need at least 2 sweep samples")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.frames_per_second <= 0:
            raise ValueError("frames_per_second must be positive")

    @property
    def frequencies(self):
        """Per-sample sweep frequencies f_k in Hz, monotone increasing."""
        k = np.arange(self.num_samples)
        return self.start_freq + self.bandwidth * k / (self.num_samples - 1)

    @property
    def wavelengths(self):
        """Per-sample wavelengths lambda_k in meters."""
        return SPEED_OF_LIGHT / self.frequencies


@dataclass(frozen=True)
class VirtualArray:
    """Virtual (tx x rx product) receive array element positions."""

    element_positions: np.ndarray  # (M, 3) meters
    orientation: str = "horizontal"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("element_positions must have shape (M, 3) with M >= 1")
        if not np.all(np.isfinite(pos)):
            raise ValueError("element positions must be finite")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}")
        object.__setattr__(self, "element_positions", pos)

    @property
    def num_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def center(self):
        return self.element_positions.mean(axis=0)

    @classmethod
    def linear(cls, num_elements, spacing, orientation="horizontal",
               center=(0.0, 0.0, 0.0)):
        """Uniform linear array: elements along x when horizontal, z when vertical."""
        offsets = (np.arange(num_elements) - (num_elements - 1) / 2.0) * spacing
        pos = np.tile(np.asarray(center, dtype=float), (num_elements, 1))
        axis = 0 if orientation == "horizontal" else 2
        pos[:, axis] += offsets
        return cls(pos, orientation)


def standard_array(config, orientation="horizontal",
                   center=(0.0, 0.0, 0.0), num_elements=86):
    """Default unambiguous linear array for the sweep center frequency.

    Elements sit a quarter wavelength apart: the round-trip phase doubles
    the effective spatial frequency, so quarter-wavelength physical spacing
    samples the aperture at the usual grating-free half-wavelength steps.
    """
    f_mid = config.start_freq + config.bandwidth / 2.0
    spacing = SPEED_OF_LIGHT / f_mid / 4.0
    return VirtualArray.linear(num_elements, spacing, orientation, center)


@dataclass(frozen=True)
class Scatterer:
    """Point reflector; a stand-in for one patch of a human or clutter."""

    position: np.ndarray  # (3,) meters
    reflectivity: float = 1.0
    is_static: bool = True

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("scatterer position must be finite")
        if not np.isfinite(self.reflectivity) or self.reflectivity < 0:
            raise ValueError("reflectivity must be finite and non-negative")
        object.__setattr__(self, "position", pos)


@dataclass
class RadarFrameCube:
    """Raw sweep samples with shape (K, M, T): sample, antenna, frame."""

    data: np.ndarray
    config: ChirpConfig
    array: VirtualArray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 3:
            raise ValueError("cube data must be 3-dimensional (K, M, T)")
        k, m, t = self.data.shape
        if k != self.config.num_samples:
            raise ValueError(f"cube has {k} samples, config expects {self.config.num_samples}")
        if m != self.array.num_elements:
            raise ValueError(f"cube has {m} antennas, array has {self.array.num_elements}")
        if t < 1:
            raise ValueError("cube needs at least one frame")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("cube samples must be finite")

    @property
    def num_frames(self) -> int:
        return self.data.shape[2]


def round_trip_distance(array, m, point):
    """Path length out to ``point`` and back for virtual element ``m``.

    Transmit and receive are collocated at the element, so this is twice
    the element-to-point distance.
    """
    if not 0 <= m < array.num_elements:
        raise IndexError(f"antenna index {m} out of range for {array.num_elements} elements")
    p = np.asarray(point, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError("point must be finite")
    d = float(np.linalg.norm(array.element_positions[m] - p))
    if d == 0.0:
        raise ValueError("point coincides with an array element")
    return 2.0 * d


def _scatterer_samples(position, reflectivity, elements, array_center, wavelengths):
    """One scatterer's (K, M) contribution to a single frame."""
    d_center = float(np.linalg.norm(position - array_center))
    if d_center == 0.0:
        raise ValueError("scatterer sits at the array center")
    d_m = 2.0 * np.linalg.norm(elements - position[None, :], axis=1)  # (M,)
    if np.any(d_m == 0.0):
        raise ValueError("scatterer coincides with an array element")
    amplitude = reflectivity / d_center**2
    phase = -2.0 * np.pi * np.outer(1.0 / wavelengths, d_m)  # (K, M)
    return amplitude * np.exp(1j * phase)


def synthesize_frame_cube(scene, trajectories, config, array, frames,
                          seed=0, noise_std=0.0, visibility=None):
    """Simulate a raw sample cube from a point-scatterer scene.

    Args:
        scene: sequence of Scatterer.
        trajectories: per-scatterer displacement tracks, aligned with the
            scene; each entry is None (stationary) or an array of shape
            (frames, 3) added to the scatterer's base position per frame.
        config: ChirpConfig of the sweep.
        array: VirtualArray receiving the reflections.
        frames: number of frames T to simulate.
        seed: RNG seed for the additive noise.
        noise_std: standard deviation of the circularly symmetric complex
            Gaussian noise per sample (E|n|^2 = noise_std^2); 0 disables it.
        visibility: optional per-scatterer boolean masks of shape (frames,);
            False drops that scatterer's return for the frame (mirror-like
            reflections hiding body parts).  Default: fully visible.

    Deterministic for a fixed (scene, config, seed): scatterer contributions
    are accumulated in scene order, then noise is added.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    scene = list(scene)
    n = len(scene)
    if trajectories is None:
        trajectories = [None] * n
    trajectories = list(trajectories)
    if len(trajectories) != n:
        raise ValueError("trajectories must align with the scene")
    if visibility is None:
        visibility = [None] * n
    visibility = list(visibility)
    if len(visibility) != n:
        raise ValueError("visibility masks must align with the scene")

    checked_traj = []
    for scat, traj in zip(scene, trajectories):
        if traj is None:
            checked_traj.append(None)
            continue
        traj = np.asarray(traj, dtype=float)
        if traj.shape != (frames, 3):
            raise ValueError(f"trajectory shape {traj.shape} does not match {frames} frames")
        if scat.is_static and np.any(traj != 0.0):
            raise ValueError("static scatterer cannot have a nonzero trajectory")
        checked_traj.append(traj)
    checked_vis = []
    for vis in visibility:
        if vis is None:
            checked_vis.append(None)
            continue
        vis = np.asarray(vis, dtype=bool).reshape(frames)
        checked_vis.append(vis)

    k, m = config.num_samples, array.num_elements
    lam = config.wavelengths
    elements = array.element_positions
    center = array.center
    data = np.zeros((k, m, frames), dtype=complex)

    for scat, traj, vis in zip(scene, checked_traj, checked_vis):
        if traj is None or scat.is_static:
            contrib = _scatterer_samples(scat.position, scat.reflectivity,
                                         elements, center, lam)
            for t in range(frames):
                if vis is None or vis[t]:
                    data[:, :, t] += contrib
        else:
            for t in range(frames):
                if vis is not None and not vis[t]:
                    continue
                data[:, :, t] += _scatterer_samples(scat.position + traj[t],
                                                    scat.reflectivity,
                                                    elements, center, lam)

    if noise_std > 0.0:
        rng = np.random.default_rng(seed)
        scale = noise_std / np.sqrt(2.0)
        data = data + scale * (rng.standard_normal((k, m, frames))
                               + 1j * rng.standard_normal((k, m, frames)))
    return RadarFrameCube(data, config, array)
