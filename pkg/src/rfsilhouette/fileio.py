"""On-disk formats, run-length mask coding, and sensor stream alignment.

Binary formats are little-endian with magic numbers:

Radar cube ("RFC1"):  magic, u32 K, M, T, f64 start_freq, bandwidth,
    sample_period, frames_per_second, then K*M*T interleaved (re, im)
    float32 samples with k fastest and t slowest.

Heatmap ("RFH1"):  magic, u32 W, H, T, u8 plane (0 horizontal, 1 vertical),
    u8 dtype (0 real, 1 complex), f64 origin_first, origin_second,
    cell_size, lift, then float32 values row-major within a frame, frames
    consecutive; complex data is (re, im) interleaved.

Fusion weights:  one JSON header line {"layers", "heads", "dim"} then raw
    float32 matrices per layer in order wq, bq, wk, bk, wv, bv, wo, bo.

JSON formats (scenes, calibration, detections, ground truth, keypoints,
masks) are documented in the README.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .beamform import Heatmap, PlaneGrid
from .fusion import AttentionWeights, LayerWeights
from .geometry import CameraModel
from .metrics import EvalRecord
from .radar import ChirpConfig, Scatterer

CUBE_MAGIC = b"RFC1"
HEATMAP_MAGIC = b"RFH1"
_PLANE_TAGS = {"horizontal": 0, "vertical": 1}
_PLANE_NAMES = {v: k for k, v in _PLANE_TAGS.items()}


def write_json(path, obj):
    """Deterministic JSON dump: sorted keys, fixed layout."""
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- radar cube

def write_cube(path, cube):
    """Serialize a RadarFrameCube (geometry is not stored, only the sweep)."""
    k, m, t = cube.data.shape
    cfg = cube.config
    header = CUBE_MAGIC + struct.pack("<3I", k, m, t)
    header += struct.pack("<4d", cfg.start_freq, cfg.bandwidth,
                          cfg.sample_period, cfg.frames_per_second)
    ordered = np.transpose(cube.data, (2, 1, 0))  # (T, M, K): k fastest on disk
    interleaved = np.empty(ordered.shape + (2,), dtype="<f4")
    interleaved[..., 0] = ordered.real
    interleaved[..., 1] = ordered.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def read_cube(path):
    """Read a cube file; returns (ChirpConfig, data of shape (K, M, T))."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CUBE_MAGIC:
            raise ValueError(f"not a radar cube file (magic {magic!r})")
        k, m, t = struct.unpack("<3I", fh.read(12))
        start_freq, bandwidth, sample_period, fps = struct.unpack("<4d", fh.read(32))
        payload = np.frombuffer(fh.read(), dtype="<f4")
    if payload.size != k * m * t * 2:
        raise ValueError("cube payload size does not match header")
    interleaved = payload.reshape(t, m, k, 2)
    data = (interleaved[..., 0] + 1j * interleaved[..., 1]).astype(complex)
    config = ChirpConfig(start_freq, bandwidth, k, sample_period, fps)
    return config, np.transpose(data, (2, 1, 0))


# ------------------------------------------------------------------ heatmaps

def write_heatmap(path, heatmap):
    grid = heatmap.grid
    t = heatmap.frame_count
    dtype_tag = 1 if heatmap.is_complex else 0
    header = HEATMAP_MAGIC + struct.pack("<3I", grid.width, grid.height, t)
    header += struct.pack("<2B", _PLANE_TAGS[grid.plane], dtype_tag)
    header += struct.pack("<4d", grid.origin[0], grid.origin[1],
                          grid.cell_size, grid.lift)
    if dtype_tag:
        payload = np.empty(heatmap.values.shape + (2,), dtype="<f4")
        payload[..., 0] = heatmap.values.real
        payload[..., 1] = heatmap.values.imag
    else:
        payload = np.asarray(heatmap.values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_heatmap(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != HEATMAP_MAGIC:
            raise ValueError(f"not a heatmap file (magic {magic!r})")
        w, h, t = struct.unpack("<3I", fh.read(12))
        plane_tag, dtype_tag = struct.unpack("<2B", fh.read(2))
        origin_f, origin_s, cell_size, lift = struct.unpack("<4d", fh.read(32))
        payload = np.frombuffer(fh.read(), dtype="<f4")
    if plane_tag not in _PLANE_NAMES:
        raise ValueError(f"unknown plane tag {plane_tag}")
    grid = PlaneGrid(_PLANE_NAMES[plane_tag], (origin_f, origin_s), cell_size,
                     w, h, lift)
    expected = w * h * t * (2 if dtype_tag else 1)
    if payload.size != expected:
        raise ValueError("heatmap payload size does not match header")
    if dtype_tag:
        raw = payload.reshape(t, h, w, 2)
        values = (raw[..., 0] + 1j * raw[..., 1]).astype(complex)
    else:
        values = payload.reshape(t, h, w).astype(float)
    return Heatmap(grid, values)


# -------------------------------------------------------------------- scenes

def save_scene(path, scatterers, trajectories=None, visibility=None):
    n = len(scatterers)
    trajectories = trajectories or [None] * n
    visibility = visibility or [None] * n
    rows = []
    for scat, traj, vis in zip(scatterers, trajectories, visibility):
        row = {
            "position": [float(v) for v in scat.position],
            "reflectivity": float(scat.reflectivity),
            "static": bool(scat.is_static),
        }
        if traj is not None:
            row["trajectory"] = np.asarray(traj, dtype=float).tolist()
        if vis is not None:
            row["visibility"] = [bool(v) for v in np.asarray(vis).reshape(-1)]
        rows.append(row)
    write_json(path, rows)


def load_scene(source):
    """Scene JSON (path or parsed list) -> (scatterers, trajectories, visibility)."""
    rows = read_json(source) if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__") else source
    if not isinstance(rows, list):
        raise ValueError("scene must be a JSON list of scatterers")
    scatterers, trajectories, visibility = [], [], []
    for row in rows:
        scatterers.append(Scatterer(row["position"],
                                    float(row.get("reflectivity", 1.0)),
                                    bool(row.get("static", True))))
        traj = row.get("trajectory")
        trajectories.append(None if traj is None else np.asarray(traj, dtype=float))
        vis = row.get("visibility")
        visibility.append(None if vis is None else np.asarray(vis, dtype=bool))
    return scatterers, trajectories, visibility


# ------------------------------------------------------------------- cameras

def save_cameras(path, cameras):
    write_json(path, [cam.matrix.tolist() for cam in cameras])


def load_cameras(path):
    rows = read_json(path)
    return [CameraModel(np.asarray(m, dtype=float).reshape(3, 4)) for m in rows]


# ------------------------------------------------------- detections / truth

def save_detections(path, per_frame):
    """``per_frame``: mapping or list of (frame, detections) pairs."""
    items = per_frame.items() if isinstance(per_frame, dict) else per_frame
    rows = []
    for frame, dets in items:
        for det in dets:
            rows.append({
                "frame": int(frame),
                "box_m": [float(v) for v in det.box_m],
                "box_cells": [float(v) for v in det.box_cells],
                "score": float(det.score),
                "category": det.label,
            })
    write_json(path, rows)


def load_detections(path):
    rows = read_json(path)
    if not isinstance(rows, list):
        raise ValueError("detections file must be a JSON list")
    return rows


def save_gt_boxes(path, per_frame):
    items = per_frame.items() if isinstance(per_frame, dict) else per_frame
    rows = []
    for frame, boxes in items:
        for box in boxes:
            rows.append({"frame": int(frame),
                         "box_m": [float(v) for v in np.asarray(box).reshape(4)],
                         "category": "human"})
    write_json(path, rows)


def eval_records_from_rows(pred_rows, gt_rows, box_key="box_m"):
    """Build per-frame EvalRecords from detection and ground-truth JSON rows."""
    frames = sorted({int(r["frame"]) for r in pred_rows}
                    | {int(r["frame"]) for r in gt_rows})
    records = []
    for frame in frames:
        dets = [(r[box_key], float(r["score"]))
                for r in pred_rows if int(r["frame"]) == frame]
        gts = [r[box_key] for r in gt_rows if int(r["frame"]) == frame]
        records.append(EvalRecord(frame, dets, gts))
    return records


# ----------------------------------------------------------- fusion weights

_WEIGHT_FIELDS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


def save_weights(path, weights):
    header = json.dumps({"layers": weights.num_layers, "heads": weights.num_heads,
                         "dim": weights.model_dim}, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        for layer in weights.layers:
            for name in _WEIGHT_FIELDS:
                fh.write(np.asarray(getattr(layer, name), dtype="<f4").tobytes())


def load_weights(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = np.frombuffer(fh.read(), dtype="<f4").astype(float)
    dim = int(header["dim"])
    num_layers = int(header["layers"])
    per_layer = 4 * (dim * dim + dim)
    if payload.size != num_layers * per_layer:
        raise ValueError("weights payload size does not match header")
    layers = []
    pos = 0
    for _ in range(num_layers):
        mats = {}
        for name in _WEIGHT_FIELDS:
            count = dim * dim if name.startswith("w") else dim
            block = payload[pos:pos + count]
            mats[name] = block.reshape(dim, dim) if name.startswith("w") else block
            pos += count
        layers.append(LayerWeights(**mats))
    return AttentionWeights(layers, int(header["heads"]), dim)


# --------------------------------------------------------------- mask coding

def rle_encode(mask):
    """Column-major run lengths of a binary mask, starting with the zero run.

    The first count is the number of leading zeros (possibly 0), runs then
    alternate ones/zeros.  decode(encode(m), m.shape) == m.
    """
    mask = np.asarray(mask)
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError("mask must be binary")
    flat = mask.astype(np.uint8).flatten(order="F")
    counts = []
    current = 0
    run = 0
    for v in flat:
        if v == current:
            run += 1
        else:
            counts.append(run)
            current = v
            run = 1
    counts.append(run)
    return counts


def rle_decode(counts, shape):
    """Inverse of rle_encode; raises on malformed run lengths."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("run lengths must be non-negative")
    h, w = shape
    total = sum(counts)
    if total != h * w:
        raise ValueError(f"run lengths cover {total} cells, mask has {h * w}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        flat[pos:pos + c] = value
        pos += c
        value = not value
    return flat.reshape((h, w), order="F")


def rle_to_string(counts):
    return " ".join(str(c) for c in counts)


def rle_from_string(text):
    return [int(tok) for tok in text.split()]


def save_masks(path, per_frame_masks):
    """Per-frame binary masks -> JSON rows with RLE counts."""
    rows = []
    for frame, mask in per_frame_masks:
        mask = np.asarray(mask)
        rows.append({"frame": int(frame), "size": list(mask.shape),
                     "counts": rle_encode(mask)})
    write_json(path, rows)


def load_masks(path):
    rows = read_json(path)
    return [(int(r["frame"]), rle_decode(r["counts"], tuple(r["size"])))
            for r in rows]


# ------------------------------------------------------------ stream pairing

@dataclass
class FrameIndexPair:
    """A camera frame paired with its nearest radar frame."""

    camera_index: int
    camera_ts: float
    radar_index: int
    radar_ts: float
    residual: float


def align_streams(camera_ts, radar_ts, max_residual=0.05):
    """Pair every camera frame with the nearest radar frame by timestamp.

    Both timestamp lists must be sorted ascending.  Pairs whose residual
    exceeds ``max_residual`` seconds are dropped; between two equidistant
    radar frames the earlier one wins.
    """
    cam = np.asarray(camera_ts, dtype=float)
    rad = np.asarray(radar_ts, dtype=float)
    if cam.size == 0 or rad.size == 0:
        raise ValueError("both streams must be non-empty")
    if np.any(np.diff(cam) < 0) or np.any(np.diff(rad) < 0):
        raise ValueError("timestamp lists must be sorted ascending")
    pairs = []
    insert = np.searchsorted(rad, cam)
    for i, t in enumerate(cam):
        lo = max(insert[i] - 1, 0)
        hi = min(insert[i], rad.size - 1)
        best = lo if abs(rad[lo] - t) <= abs(rad[hi] - t) else hi
        residual = abs(rad[best] - t)
        if residual <= max_residual:
            pairs.append(FrameIndexPair(i, float(t), int(best), float(rad[best]),
                                        float(residual)))
    return pairs
