"""End-to-end pipeline driver.

Runs simulate -> beamform (horizontal + vertical) -> background subtract ->
CFAR detect -> vertical boxes -> RoI crop -> attention fusion -> mask paste
-> evaluate, from a single declarative JSON config, writing every
intermediate artifact plus a metrics report.  Deterministic per
(config, seed): re-runs produce byte-identical outputs.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import fileio
from .beamform import PlaneGrid, background_subtract, beamform_plane, magnitude_normalize
from .detect import box3d_from_planes, cfar_detect, nms, roi_crop, vertical_box_from_horizontal
from .fusion import AttentionWeights, FeatureBlock, fuse, mask_probabilities
from .geometry import Box3D, ResultPlane, paste_mask, project_box3d, room_to_camera
from .metrics import EvalRecord, average_precision, mask_iou, pr_curves_to_csv
from .radar import ChirpConfig, standard_array, synthesize_frame_cube

OUTPUT_DIR_ENV = "RFSILHOUETTE_OUT_DIR"
FAIL_MARKER = "FAILED"


class ConfigError(ValueError):
    """Raised when a pipeline config is structurally invalid."""


DEFAULTS = {
    "seed": 0,
    "frames": 24,
    "noise_std": 0.0,
    "subtract_lag": 1,
    "radar": {
        "start_freq_horizontal": 77.0e9,
        "start_freq_vertical": 79.0e9,
        "bandwidth": 1.23e9,
        "num_samples": 64,
        "sample_period": 1e-6,
        "frames_per_second": 20.0,
        "num_elements": 86,
        "mount_height": 1.0,
        "vertical_offset": 0.0,
    },
    "grids": {
        "horizontal": {"origin": [-2.0, 0.0], "cell_size": 0.05,
                       "width": 80, "height": 80},
        "vertical": {"origin": [0.0, 0.0], "cell_size": 0.05,
                     "width": 80, "height": 50},
    },
    "detector": {
        "guard": 2,
        "train": 4,
        "threshold_factor": 3.0,
        "min_value": 0.3,
        "box_extent": 0.6,
        "height_range": [0.0, 2.0],
        "nms_iou": 0.5,
        "roi_size": 8,
    },
    "fusion": {"layers": 4, "heads": 4, "weights_seed": 0, "weights_file": None},
    "mask": {"resolution": 28},
    "result_plane": {"r": 1.0, "p_x": 0.0, "p_y": 0.0, "pixel_scale": 60.0,
                     "image_size": [200, 160]},
}


def resolve_output_path(path):
    """Relative paths land under $RFSILHOUETTE_OUT_DIR when it is set."""
    path = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _merge_defaults(defaults, overrides, errors, prefix=""):
    merged = {}
    for key, default in defaults.items():
        value = overrides.get(key, default)
        if isinstance(default, dict):
            if not isinstance(value, dict):
                errors.append(f"{prefix}{key} must be a mapping")
                value = {}
            merged[key] = _merge_defaults(default, value, errors, f"{prefix}{key}.")
        else:
            merged[key] = value
    for key in overrides:
        if key not in defaults:
            errors.append(f"unknown key {prefix}{key}")
    return merged


def load_config(source):
    """Parse + validate a pipeline config (path or dict); fill defaults.

    Raises ConfigError listing every problem found; performs no writes.
    """
    if isinstance(source, dict):
        raw = dict(source)
    else:
        try:
            raw = fileio.read_json(source)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    errors = []
    scene = raw.pop("scene", None)
    output_dir = raw.pop("output_dir", None)
    cfg = _merge_defaults(DEFAULTS, raw, errors)
    cfg["scene"] = scene
    cfg["output_dir"] = output_dir

    if scene is None:
        errors.append("missing scene (inline list or path to a scene JSON)")
    if output_dir is None:
        errors.append("missing output_dir")
    if not isinstance(cfg["frames"], int) or cfg["frames"] < 2:
        errors.append("frames must be an integer >= 2")
    if not isinstance(cfg["seed"], int):
        errors.append("seed must be an integer")
    lag = cfg["subtract_lag"]
    if not isinstance(lag, int) or lag < 1:
        errors.append("subtract_lag must be an integer >= 1")
    elif isinstance(cfg["frames"], int) and cfg["frames"] <= lag:
        errors.append("frames must exceed subtract_lag")
    det = cfg["detector"]
    if det["threshold_factor"] < 1.0:
        errors.append("detector.threshold_factor must be >= 1")
    hr = det["height_range"]
    if not (isinstance(hr, (list, tuple)) and len(hr) == 2 and hr[0] < hr[1]):
        errors.append("detector.height_range must be [z_min, z_max] with z_min < z_max")
    roi = det["roi_size"]
    heads = cfg["fusion"]["heads"]
    if not isinstance(roi, int) or roi < 1:
        errors.append("detector.roi_size must be a positive integer")
    elif roi % heads != 0:
        errors.append(f"detector.roi_size ({roi}) must be divisible by "
                      f"fusion.heads ({heads}) for the flattened feature dim")
    for name, grid in cfg["grids"].items():
        if grid["cell_size"] <= 0 or grid["width"] < 1 or grid["height"] < 1:
            errors.append(f"grids.{name} must have positive cell_size and size")
    if errors:
        raise ConfigError("invalid config: " + "; ".join(errors))

    if not isinstance(scene, list):
        try:
            fileio.read_json(scene)
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigError(f"cannot read scene file {scene!r}: {exc}") from exc
    return cfg


def _build_grids(cfg):
    radar = cfg["radar"]
    g = cfg["grids"]["horizontal"]
    hor = PlaneGrid("horizontal", tuple(g["origin"]), g["cell_size"],
                    g["width"], g["height"], lift=radar["mount_height"])
    g = cfg["grids"]["vertical"]
    ver = PlaneGrid("vertical", tuple(g["origin"]), g["cell_size"],
                    g["width"], g["height"], lift=radar["vertical_offset"])
    return hor, ver


def _simulate(cfg, scene, trajectories, visibility):
    radar = cfg["radar"]
    frames = cfg["frames"]
    configs = {}
    cubes = {}
    for plane, start_key, center in (
            ("horizontal", "start_freq_horizontal",
             (0.0, 0.0, radar["mount_height"])),
            ("vertical", "start_freq_vertical",
             (radar["vertical_offset"], 0.0, radar["mount_height"]))):
        chirp = ChirpConfig(radar[start_key], radar["bandwidth"],
                            radar["num_samples"], radar["sample_period"],
                            radar["frames_per_second"])
        array = standard_array(chirp, plane, center, radar["num_elements"])
        cubes[plane] = synthesize_frame_cube(scene, trajectories, chirp, array,
                                             frames, seed=cfg["seed"],
                                             noise_std=cfg["noise_std"],
                                             visibility=visibility)
        configs[plane] = chirp
    return cubes


def _moving_positions(scene, trajectories, frames):
    """Per-frame positions of the non-static scatterers (the ground truth)."""
    tracks = []
    for scat, traj in zip(scene, trajectories):
        if scat.is_static:
            continue
        offsets = np.zeros((frames, 3)) if traj is None else np.asarray(traj, float)
        tracks.append(scat.position[None, :] + offsets)
    return tracks


def _gt_boxes_for_frame(tracks, frame, box_extent):
    half = box_extent / 2.0
    boxes = []
    for track in tracks:
        x, y, _ = track[frame]
        boxes.append(np.array([x - half, y - half, x + half, y + half]))
    return boxes


def run_pipeline(config_source, output_dir=None):
    """Execute the full pipeline; returns the report dict.

    The config is validated before anything is written.  If a stage fails
    after writes started, a FAILED marker with the diagnostic is left in the
    output directory and the exception propagates.
    """
    cfg = load_config(config_source)
    out = resolve_output_path(output_dir or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = _execute(cfg, out)
    except Exception as exc:
        (out / FAIL_MARKER).write_text(f"pipeline failed: {exc}\n")
        raise
    marker = out / FAIL_MARKER
    if marker.exists():
        marker.unlink()
    return report


def _execute(cfg, out):
    scene, trajectories, visibility = fileio.load_scene(cfg["scene"])
    frames = cfg["frames"]
    lag = cfg["subtract_lag"]
    det_cfg = cfg["detector"]
    hor_grid, ver_grid = _build_grids(cfg)

    # simulate + persist raw cubes
    cubes = _simulate(cfg, scene, trajectories, visibility)
    fileio.write_cube(out / "cube_horizontal.rfc", cubes["horizontal"])
    fileio.write_cube(out / "cube_vertical.rfc", cubes["vertical"])

    # beamform, background-subtract, persist the differenced heatmaps
    heat = {"horizontal": beamform_plane(cubes["horizontal"], hor_grid),
            "vertical": beamform_plane(cubes["vertical"], ver_grid)}
    diff = {plane: background_subtract(h, lag) for plane, h in heat.items()}
    fileio.write_heatmap(out / "heatmap_horizontal.rfh", diff["horizontal"])
    fileio.write_heatmap(out / "heatmap_vertical.rfh", diff["vertical"])
    norm = {plane: magnitude_normalize(h) for plane, h in diff.items()}

    # detection on the horizontal plane, vertical boxes from the height band
    tracks = _moving_positions(scene, trajectories, frames)
    weights = _load_fusion_weights(cfg, det_cfg["roi_size"])
    plane_cfg = cfg["result_plane"]
    result_plane = ResultPlane(plane_cfg["r"], plane_cfg["p_x"], plane_cfg["p_y"],
                               plane_cfg["pixel_scale"],
                               tuple(plane_cfg["image_size"]))
    canvas_shape = (result_plane.image_size[1], result_plane.image_size[0])
    height_range = tuple(det_cfg["height_range"])

    detections_per_frame = {}
    masks_per_frame = []
    records = []
    containment = []
    mask_ious = []
    for f in range(diff["horizontal"].frame_count):
        dets = cfar_detect(norm["horizontal"], frame=f, guard=det_cfg["guard"],
                           train=det_cfg["train"],
                           threshold_factor=det_cfg["threshold_factor"],
                           box_extent=det_cfg["box_extent"],
                           min_value=det_cfg["min_value"])
        dets = nms(dets, det_cfg["nms_iou"])
        detections_per_frame[f] = dets

        cube_frame = f + lag  # differenced frame f compares cube frames f and f+lag
        gt_boxes = _gt_boxes_for_frame(tracks, cube_frame, det_cfg["box_extent"])
        records.append(EvalRecord(f, [(d.box_m, d.score) for d in dets], gt_boxes))
        if tracks:
            x, y, _ = tracks[0][cube_frame]
            containment.append(any(d.box_m[0] <= x <= d.box_m[2]
                                   and d.box_m[1] <= y <= d.box_m[3]
                                   for d in dets))

        canvas = np.zeros(canvas_shape, dtype=bool)
        for det in dets:
            canvas = _mask_for_detection(det, f, norm, hor_grid, ver_grid,
                                         det_cfg, weights, cfg, result_plane,
                                         height_range, canvas)
        masks_per_frame.append((f, canvas))
        if gt_boxes:
            truth = np.zeros(canvas_shape, dtype=bool)
            for gt in gt_boxes:
                truth = _paste_box(gt, height_range, result_plane, truth)
            mask_ious.append(mask_iou(canvas.astype(np.uint8),
                                      truth.astype(np.uint8)))

    fileio.save_detections(out / "detections.json", detections_per_frame)
    fileio.save_masks(out / "masks.json", masks_per_frame)
    gt_per_frame = {f: rec.gt_boxes for f, rec in enumerate(records)}
    fileio.save_gt_boxes(out / "ground_truth.json", gt_per_frame)

    detection_metrics = average_precision(records)
    pr_curves_to_csv(detection_metrics, out / "pr_curves.csv")
    report = {
        "frames_evaluated": len(records),
        "detection_metrics": detection_metrics,
        "containment_fraction": (float(np.mean(containment))
                                 if containment else 0.0),
        "mean_mask_iou": float(np.mean(mask_ious)) if mask_ious else 0.0,
        "mask_iou_per_frame": [float(v) for v in mask_ious],
        "num_moving_targets": len(tracks),
    }
    fileio.write_json(out / "report.json", report)
    return report


def _load_fusion_weights(cfg, roi_size):
    fus = cfg["fusion"]
    if fus.get("weights_file"):
        return fileio.load_weights(fus["weights_file"])
    # RoI features are single-channel, so the flattened token dim is roi_size
    return AttentionWeights.random(roi_size, fus["heads"], fus["layers"],
                                   seed=fus["weights_seed"])


def _mask_for_detection(det, frame, norm, hor_grid, ver_grid, det_cfg, weights,
                        cfg, result_plane, height_range, canvas):
    roi = det_cfg["roi_size"]
    vbox_m = vertical_box_from_horizontal(det.box_m, height_range)
    vbox_cells = np.concatenate([ver_grid.to_cells(vbox_m[:2]),
                                 ver_grid.to_cells(vbox_m[2:])])
    hor_feat = roi_crop(norm["horizontal"].values[frame], det.box_cells, roi)
    ver_feat = roi_crop(norm["vertical"].values[frame], vbox_cells, roi)
    block = fuse(FeatureBlock(hor_feat[None], "horizontal"),
                 FeatureBlock(ver_feat[None], "vertical"), weights)
    probs = mask_probabilities(block, cfg["mask"]["resolution"])
    box3d = box3d_from_planes(det.box_m, vbox_m)
    pixel_box = _project_box_to_pixels(box3d, result_plane)
    if pixel_box is None:
        return canvas
    return paste_mask(probs, pixel_box, canvas)


def _paste_box(gt_box, height_range, result_plane, canvas):
    """Fill a ground-truth box's projection on the canvas (all-ones mask)."""
    vbox = vertical_box_from_horizontal(gt_box, height_range)
    box3d = box3d_from_planes(gt_box, vbox)
    pixel_box = _project_box_to_pixels(box3d, result_plane)
    if pixel_box is None:
        return canvas
    return paste_mask(np.ones((2, 2)), pixel_box, canvas)


def _project_box_to_pixels(box3d, result_plane):
    """Room-coordinate 3D box -> pixel-space 2D box, or None if behind the center."""
    corners = [room_to_camera(v) for v in box3d.vertices()]
    lo = np.min(corners, axis=0)
    hi = np.max(corners, axis=0)
    try:
        plane_box = project_box3d(result_plane, Box3D(lo, hi))
    except ValueError:
        return None
    lo_px = result_plane.to_pixels(plane_box[:2])
    hi_px = result_plane.to_pixels(plane_box[2:])
    return np.array([lo_px[0], lo_px[1], hi_px[0], hi_px[1]])
