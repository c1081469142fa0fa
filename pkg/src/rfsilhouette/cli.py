"""Command-line entry points for the individual stages and the full pipeline.

Relative output paths are resolved under $RFSILHOUETTE_OUT_DIR when that
variable is set.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fileio
from .beamform import PlaneGrid, background_subtract, beamform_plane, magnitude_normalize
from .detect import cfar_detect, nms
from .fusion import AttentionWeights, FeatureBlock, fuse
from .geometry import cluster_keypoints, triangulate
from .metrics import average_precision, pr_curves_to_csv
from .pipeline import ConfigError, FAIL_MARKER, resolve_output_path, run_pipeline
from .radar import (ChirpConfig, RadarFrameCube, VirtualArray, standard_array,
                    synthesize_frame_cube)


def _cmd_simulate(args):
    scene, trajectories, visibility = fileio.load_scene(args.scene)
    chirp = ChirpConfig(args.start_freq, args.bandwidth, args.samples,
                        frames_per_second=args.fps)
    array = standard_array(chirp, args.plane,
                                  center=tuple(args.array_center),
                                  num_elements=args.elements)
    cube = synthesize_frame_cube(scene, trajectories, chirp, array, args.frames,
                                 seed=args.seed, noise_std=args.noise_std,
                                 visibility=visibility)
    out = resolve_output_path(args.out)
    fileio.write_cube(out, cube)
    print(f"wrote {out} ({args.samples}x{array.num_elements}x{args.frames})")
    return 0


def _load_grid(path, plane):
    desc = fileio.read_json(path)
    return PlaneGrid(desc.get("plane", plane), tuple(desc["origin"]),
                     desc["cell_size"], desc["width"], desc["height"],
                     desc.get("lift", 0.0))


def _cmd_beamform(args):
    config, data = fileio.read_cube(args.cube)
    plane = {"hor": "horizontal", "ver": "vertical"}[args.plane]
    if args.array:
        desc = fileio.read_json(args.array)
        array = VirtualArray(np.asarray(desc["element_positions"], dtype=float),
                             desc.get("orientation", plane))
    else:
        array = standard_array(config, plane, num_elements=data.shape[1])
    cube = RadarFrameCube(data, config, array)
    grid = _load_grid(args.grid, plane)
    heatmap = beamform_plane(cube, grid)
    if args.subtract_lag:
        heatmap = background_subtract(heatmap, args.subtract_lag)
    if args.magnitude:
        heatmap = magnitude_normalize(heatmap)
    out = resolve_output_path(args.out)
    fileio.write_heatmap(out, heatmap)
    print(f"wrote {out} ({heatmap.frame_count} frames, "
          f"{'complex' if heatmap.is_complex else 'real'})")
    return 0


def _cmd_detect(args):
    heatmap = fileio.read_heatmap(args.heatmap)
    if heatmap.is_complex:
        heatmap = magnitude_normalize(heatmap)
    per_frame = {}
    for f in range(heatmap.frame_count):
        dets = cfar_detect(heatmap, frame=f, guard=args.guard, train=args.train,
                           threshold_factor=args.threshold_factor,
                           box_extent=args.box_extent)
        per_frame[f] = nms(dets, args.nms_iou)
    out = resolve_output_path(args.out)
    fileio.save_detections(out, per_frame)
    total = sum(len(v) for v in per_frame.values())
    print(f"wrote {out} ({total} detections over {heatmap.frame_count} frames)")
    return 0


def _load_fuse_weights(source, dim, heads, layers):
    if source.startswith("seed:"):
        return AttentionWeights.random(dim, heads, layers, seed=int(source[5:]))
    return fileio.load_weights(source)


def _cmd_fuse(args):
    hor = np.load(args.hor)
    ver = np.load(args.ver)
    if hor.ndim == 2:
        hor = hor[None]
    if ver.ndim == 2:
        ver = ver[None]
    dim = hor.shape[0] * hor.shape[1]
    weights = _load_fuse_weights(args.weights, dim, args.heads, args.layers)
    block = fuse(FeatureBlock(hor, "horizontal"), FeatureBlock(ver, "vertical"),
                 weights)
    out = resolve_output_path(args.out)
    fileio.write_json(out, {"shape": list(block.shape), "values": block.tolist()})
    print(f"wrote {out} (fused block {block.shape[0]}x{block.shape[1]})")
    return 0


def _cmd_evaluate(args):
    pred_rows = fileio.load_detections(args.pred)
    gt_rows = fileio.read_json(args.gt)
    records = fileio.eval_records_from_rows(pred_rows, gt_rows)
    report = average_precision(records)
    out = resolve_output_path(args.out)
    fileio.write_json(out, report)
    if args.plot:
        csv_path = out.with_suffix(".csv") if out.suffix else out.parent / "pr_curves.csv"
        pr_curves_to_csv(report, csv_path)
        print(f"wrote {csv_path}")
    print(f"wrote {out} (AP50:95 {report['ap_50_95']:.4f}, "
          f"recall {report['recall']:.4f})")
    return 0


def _cmd_triangulate(args):
    cameras = fileio.load_cameras(args.calib)
    rows = fileio.read_json(args.kp2d)
    groups = {}
    for row in rows:
        key = (row.get("person"), row.get("joint", 0))
        groups.setdefault(key, []).append((cameras[int(row["camera"])],
                                           np.asarray(row["xy"], dtype=float)))
    results = []
    for (person, joint), obs in sorted(groups.items(),
                                       key=lambda kv: (str(kv[0][0]), kv[0][1])):
        point = triangulate(obs)
        entry = {"joint": int(joint), "xyz": [float(v) for v in point],
                 "views": len(obs)}
        if person is not None:
            entry["person"] = person
        results.append(entry)
    if args.persons:
        pts = np.asarray([r["xyz"] for r in results])
        clusters = cluster_keypoints(pts, args.persons, seed=args.seed)
        for row, label in zip(results, clusters.labels):
            row["person"] = int(label)
    out = resolve_output_path(args.out)
    fileio.write_json(out, results)
    print(f"wrote {out} ({len(results)} keypoints)")
    return 0


def _cmd_run(args):
    try:
        report = run_pipeline(args.config)
    except ConfigError as exc:
        # leave only a marker when the config itself names an output dir
        try:
            raw = fileio.read_json(args.config)
            out_dir = raw.get("output_dir") if isinstance(raw, dict) else None
        except (OSError, ValueError):
            out_dir = None
        if out_dir:
            out = resolve_output_path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / FAIL_MARKER).write_text(f"invalid config: {exc}\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # stage failure: marker already written
        print(f"error: {exc}", file=sys.stderr)
        return 1
    metrics = report["detection_metrics"]
    print(json.dumps({"ap_50_95": metrics["ap_50_95"],
                      "recall": metrics["recall"],
                      "mean_mask_iou": report["mean_mask_iou"],
                      "containment_fraction": report["containment_fraction"]},
                     sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rfsilhouette",
        description="Radar-to-silhouette pipeline: simulation, beamforming, "
                    "detection, fusion, and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a raw radar cube from a scene")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out", required=True, help="output cube (.rfc)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=24)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--elements", type=int, default=86)
    p.add_argument("--start-freq", type=float, default=77.0e9)
    p.add_argument("--bandwidth", type=float, default=1.23e9)
    p.add_argument("--fps", type=float, default=20.0)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--plane", choices=["horizontal", "vertical"],
                   default="horizontal", help="array orientation")
    p.add_argument("--array-center", type=float, nargs=3, default=[0.0, 0.0, 1.0])
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("beamform", help="project a cube onto an imaging plane")
    p.add_argument("--cube", required=True)
    p.add_argument("--plane", choices=["hor", "ver"], required=True)
    p.add_argument("--grid", required=True, help="grid description JSON")
    p.add_argument("--out", required=True, help="output heatmap (.rfh)")
    p.add_argument("--array", help="array JSON (element_positions, orientation); "
                                   "default: half-wavelength array from the cube header")
    p.add_argument("--subtract-lag", type=int, default=0,
                   help="also background-subtract with this lag")
    p.add_argument("--magnitude", action="store_true",
                   help="store per-frame normalized magnitudes instead of complex values")
    p.set_defaults(func=_cmd_beamform)

    p = sub.add_parser("detect", help="CFAR detection on a heatmap")
    p.add_argument("--heatmap", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--guard", type=int, default=2)
    p.add_argument("--train", type=int, default=4)
    p.add_argument("--threshold-factor", type=float, default=3.0)
    p.add_argument("--box-extent", type=float, default=0.6)
    p.add_argument("--nms-iou", type=float, default=0.5)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("fuse", help="attention-fuse horizontal/vertical features")
    p.add_argument("--hor", required=True, help="horizontal features (.npy, CxHxW)")
    p.add_argument("--ver", required=True, help="vertical features (.npy, CxHxW)")
    p.add_argument("--weights", required=True,
                   help="weights file, or 'seed:N' for seeded random weights")
    p.add_argument("--out", required=True)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=4)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("evaluate", help="AP/recall report from detections + ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true", help="also emit PR-curve CSV")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("triangulate", help="triangulate 2D keypoints from calibrated views")
    p.add_argument("--calib", required=True, help="camera matrices JSON")
    p.add_argument("--kp2d", required=True, help="2D keypoints JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--persons", type=int, default=0,
                   help="cluster the 3D points into this many persons")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_triangulate)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
