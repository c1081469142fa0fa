"""From a detection to a pasted silhouette mask.

Crops RoI features from both planes around a detection, fuses them with the
stacked-attention block, upsamples the cross-plane correlation into mask
probabilities, and pastes the thresholded mask into the projected 3D box on
the imaging plane.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from rfsilhouette import (AttentionWeights, Box3D, ChirpConfig, FeatureBlock,
                          PlaneGrid, ResultPlane, Scatterer, background_subtract,
                          beamform_plane, box3d_from_planes, cfar_detect, fuse,
                          magnitude_normalize, mask_probabilities, nms,
                          paste_mask, project_box3d, roi_crop, room_to_camera,
                          standard_array, synthesize_frame_cube,
                          vertical_box_from_horizontal)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

FRAMES = 6
ROI = 8
walk = np.cumsum(np.tile([0.05, 0.03, 0.0], (FRAMES, 1)), axis=0)
scene = [Scatterer((-0.4, 1.8, 1.0), 1.0, is_static=False)]

planes = {}
for name, start in (("horizontal", 77.0e9), ("vertical", 79.0e9)):
    chirp = ChirpConfig(start, 1.23e9, 64)
    array = standard_array(chirp, name, (0.0, 0.0, 1.0), 86)
    grid = (PlaneGrid("horizontal", (-2.0, 0.0), 0.05, 80, 80, lift=1.0)
            if name == "horizontal"
            else PlaneGrid("vertical", (0.0, 0.0), 0.05, 80, 50, lift=0.0))
    cube = synthesize_frame_cube(scene, [walk], chirp, array, FRAMES)
    planes[name] = magnitude_normalize(
        background_subtract(beamform_plane(cube, grid)))

frame = 3
dets = nms(cfar_detect(planes["horizontal"], frame=frame, min_value=0.3))
det = max(dets, key=lambda d: d.score)
print("detection box (m):", np.round(det.box_m, 2))

vbox_m = vertical_box_from_horizontal(det.box_m, (0.0, 2.0))
ver_grid = planes["vertical"].grid
vbox_cells = np.concatenate([ver_grid.to_cells(vbox_m[:2]),
                             ver_grid.to_cells(vbox_m[2:])])
hor_feat = roi_crop(planes["horizontal"].values[frame], det.box_cells, ROI)
ver_feat = roi_crop(planes["vertical"].values[frame], vbox_cells, ROI)

weights = AttentionWeights.random(ROI, num_heads=4, num_layers=4, seed=0)
block = fuse(FeatureBlock(hor_feat[None], "horizontal"),
             FeatureBlock(ver_feat[None], "vertical"), weights)
probs = mask_probabilities(block, 28)

result_plane = ResultPlane(r=1.0, pixel_scale=60.0, image_size=(200, 160))
box3d = box3d_from_planes(det.box_m, vbox_m)
corners = np.array([room_to_camera(v) for v in box3d.vertices()])
cam_box = Box3D(corners.min(axis=0), corners.max(axis=0))
plane_box = project_box3d(result_plane, cam_box)
pixel_box = np.concatenate([result_plane.to_pixels(plane_box[:2]),
                            result_plane.to_pixels(plane_box[2:])])
canvas = paste_mask(probs, pixel_box, (160, 200))
print(f"pasted {canvas.sum()} silhouette pixels")

fig, axes = plt.subplots(1, 3, figsize=(13, 4))
axes[0].imshow(block, cmap="viridis")
axes[0].set_title(f"fused correlation block {block.shape}")
axes[1].imshow(probs, cmap="viridis")
axes[1].set_title("mask probabilities 28x28")
axes[2].imshow(canvas, origin="lower", cmap="gray")
axes[2].set_title("pasted silhouette on imaging plane")
fig.tight_layout()
fig.savefig(OUT / "fusion_mask.png", dpi=110)
print(f"wrote {OUT / 'fusion_mask.png'}")
