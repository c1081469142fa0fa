"""rfsilhouette: radar-to-silhouette processing toolkit.

FMCW scene simulation, dual-plane beamforming, background subtraction,
CFAR detection, attention-based plane fusion, imaging-plane projection,
multi-view triangulation, losses, and COCO-style evaluation.
"""

from .beamform import (Heatmap, PlaneGrid, background_subtract, beamform_plane,
                       magnitude_normalize)
from .detect import (Detection, DetectionTarget, box3d_from_planes, cfar_detect,
                     detection_loss, detection_loss_grad, nms, roi_crop,
                     smooth_l1, smooth_l1_grad, vertical_box_from_horizontal)
from .fileio import (FrameIndexPair, align_streams, load_scene, read_cube,
                     read_heatmap, rle_decode, rle_encode, write_cube,
                     write_heatmap)
from .fusion import (AttentionWeights, FeatureBlock, LayerWeights, fuse,
                     fuse_input_grad, mask_probabilities, multi_head_attention,
                     reshape_concat)
from .geometry import (Box3D, CameraModel, ClusterResult, Keypoint2D, Keypoint3D,
                       ResultPlane, box_iou, cluster_keypoints, paste_mask,
                       project_box3d, project_point, reprojection_rms,
                       room_to_camera, triangulate)
from .metrics import (EvalRecord, average_precision, mask_iou, mask_loss,
                      mask_loss_grad, pr_curves_to_csv, total_loss)
from .pipeline import ConfigError, load_config, run_pipeline
from .radar import (ChirpConfig, RadarFrameCube, Scatterer, VirtualArray,
                    standard_array, round_trip_distance,
                    synthesize_frame_cube)

__version__ = "0.1.0"
