import math

import numpy as np
import pytest

from rfsilhouette.beamform import Heatmap, PlaneGrid
from rfsilhouette.detect import (DetectionTarget, box3d_from_planes, cfar_detect,
                                 detection_loss, detection_loss_grad, nms,
                                 roi_crop, smooth_l1, smooth_l1_grad,
                                 vertical_box_from_horizontal)

from oracles import naive_roi_crop


def make_heatmap(values, cell=0.1, origin=(0.0, 0.0)):
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None]
    grid = PlaneGrid("horizontal", origin, cell,
                     values.shape[2], values.shape[1])
    return Heatmap(grid, values)


class TestCfarDetect:
    def test_constant_heatmap_has_no_detections(self):
        heat = make_heatmap(np.full((20, 20), 3.7))
        assert cfar_detect(heat) == []

    def test_single_isolated_peak_gives_one_detection(self):
        values = np.ones((21, 21))
        values[10, 10] = 100.0
        heat = make_heatmap(values)
        dets = cfar_detect(heat, guard=2, train=4, threshold_factor=3.0)
        assert len(dets) == 1
        assert dets[0].peak_cell == (10, 10)
        # ring of 1.0 cells: score = s / (1 + s) with s = 100
        assert dets[0].score == pytest.approx(100.0 / 101.0)

    def test_two_well_separated_peaks(self):
        values = np.ones((40, 40))
        values[8, 8] = 50.0
        values[30, 31] = 80.0
        dets = cfar_detect(make_heatmap(values), guard=2, train=4)
        assert len(dets) == 2
        assert {d.peak_cell for d in dets} == {(8, 8), (30, 31)}

    def test_translation_equivariance_away_from_borders(self):
        rng = np.random.default_rng(3)
        base = np.ones((40, 40)) + 0.01 * rng.random((40, 40))
        base[15:18, 15:18] += 30.0
        shifted = np.roll(np.roll(base, 4, axis=0), 6, axis=1)
        dets_a = cfar_detect(make_heatmap(base))
        dets_b = cfar_detect(make_heatmap(shifted))
        assert len(dets_a) == len(dets_b) == 1
        pa, pb = dets_a[0].peak_cell, dets_b[0].peak_cell
        assert (pb[0] - pa[0], pb[1] - pa[1]) == (4, 6)
        assert np.allclose(dets_b[0].box_m[:2] - dets_a[0].box_m[:2],
                           [6 * 0.1, 4 * 0.1])

    def test_zero_background_peak_scores_one(self):
        values = np.zeros((20, 20))
        values[10, 10] = 5.0
        dets = cfar_detect(make_heatmap(values))
        assert len(dets) == 1
        assert dets[0].score == 1.0

    def test_adjacent_seeds_merge_into_one_component(self):
        values = np.ones((30, 30))
        values[14, 14] = 60.0
        values[14, 15] = 55.0
        values[15, 14] = 50.0
        dets = cfar_detect(make_heatmap(values))
        assert len(dets) == 1
        assert dets[0].peak_cell == (14, 14)

    def test_rings_exceeding_grid_rejected(self):
        heat = make_heatmap(np.ones((8, 8)))
        with pytest.raises(ValueError):
            cfar_detect(heat, guard=2, train=4)  # window of 13 cells

    def test_complex_heatmap_rejected(self):
        grid = PlaneGrid("horizontal", (0.0, 0.0), 0.1, 20, 20)
        heat = Heatmap(grid, np.ones((1, 20, 20), dtype=complex))
        with pytest.raises(ValueError):
            cfar_detect(heat)

    def test_negative_values_rejected(self):
        values = np.ones((20, 20))
        values[3, 3] = -0.5
        with pytest.raises(ValueError):
            cfar_detect(make_heatmap(values))

    def test_threshold_factor_below_one_rejected(self):
        with pytest.raises(ValueError):
            cfar_detect(make_heatmap(np.ones((20, 20))), threshold_factor=0.5)

    def test_boxes_are_clipped_to_grid_bounds(self):
        values = np.ones((20, 20))
        values[0, 0] = 100.0
        dets = cfar_detect(make_heatmap(values), box_extent=0.6)
        box = dets[0].box_m
        assert box[0] >= 0.0 and box[1] >= 0.0


class TestNms:
    def test_overlapping_boxes_keep_the_strongest(self):
        values = np.ones((30, 30))
        values[10, 10] = 40.0
        dets = cfar_detect(make_heatmap(values))
        doubled = dets + dets
        assert len(nms(doubled, 0.5)) == 1

    def test_disjoint_boxes_survive(self):
        values = np.ones((40, 40))
        values[8, 8] = 50.0
        values[30, 31] = 80.0
        dets = cfar_detect(make_heatmap(values))
        assert len(nms(dets, 0.5)) == 2


class TestVerticalBox:
    def test_copies_range_span_and_height_band(self):
        vbox = vertical_box_from_horizontal((0.5, 2.0, 1.0, 3.0))
        assert np.allclose(vbox, [2.0, 0.0, 3.0, 2.0])

    def test_degenerate_height_range_rejected(self):
        with pytest.raises(ValueError):
            vertical_box_from_horizontal((0.0, 0.0, 1.0, 1.0), (1.0, 1.0))

    def test_box3d_composition(self):
        hbox = (0.5, 2.0, 1.0, 3.0)
        vbox = vertical_box_from_horizontal(hbox, (0.2, 1.9))
        box = box3d_from_planes(hbox, vbox)
        assert np.allclose(box.min_corner, [0.5, 2.0, 0.2])
        assert np.allclose(box.max_corner, [1.0, 3.0, 1.9])


class TestRoiCrop:
    def test_constant_input_gives_constant_output(self):
        out = roi_crop(np.full((10, 12), 2.5), (1.3, 2.7, 8.1, 9.9), 5)
        assert np.allclose(out, 2.5)

    def test_linear_ramp_is_reproduced_exactly_on_aligned_bins(self):
        # linear inputs are preserved by symmetric sub-sample averaging when
        # each bin is one cell wide and centered on a node
        cols = np.arange(12, dtype=float)
        values = np.tile(cols, (10, 1)) + 3.0 * np.arange(10)[:, None]
        box = (1.5, 2.5, 7.5, 8.5)  # bins centered on nodes 2..7 / 3..8
        out = roi_crop(values, box, 6)
        expected = values[3:9, 2:8]
        assert np.allclose(out, expected, atol=1e-12)

    def test_integer_subsample_offsets_average_node_blocks(self):
        # with bin width 2 and half-integer corners every sub-sample lands on
        # a node, so each output cell is an exact 2x2 node average
        rng = np.random.default_rng(8)
        values = rng.random((9, 9))
        out = roi_crop(values, (-0.5, -0.5, 7.5, 7.5), 4)
        expected = values[:8, :8].reshape(4, 2, 4, 2).mean(axis=(1, 3))
        assert np.allclose(out, expected, atol=1e-12)

    def test_matches_naive_oracle_on_random_boxes(self):
        rng = np.random.default_rng(5)
        values = rng.random((16, 20))
        for _ in range(100):
            x1, y1 = rng.uniform(0, 10, 2)
            w, h = rng.uniform(0.5, 8, 2)
            box = (x1, y1, x1 + w, y1 + h)
            p = int(rng.integers(1, 8))
            fast = roi_crop(values, box, p)
            slow = naive_roi_crop(values, box, p)
            assert np.max(np.abs(fast - slow)) <= 1e-6

    def test_half_cell_shift_matches_oracle(self):
        rng = np.random.default_rng(6)
        values = rng.random((12, 12))
        box = (2.0, 3.0, 8.0, 9.0)
        shifted = (2.5, 3.5, 8.5, 9.5)
        assert np.max(np.abs(roi_crop(values, shifted, 4)
                             - naive_roi_crop(values, shifted, 4))) <= 1e-6
        assert not np.allclose(roi_crop(values, box, 4),
                               roi_crop(values, shifted, 4))

    def test_multichannel_crop(self):
        rng = np.random.default_rng(7)
        values = rng.random((3, 10, 10))
        out = roi_crop(values, (1.0, 1.0, 8.0, 8.0), 4)
        assert out.shape == (3, 4, 4)
        for c in range(3):
            assert np.allclose(out[c], roi_crop(values[c], (1.0, 1.0, 8.0, 8.0), 4))

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            roi_crop(np.ones((5, 5)), (2.0, 1.0, 2.0, 4.0), 3)


class TestSmoothL1:
    def test_reference_values(self):
        assert smooth_l1(0.0) == 0.0
        assert smooth_l1(0.5) == pytest.approx(0.125)
        assert smooth_l1(2.0) == pytest.approx(1.5)
        assert smooth_l1(-2.0) == pytest.approx(1.5)

    def test_continuous_and_smooth_at_the_transition(self):
        h = 1e-6
        for x0 in (1.0, -1.0):
            assert abs(smooth_l1(x0 + h) - smooth_l1(x0 - h)) < 3 * h
            central = (smooth_l1(x0 + h) - smooth_l1(x0 - h)) / (2 * h)
            assert central == pytest.approx(smooth_l1_grad(x0), abs=1e-6)

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(2)
        xs = rng.uniform(-3, 3, 50)
        h = 1e-6
        central = (smooth_l1(xs + h) - smooth_l1(xs - h)) / (2 * h)
        assert np.allclose(smooth_l1_grad(xs), central, atol=1e-5)


class TestDetectionLoss:
    def test_perfect_foreground_prediction_hits_the_clip_floor(self):
        target = DetectionTarget(1, coords=(1.0, 2.0, 3.0, 4.0))
        loss = detection_loss([(1.0, (1.0, 2.0, 3.0, 4.0))], [target])
        assert loss == pytest.approx(-math.log(1.0 - 1e-7), rel=1e-9)
        assert loss < 2e-7

    def test_background_target_ignores_coordinates(self):
        target = DetectionTarget(0)
        a = detection_loss([(0.2, (0.0, 0.0, 0.0, 0.0))], [target])
        b = detection_loss([(0.2, (9.0, -9.0, 5.0, 5.0))], [target])
        assert a == b == pytest.approx(-math.log(0.8), rel=1e-9)

    def test_half_confidence_on_human_is_ln_two(self):
        target = DetectionTarget(1, coords=(1.0, 1.0, 2.0, 2.0))
        loss = detection_loss([(0.5, (1.0, 1.0, 2.0, 2.0))], [target])
        assert loss == pytest.approx(math.log(2.0), rel=1e-9)

    def test_box_term_uses_summed_smooth_l1(self):
        target = DetectionTarget(1, coords=(0.0, 0.0, 0.0, 0.0))
        loss = detection_loss([(0.5, (0.5, 2.0, 0.0, 0.0))], [target],
                              lam_det=2.0)
        expected = math.log(2.0) + 2.0 * (0.125 + 1.5)
        assert loss == pytest.approx(expected, rel=1e-9)

    def test_misaligned_lists_rejected(self):
        with pytest.raises(ValueError):
            detection_loss([(0.5, (0, 0, 0, 0))], [])

    def test_score_outside_unit_interval_rejected(self):
        with pytest.raises(ValueError):
            detection_loss([(1.5, (0, 0, 0, 0))], [DetectionTarget(1)])

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(4)
        h = 1e-5
        for _ in range(20):
            n = int(rng.integers(1, 5))
            preds = [(float(rng.uniform(0.05, 0.95)), rng.uniform(-2, 2, 4))
                     for _ in range(n)]
            targets = [DetectionTarget(int(rng.integers(0, 2)),
                                       rng.uniform(-2, 2, 4))
                       for _ in range(n)]
            lam = float(rng.uniform(0.5, 2.0))
            d_scores, d_coords = detection_loss_grad(preds, targets, lam)
            for i in range(n):
                score, coords = preds[i]
                up = preds.copy()
                up[i] = (score + h, coords)
                down = preds.copy()
                down[i] = (score - h, coords)
                fd = (detection_loss(up, targets, lam)
                      - detection_loss(down, targets, lam)) / (2 * h)
                assert d_scores[i] == pytest.approx(fd, rel=1e-4, abs=1e-8)
                for j in range(4):
                    cp = coords.copy()
                    cp[j] += h
                    cm = coords.copy()
                    cm[j] -= h
                    up[i] = (score, cp)
                    down[i] = (score, cm)
                    fd = (detection_loss(up, targets, lam)
                          - detection_loss(down, targets, lam)) / (2 * h)
                    assert d_coords[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-8)
