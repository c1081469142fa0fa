import numpy as np
import pytest

from rfsilhouette.radar import (ChirpConfig, RadarFrameCube, Scatterer,
                                VirtualArray, standard_array,
                                round_trip_distance, synthesize_frame_cube)

CFG = ChirpConfig(77.0e9, 1.23e9, 8)


def small_array(n=6, orientation="horizontal", center=(0.0, 0.0, 0.0)):
    return standard_array(CFG, orientation, center, n)


class TestChirpConfig:
    def test_frequency_grid_is_monotone_and_spans_the_sweep(self):
        f = CFG.frequencies
        assert f[0] == 77.0e9
        assert f[-1] == pytest.approx(78.23e9)
        assert np.all(np.diff(f) > 0)

    def test_wavelengths_decrease_across_the_sweep(self):
        lam = CFG.wavelengths
        assert np.all(np.diff(lam) < 0)

    @pytest.mark.parametrize("kwargs", [
        {"start_freq": 0.0, "bandwidth": 1e9, "num_samples": 8},
        {"start_freq": 77e9, "bandwidth": -1.0, "num_samples": 8},
        {"start_freq": 77e9, "bandwidth": 1e9, "num_samples": 1},
    ])
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ChirpConfig(**kwargs)


class TestVirtualArray:
    def test_linear_array_is_centered_and_evenly_spaced(self):
        arr = VirtualArray.linear(5, 0.002, "horizontal", (0.0, 0.0, 1.0))
        assert arr.num_elements == 5
        assert np.allclose(arr.center, [0.0, 0.0, 1.0])
        assert np.allclose(np.diff(arr.element_positions[:, 0]), 0.002)

    def test_vertical_array_spans_z(self):
        arr = VirtualArray.linear(4, 0.002, "vertical")
        assert np.ptp(arr.element_positions[:, 2]) > 0
        assert np.ptp(arr.element_positions[:, 0]) == 0

    def test_bad_orientation_rejected(self):
        with pytest.raises(ValueError):
            VirtualArray(np.zeros((3, 3)), "diagonal")

    def test_nonfinite_positions_rejected(self):
        with pytest.raises(ValueError):
            VirtualArray(np.array([[0.0, np.inf, 0.0]]))


class TestRoundTripDistance:
    def test_element_at_origin_point_one_meter_away(self):
        arr = VirtualArray(np.zeros((1, 3)))
        assert round_trip_distance(arr, 0, (0.0, 1.0, 0.0)) == 2.0

    def test_offset_element_matches_direct_distance_formula(self):
        arr = VirtualArray(np.array([[0.01, 0.0, 0.0]]))
        expected = 2.0 * np.sqrt(0.01**2 + 1.0**2)  # = 2.000099997500125
        assert round_trip_distance(arr, 0, (0.0, 1.0, 0.0)) == pytest.approx(
            expected, rel=1e-12)

    def test_coincident_point_is_an_error(self):
        arr = VirtualArray(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            round_trip_distance(arr, 0, (0.0, 0.0, 0.0))

    def test_out_of_range_antenna_index(self):
        arr = VirtualArray(np.zeros((1, 3)))
        with pytest.raises(IndexError):
            round_trip_distance(arr, 1, (0.0, 1.0, 0.0))


class TestSynthesis:
    def test_empty_scene_zero_noise_gives_all_zero_cube(self):
        cube = synthesize_frame_cube([], None, CFG, small_array(), 3)
        assert np.all(cube.data == 0)
        assert cube.data.shape == (8, 6, 3)

    def test_static_scatterer_is_frame_invariant_bitwise(self):
        scene = [Scatterer((0.2, 1.5, 0.0))]
        cube = synthesize_frame_cube(scene, None, CFG, small_array(), 4)
        for t in range(1, 4):
            assert np.array_equal(cube.data[:, :, t], cube.data[:, :, 0])

    def test_determinism_bit_identical_across_runs(self):
        scene = [Scatterer((0.2, 1.5, 0.0)), Scatterer((-0.4, 2.0, 0.1), 0.5)]
        a = synthesize_frame_cube(scene, None, CFG, small_array(), 3,
                                  seed=7, noise_std=0.1)
        b = synthesize_frame_cube(scene, None, CFG, small_array(), 3,
                                  seed=7, noise_std=0.1)
        assert np.array_equal(a.data, b.data)

    def test_different_seeds_differ(self):
        a = synthesize_frame_cube([], None, CFG, small_array(), 2,
                                  seed=1, noise_std=0.1)
        b = synthesize_frame_cube([], None, CFG, small_array(), 2,
                                  seed=2, noise_std=0.1)
        assert not np.array_equal(a.data, b.data)

    def test_linearity_of_scene_union(self):
        rng = np.random.default_rng(0)
        scene_a = [Scatterer(rng.uniform(-1, 1, 3) + [0, 2, 0], 1.0)]
        scene_b = [Scatterer(rng.uniform(-1, 1, 3) + [0, 3, 0], 0.7)]
        arr = small_array()
        cube_ab = synthesize_frame_cube(scene_a + scene_b, None, CFG, arr, 2)
        cube_a = synthesize_frame_cube(scene_a, None, CFG, arr, 2)
        cube_b = synthesize_frame_cube(scene_b, None, CFG, arr, 2)
        lhs = cube_ab.data
        rhs = cube_a.data + cube_b.data
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))

    def test_conjugate_focusing_recovers_k_m_over_d_squared(self):
        pos = np.array([0.3, 1.8, 0.2])
        reflectivity = 0.8
        arr = small_array()
        cube = synthesize_frame_cube([Scatterer(pos, reflectivity)], None,
                                     CFG, arr, 1)
        d_m = np.array([round_trip_distance(arr, m, pos)
                        for m in range(arr.num_elements)])
        steer = np.exp(2j * np.pi * np.outer(1.0 / CFG.wavelengths, d_m))
        focused = np.abs(np.sum(cube.data[:, :, 0] * steer))
        d = np.linalg.norm(pos - arr.center)
        expected = CFG.num_samples * arr.num_elements * reflectivity / d**2
        assert focused == pytest.approx(expected, rel=1e-6)

    def test_moving_scatterer_follows_trajectory(self):
        traj = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.2, 0.0, 0.0]])
        scene = [Scatterer((0.0, 2.0, 0.0), is_static=False)]
        cube = synthesize_frame_cube(scene, [traj], CFG, small_array(), 3)
        ref0 = synthesize_frame_cube([Scatterer((0.0, 2.0, 0.0))], None, CFG,
                                     small_array(), 1)
        ref2 = synthesize_frame_cube([Scatterer((0.2, 2.0, 0.0))], None, CFG,
                                     small_array(), 1)
        assert np.allclose(cube.data[:, :, 0], ref0.data[:, :, 0])
        assert np.allclose(cube.data[:, :, 2], ref2.data[:, :, 0])

    def test_trajectory_length_mismatch_rejected(self):
        scene = [Scatterer((0.0, 2.0, 0.0), is_static=False)]
        with pytest.raises(ValueError):
            synthesize_frame_cube(scene, [np.zeros((2, 3))], CFG,
                                  small_array(), 3)

    def test_static_scatterer_with_moving_trajectory_rejected(self):
        scene = [Scatterer((0.0, 2.0, 0.0), is_static=True)]
        with pytest.raises(ValueError):
            synthesize_frame_cube(scene, [np.ones((3, 3))], CFG,
                                  small_array(), 3)

    def test_visibility_mask_drops_frames(self):
        scene = [Scatterer((0.0, 2.0, 0.0))]
        vis = np.array([True, False, True])
        cube = synthesize_frame_cube(scene, None, CFG, small_array(), 3,
                                     visibility=[vis])
        assert np.any(cube.data[:, :, 0] != 0)
        assert np.all(cube.data[:, :, 1] == 0)
        assert np.array_equal(cube.data[:, :, 2], cube.data[:, :, 0])

    def test_scatterer_on_array_element_rejected(self):
        arr = VirtualArray(np.array([[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]]))
        with pytest.raises(ValueError):
            synthesize_frame_cube([Scatterer((0.01, 0.0, 0.0))], None, CFG,
                                  arr, 1)


class TestRadarFrameCube:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            RadarFrameCube(np.zeros((4, 6, 2), dtype=complex), CFG, small_array())

    def test_nonfinite_samples_rejected(self):
        data = np.zeros((8, 6, 2), dtype=complex)
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            RadarFrameCube(data, CFG, small_array())
