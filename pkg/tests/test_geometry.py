import numpy as np
import pytest

from relight.geometry import (
    box_downsample,
    normals_from_depth,
    pixel_positions,
    resize_area,
)

RAMP_NX = -0.8320502943378437  # -1.5 / sqrt(1.5^2 + 1)
RAMP_NZ = 0.5547001962252291  # 1 / sqrt(1.5^2 + 1)


def test_pixel_centers_2x2():
    pos = pixel_positions(np.full((2, 2), 0.5))
    assert sorted(set(pos[:, :, 0].ravel())) == [0.25, 0.75]
    assert sorted(set(pos[:, :, 1].ravel())) == [0.25, 0.75]
    assert np.all(pos[:, :, 2] == 0.5)


def test_pixel_position_hand_case():
    depth = np.zeros((2, 4))
    depth[0, 3] = 0.2
    pos = pixel_positions(depth)
    assert np.array_equal(pos[0, 3], [0.875, 0.25, 0.2])


def test_flat_depth_gives_up_normals():
    n = normals_from_depth(np.full((5, 7), 0.3))
    assert np.array_equal(n, np.broadcast_to([0.0, 0.0, 1.0], (5, 7, 3)))


def test_ramp_along_u():
    # depth 0, 0.5, 1 across columns: center g_x = (1 - 0) / (2/3) = 1.5
    depth = np.tile(np.array([0.0, 0.5, 1.0]), (3, 1))
    n = normals_from_depth(depth, z_gain=1.0)
    assert n[1, 1, 0] == pytest.approx(RAMP_NX, abs=1e-12)
    assert n[1, 1, 1] == 0.0
    assert n[1, 1, 2] == pytest.approx(RAMP_NZ, abs=1e-12)


def test_ramp_along_v_by_symmetry():
    depth = np.tile(np.array([[0.0], [0.5], [1.0]]), (1, 3))
    n = normals_from_depth(depth, z_gain=1.0)
    assert n[1, 1, 0] == 0.0
    assert n[1, 1, 1] == pytest.approx(RAMP_NX, abs=1e-12)
    assert n[1, 1, 2] == pytest.approx(RAMP_NZ, abs=1e-12)


def test_normals_unit_length_and_camera_facing(rng):
    depth = rng.uniform(0, 1, (17, 23))
    n = normals_from_depth(depth, z_gain=2.0)
    norms = np.linalg.norm(n, axis=2)
    assert np.abs(norms - 1.0).max() <= 1e-5
    assert np.all(n[:, :, 2] > 0)


def test_transpose_swaps_xy(rng):
    depth = rng.uniform(0, 1, (9, 9))
    n = normals_from_depth(depth)
    nt = normals_from_depth(depth.T)
    assert np.array_equal(nt[:, :, 0], np.transpose(n[:, :, 1]))
    assert np.array_equal(nt[:, :, 1], np.transpose(n[:, :, 0]))
    assert np.array_equal(nt[:, :, 2], np.transpose(n[:, :, 2]))


def test_constant_offset_invariance(rng):
    # dyadic depth values (as produced by 8-bit files) shift exactly, so the
    # gradient cancellation is bitwise
    depth = rng.integers(0, 128, (8, 8)).astype(np.float64) / 256.0
    assert np.array_equal(normals_from_depth(depth), normals_from_depth(depth + 0.25))


def test_z_gain_must_be_positive():
    with pytest.raises(ValueError):
        normals_from_depth(np.full((2, 2), 0.5), z_gain=0.0)


def test_box_downsample_exact_blocks():
    raster = np.arange(16, dtype=np.float64).reshape(4, 4)
    down = box_downsample(raster, 2)
    assert np.array_equal(down, [[2.5, 4.5], [10.5, 12.5]])


def test_box_downsample_ragged_edge():
    raster = np.arange(9, dtype=np.float64).reshape(3, 3)
    down = box_downsample(raster, 2)
    assert down.shape == (2, 2)
    assert down[1, 1] == 8.0  # single-pixel corner block


def test_box_downsample_constant_channels():
    raster = np.full((6, 6, 3), 0.7)
    assert np.allclose(box_downsample(raster, 4), 0.7)


def test_resize_area_preserves_constant():
    raster = np.full((10, 14, 3), 0.42)
    out = resize_area(raster, 7, 5)
    assert out.shape == (7, 5, 3)
    assert np.allclose(out, 0.42)


def test_resize_area_integer_factor_matches_box(rng):
    raster = rng.uniform(0, 1, (8, 8))
    assert np.allclose(resize_area(raster, 4, 4), box_downsample(raster, 2))


def test_resize_area_preserves_mean(rng):
    raster = rng.uniform(0, 1, (12, 18))
    out = resize_area(raster, 4, 6)
    assert out.mean() == pytest.approx(raster.mean(), rel=1e-12)
