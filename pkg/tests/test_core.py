import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fsu.core import FsuConfig, NormalizationTransform, PointCloud, denormalize, normalize


def test_cube_corners_map_to_unit_cube():
    cloud = PointCloud([[0, 0, 0], [10, 10, 10]])
    out, t = normalize(cloud)
    np.testing.assert_array_equal(out.positions, [[0, 0, 0], [1, 1, 1]])
    assert t.scale == 10
    assert t.offset == (0, 0, 0)


def test_normalized_cloud_gives_identity_transform():
    rng = np.random.default_rng(1)
    pos = rng.random((50, 3))
    pos[0] = 0.0
    pos[1] = 1.0
    out, t = normalize(PointCloud(pos))
    assert abs(t.scale - 1) < 1e-12
    np.testing.assert_allclose(out.positions, pos, atol=1e-12)


def test_hundredfold_axes_match_block_coordinates():
    rng = np.random.default_rng(2)
    pos = rng.random((200, 3)) * [100, 40, 30]
    pos[0] = [0, 0, 0]
    pos[1] = [100, 40, 30]
    pos[2] = [77, 19, 5]
    out, t = normalize(PointCloud(pos))
    assert t.scale == 100
    assert 0.76 <= out.positions[2, 0] <= 0.78
    np.testing.assert_allclose(out.positions[2], [0.77, 0.19, 0.05], atol=1e-15)


def test_uniform_scale_keeps_aspect():
    cloud = PointCloud([[0, 0, 0], [4, 2, 1]])
    out, t = normalize(cloud)
    np.testing.assert_allclose(out.positions[1], [1, 0.5, 0.25])


def test_empty_input_rejected():
    with pytest.raises(ValueError, match="empty input"):
        normalize(PointCloud(np.zeros((0, 3))))


def test_denormalize_known_transform():
    t = NormalizationTransform(offset=(1, 2, 3), scale=10)
    out = denormalize(PointCloud([[0.5, 0.5, 0.5]]), t)
    np.testing.assert_allclose(out.positions, [[6, 7, 8]])


def test_round_trip_random_cloud():
    rng = np.random.default_rng(3)
    pos = rng.normal(size=(1000, 3)) * 50 + 7
    cloud = PointCloud(pos, rng.integers(0, 256, (1000, 3)))
    norm, t = normalize(cloud)
    back = denormalize(norm, t)
    assert np.max(np.abs(back.positions - pos)) < 1e-10
    np.testing.assert_array_equal(back.colors, cloud.colors)
    again = t.apply(t.invert(norm.positions))
    assert np.max(np.abs(again - norm.positions)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (12, 3), elements=st.floats(-1e3, 1e3)))
def test_normalization_preserves_neighbour_order(pos):
    if np.ptp(pos, axis=0).max() == 0:
        return
    norm, _ = normalize(PointCloud(pos))
    d_raw = np.linalg.norm(pos - pos[0], axis=1)
    d_norm = np.linalg.norm(norm.positions - norm.positions[0], axis=1)
    # strict order of raw distances survives (ties may be broken by rounding)
    for i in range(len(pos)):
        for j in range(len(pos)):
            if d_raw[i] < d_raw[j] * (1 - 1e-9):
                assert d_norm[i] <= d_norm[j]


def test_cloud_invariants():
    with pytest.raises(ValueError):
        PointCloud([[0, 0, 0], [1, 1, 1]], colors=[[1, 2, 3]])
    with pytest.raises(ValueError):
        PointCloud([[0, np.nan, 0]])
    c = PointCloud([[0, 0, 0]], colors=[[1, 2, 3]])
    with pytest.raises(ValueError):
        c.positions[0, 0] = 5


@pytest.mark.parametrize("kwargs", [
    {"block_size": 0}, {"support_margin": -0.1}, {"spectral_decay": 1.0},
    {"spectral_decay": 0.0}, {"spatial_decay": 0.0}, {"max_freq": 0},
    {"max_iterations": 0}, {"scale_factor": 0.5},
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        FsuConfig(**kwargs)


def test_config_defaults_match_operating_point():
    cfg = FsuConfig()
    assert (cfg.block_size, cfg.support_margin, cfg.scale_factor) == (0.02, 0.005, 4.0)
    assert cfg.to_dict()["max_freq"] == 8
