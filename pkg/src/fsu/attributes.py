"""Color upsampling on the planar projection given by the geometry frame."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from . import fsmodel
from .core import FsuConfig, PointCloud, normalize
from .geometry import AxisFrame, block_basis, block_weights, select_axis
from .partition import Block, partition


def project(rotated_points, frame: AxisFrame | None = None) -> np.ndarray:
    """Drop the modeled coordinate z' of points already in the block frame."""
    return np.asarray(rotated_points, dtype=np.float64).reshape(-1, 3)[:, :2].copy()


def to_color_bytes(values) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def fit_colors(block: Block, frame: AxisFrame, sample_points, sample_colors,
               query_points, cfg: FsuConfig) -> np.ndarray:
    """Per-channel frequency models over the projected samples, evaluated at
    the projected queries. Returns rounded, clamped uint8 colors."""
    query_points = np.asarray(query_points, dtype=np.float64).reshape(-1, 3)
    if len(query_points) == 0:
        return np.zeros((0, 3), dtype=np.uint8)
    basis = block_basis(block, frame, cfg.max_freq)
    weights = block_weights(basis, cfg)
    samples2d = project(frame.forward(sample_points))
    queries2d = project(frame.forward(query_points))
    values = np.asarray(sample_colors, dtype=np.float64).reshape(-1, 3)
    models = fsmodel.estimate_many(samples2d, values, basis, weights,
                                   cfg.max_iterations, cfg.residual_threshold)
    out = np.column_stack([fsmodel.evaluate(m, basis, queries2d) for m in models])
    return to_color_bytes(out)


def upsample_block_attributes(block: Block, cloud: PointCloud, frame: AxisFrame,
                              new_points, cfg: FsuConfig) -> np.ndarray:
    """Colors for ``new_points`` of one block, from its colored support points."""
    if not cloud.has_colors:
        raise ValueError("cloud has no colors")
    idx = block.support_point_indices
    return fit_colors(block, frame, cloud.positions[idx], cloud.colors[idx],
                      new_points, cfg)


def attribute_transfer_eval(reference: PointCloud, keep_fraction: float, seed):
    """Random split into colored training points and color-less queries.

    Returns ``(train, query_positions, query_truth_colors)``; both parts keep
    the reference order.
    """
    if not reference.has_colors:
        raise ValueError("reference cloud has no colors")
    if not 0 < keep_fraction < 1:
        raise ValueError("keep_fraction must lie in (0, 1)")
    n = len(reference)
    n_train = min(max(int(round(keep_fraction * n)), 1), n - 1)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) % 2**64))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=n_train, replace=False)] = True
    train = reference.subset(np.flatnonzero(mask))
    queries = np.flatnonzero(~mask)
    return train, reference.positions[queries], reference.colors[queries]


def predict_colors(train: PointCloud, query_positions, cfg: FsuConfig) -> np.ndarray:
    """Colors at ``query_positions`` using blocks of the joint point set.

    Geometry upsampling is bypassed: queries take the place of inserted
    points, every block is modeled from the training points in its support,
    and queries are colored by the block whose core holds them. Queries whose
    block has fewer than two training points in support copy the color of the
    nearest training point.
    """
    queries = np.asarray(query_positions, dtype=np.float64).reshape(-1, 3)
    n_train = len(train)
    joint = PointCloud(np.concatenate([train.positions, queries]))
    joint_n, _ = normalize(joint)
    pos = joint_n.positions
    out = np.zeros((len(queries), 3), dtype=np.uint8)
    done = np.zeros(len(queries), dtype=bool)
    for block in partition(joint_n, cfg.block_size, cfg.support_margin):
        q = block.core_point_indices[block.core_point_indices >= n_train]
        if len(q) == 0:
            continue
        s = block.support_point_indices[block.support_point_indices < n_train]
        if len(s) < 2:
            continue
        frame = select_axis(pos[s])
        out[q - n_train] = fit_colors(block, frame, pos[s], train.colors[s], pos[q], cfg)
        done[q - n_train] = True
    if not done.all():
        _, nn = cKDTree(train.positions).query(queries[~done])
        out[~done] = train.colors[nn]
    return out
