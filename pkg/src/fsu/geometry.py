"""Per-block surface fitting and point insertion at Delaunay edge midpoints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from . import fsmodel
from .core import FsuConfig, PointCloud
from .partition import Block

AXIS_NAMES = "XYZ"
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class AxisFrame:
    """Cyclic axis permutation that puts the modeled axis last.

    ``forward`` maps (x, y, z) to (x', y', z') with z' the modeled axis;
    using a cyclic order keeps the frame consistent under cyclic relabelling
    of the input axes.
    """

    modeled_axis: int

    @property
    def permutation(self):
        a = self.modeled_axis
        return ((a + 1) % 3, (a + 2) % 3, a)

    @property
    def inverse_permutation(self):
        return tuple(int(i) for i in np.argsort(self.permutation))

    @property
    def name(self):
        return AXIS_NAMES[self.modeled_axis]

    def forward(self, points):
        return np.asarray(points, dtype=np.float64).reshape(-1, 3)[:, list(self.permutation)]

    def inverse(self, points):
        return np.asarray(points, dtype=np.float64).reshape(-1, 3)[:, list(self.inverse_permutation)]


def select_axis(points) -> AxisFrame:
    """Frame modeling the axis of smallest sample variance (ties prefer Z, then Y)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        raise ValueError("degenerate block")
    var = pts.var(axis=0, ddof=1)
    best = 2
    for axis in (1, 0):
        if var[axis] < var[best]:
            best = axis
    return AxisFrame(best)


@dataclass(frozen=True, eq=False)
class Triangulation2D:
    vertices: np.ndarray       # (v, 2) deduplicated points
    source_indices: np.ndarray  # index of each vertex in the caller's array
    triangles: np.ndarray      # (t, 3) vertex indices
    edges: np.ndarray          # (e, 2) sorted vertex index pairs, unique


def delaunay2d(points) -> Triangulation2D:
    """Delaunay triangulation of the distinct points in ``points`` (Qhull).

    Exact duplicates are collapsed onto their first occurrence. Collinear
    input gives a triangulation without triangles.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    _, first = np.unique(pts, axis=0, return_index=True)
    first = np.sort(first)
    verts = pts[first]
    if len(verts) < 3:
        raise ValueError("untriangulatable block")
    empty = np.zeros((0, 3), dtype=np.int64)
    try:
        tris = Delaunay(verts).simplices.astype(np.int64)
    except QhullError:
        tris = empty
    if len(tris):
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [0, 2]]])
        edges = np.unique(np.sort(e, axis=1), axis=0)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return Triangulation2D(verts, first, tris, edges)


def in_cell(values, lo, hi):
    """Half-open ``[lo, hi)`` membership, closed at the top when ``hi >= 1``
    (the last grid cell owns the unit-cube boundary)."""
    values = np.asarray(values, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    upper = np.where(hi >= 1.0, values <= hi, values < hi)
    inside = (values >= lo) & upper
    return inside if inside.ndim == 1 else np.all(inside, axis=1)


def subsample(count, target, rng):
    """Sorted indices of a uniform random subset of ``range(count)``."""
    if target is None or count <= target:
        return np.arange(count)
    return np.sort(rng.choice(count, size=int(target), replace=False))


def new_planar_positions(tri: Triangulation2D, core_lo, core_hi, target_count=None,
                         rng=None) -> np.ndarray:
    """Edge midpoints that fall inside the planar core cell.

    With ``target_count`` set and more candidates available, a uniform random
    subset of that size is returned (``rng`` must be given then).
    """
    if len(tri.edges) == 0:
        return np.zeros((0, 2))
    mid = 0.5 * (tri.vertices[tri.edges[:, 0]] + tri.vertices[tri.edges[:, 1]])
    mid = mid[in_cell(mid, core_lo, core_hi)]
    if len(mid):
        _, keep = np.unique(np.round(mid / DEDUP_TOL), axis=0, return_index=True)
        mid = mid[np.sort(keep)]
    if target_count is not None and len(mid) > target_count:
        if rng is None:
            raise ValueError("subsampling needs a random generator")
        mid = mid[subsample(len(mid), target_count, rng)]
    return mid


def block_basis(block: Block, frame: AxisFrame, max_freq: int) -> fsmodel.BasisSpec:
    perm = list(frame.permutation)
    lo, hi = block.support_min[perm], block.support_max[perm]
    return fsmodel.BasisSpec((lo[0], hi[0], lo[1], hi[1]), max_freq)


def block_weights(basis: fsmodel.BasisSpec, cfg: FsuConfig) -> fsmodel.WeightingSpec:
    return fsmodel.WeightingSpec.for_extent(basis.extent, cfg.spatial_decay,
                                            cfg.spectral_decay)


def default_target(block: Block, cfg: FsuConfig) -> int:
    return int(round((cfg.scale_factor - 1.0) * len(block.core_point_indices)))


def block_rng(seed: int, block_id) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) % 2**64, *(int(v) for v in block_id)])
    return np.random.default_rng(ss)


def upsample_block_geometry(block: Block, cloud: PointCloud, cfg: FsuConfig,
                            target_count=None, rng=None):
    """Fit the block surface and sample it at new positions inside the core cell.

    Returns ``(frame, model, new_points)``; ``frame`` and ``model`` are None
    and ``new_points`` empty when the block cannot be modeled.
    """
    empty = np.zeros((0, 3))
    if target_count is None:
        target_count = default_target(block, cfg)
    if rng is None:
        rng = block_rng(cfg.seed, block.block_id)
    pts = cloud.positions[block.support_point_indices]
    if len(pts) < 3:
        return None, None, empty
    frame = select_axis(pts)
    rot = frame.forward(pts)
    basis = block_basis(block, frame, cfg.max_freq)
    model = fsmodel.estimate(rot[:, :2], rot[:, 2], basis, block_weights(basis, cfg),
                             cfg.max_iterations, cfg.residual_threshold)
    if target_count <= 0:
        return frame, model, empty
    try:
        tri = delaunay2d(rot[:, :2])
    except ValueError:
        return frame, model, empty

    perm = list(frame.permutation)
    lo, hi = block.core_min[perm], block.core_max[perm]
    planar = new_planar_positions(tri, lo[:2], hi[:2])
    if len(planar) == 0:
        return frame, model, empty
    height = fsmodel.evaluate(model, basis, planar)
    cand = np.column_stack([planar, height])
    cand = cand[in_cell(height, lo[2], hi[2])]
    if len(cand):
        dist, _ = cKDTree(rot).query(cand)
        cand = cand[dist > DEDUP_TOL]
    cand = cand[subsample(len(cand), target_count, rng)]
    return frame, model, frame.inverse(cand)
