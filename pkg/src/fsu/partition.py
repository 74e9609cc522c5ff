"""Uniform grid of cubic core blocks with an overlapping support shell."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import PointCloud


@dataclass(frozen=True, eq=False)
class Block:
    """One core cell of side N plus every point within margin M of it.

    ``support_point_indices`` includes the core points. Both index arrays are
    sorted ascending.
    """

    block_id: tuple
    core_min: np.ndarray
    block_size: float
    margin: float
    core_point_indices: np.ndarray
    support_point_indices: np.ndarray

    @property
    def core_max(self) -> np.ndarray:
        return self.core_min + self.block_size

    @property
    def support_min(self) -> np.ndarray:
        return self.core_min - self.margin

    @property
    def support_max(self) -> np.ndarray:
        return self.core_min + self.block_size + self.margin


def cell_count(block_size: float) -> int:
    """Number of cells per axis needed to cover [0, 1]."""
    n = max(1, math.ceil(1.0 / block_size))
    while n * block_size < 1.0:
        n += 1
    while n > 1 and (n - 1) * block_size >= 1.0:
        n -= 1
    return n


def core_cells(positions: np.ndarray, block_size: float) -> np.ndarray:
    """Integer core-cell coordinates per point.

    Cells are half-open ``[i*N, (i+1)*N)``; the topmost cell also takes
    points up to and including 1.0. The floor is corrected so that the
    assignment agrees exactly with the float predicate ``i*N <= x < (i+1)*N``.
    """
    pos = np.asarray(positions, dtype=np.float64)
    idx = np.floor(pos / block_size).astype(np.int64)
    idx -= (idx * block_size > pos)
    idx += ((idx + 1) * block_size <= pos)
    return np.clip(idx, 0, cell_count(block_size) - 1)


def _in_support(pos, cells, block_size, margin):
    lo = cells * block_size - margin
    hi = cells * block_size + block_size + margin
    return np.all((pos >= lo) & (pos <= hi), axis=1)


def partition(cloud: PointCloud, block_size: float, margin: float):
    """Split a normalized cloud into blocks ordered by ascending ``block_id``.

    Every point belongs to exactly one core block and to the support of each
    block whose expanded cell ``[min - M, min + N + M]`` contains it. Blocks
    without core points are not returned.
    """
    if not block_size > 0:
        raise ValueError("block_size must be > 0")
    if not margin >= 0:
        raise ValueError("margin must be >= 0")
    pos = cloud.positions
    n = len(pos)
    if n == 0:
        return []
    cells = core_cells(pos, block_size)
    ncell = cell_count(block_size)

    # core membership, grouped by cell
    keys = np.ravel_multi_index(cells.T, (ncell,) * 3)
    order = np.argsort(keys, kind="stable")
    occupied, starts = np.unique(keys[order], return_index=True)
    core_groups = np.split(order, starts[1:])

    # support membership: test neighbouring cells of each point's own cell
    reach = int(math.ceil(margin / block_size)) + 1 if margin > 0 else 0
    pair_blocks, pair_points = [keys], [np.arange(n)]
    offsets = range(-reach, reach + 1)
    for delta in itertools.product(offsets, repeat=3):
        if delta == (0, 0, 0):
            continue
        cand = cells + np.asarray(delta)
        valid = np.all((cand >= 0) & (cand < ncell), axis=1)
        if not valid.any():
            continue
        hit = np.flatnonzero(valid)
        hit = hit[_in_support(pos[hit], cand[hit], block_size, margin)]
        if len(hit):
            pair_blocks.append(np.ravel_multi_index(cand[hit].T, (ncell,) * 3))
            pair_points.append(hit)
    pb = np.concatenate(pair_blocks)
    pp = np.concatenate(pair_points)
    keep = np.isin(pb, occupied)
    pb, pp = pb[keep], pp[keep]
    order = np.lexsort((pp, pb))
    pb, pp = pb[order], pp[order]
    bstart = np.searchsorted(pb, occupied, side="left")
    bend = np.searchsorted(pb, occupied, side="right")

    blocks = []
    for key, core, s, e in zip(occupied, core_groups, bstart, bend):
        cid = tuple(int(v) for v in np.unravel_index(key, (ncell,) * 3))
        blocks.append(Block(
            block_id=cid,
            core_min=np.asarray(cid, dtype=np.float64) * block_size,
            block_size=block_size,
            margin=margin,
            core_point_indices=np.sort(core),
            support_point_indices=pp[s:e].copy(),
        ))
    return blocks


def inside_core(block: Block, points: np.ndarray, slack: float = 1e-9) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return np.all((pts >= block.core_min - slack) & (pts <= block.core_max + slack), axis=1)


def merge_block_outputs(cloud: PointCloud, outputs) -> PointCloud:
    """Append each block's new points to ``cloud`` in ascending block order.

    ``outputs`` is an iterable of ``(block, new_positions, new_colors)`` with
    ``new_colors`` None for geometry-only clouds. The result does not depend on
    the order of ``outputs``.
    """
    outputs = sorted(outputs, key=lambda item: item[0].block_id)
    new_pos, new_col = [cloud.positions], [cloud.colors]
    for block, pts, cols in outputs:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if not np.all(inside_core(block, pts)):
            raise RuntimeError(f"block {block.block_id} emitted a point outside its core cell")
        new_pos.append(pts)
        if cloud.has_colors:
            if cols is None or len(cols) != len(pts):
                raise RuntimeError(f"block {block.block_id} colors do not match its points")
            new_col.append(np.asarray(cols).reshape(-1, 3).astype(cloud.colors.dtype))
    colors = np.concatenate(new_col) if cloud.has_colors else None
    return PointCloud(np.concatenate(new_pos), colors)
