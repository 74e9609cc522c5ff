"""Point cloud container, normalization and the shared upsampling configuration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Ordered 3D positions with optional 8-bit RGB colors.

    Positions are stored as an ``(n, 3)`` float64 array. Colors, when present,
    are an ``(n, 3)`` array with one row per position; they are kept as
    integers at the file boundary and may be real-valued inside the pipeline.
    """

    positions: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("point positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.colors is not None:
            col = np.asarray(self.colors).reshape(-1, 3)
            if len(col) != len(pos):
                raise ValueError(
                    f"colors has {len(col)} rows but positions has {len(pos)}")
            col = col.copy()
            col.setflags(write=False)
            object.__setattr__(self, "colors", col)

    def __len__(self):
        return len(self.positions)

    @property
    def has_colors(self) -> bool:
        return self.colors is not None

    def subset(self, indices) -> "PointCloud":
        indices = np.asarray(indices, dtype=np.intp)
        colors = None if self.colors is None else self.colors[indices]
        return PointCloud(self.positions[indices], colors)

    def equals(self, other: "PointCloud") -> bool:
        if not np.array_equal(self.positions, other.positions):
            return False
        if self.has_colors != other.has_colors:
            return False
        return not self.has_colors or np.array_equal(self.colors, other.colors)


@dataclass(frozen=True)
class NormalizationTransform:
    """Uniform scaling ``normalized = (p - offset) / scale``."""

    offset: tuple
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("normalization scale must be positive")

    def apply(self, positions: np.ndarray) -> np.ndarray:
        return (np.asarray(positions, dtype=np.float64) - np.asarray(self.offset)) / self.scale

    def invert(self, positions: np.ndarray) -> np.ndarray:
        return np.asarray(positions, dtype=np.float64) * self.scale + np.asarray(self.offset)


@dataclass(frozen=True)
class FsuConfig:
    """Tunables of the upsampler.

    ``block_size`` and ``support_margin`` are in normalized units, so the
    defaults 0.02 / 0.005 correspond to N=2, M=0.5 on a cloud expanded to
    [0, 100]^3.
    """

    block_size: float = 0.02
    support_margin: float = 0.005
    spectral_decay: float = 0.8
    spatial_decay: float = 0.7
    max_freq: int = 8
    max_iterations: int = 32
    residual_threshold: float = 0.0
    scale_factor: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not self.block_size > 0:
            raise ValueError("block_size must be > 0")
        if not self.support_margin >= 0:
            raise ValueError("support_margin must be >= 0")
        if not 0 < self.spectral_decay < 1:
            raise ValueError("spectral_decay must lie in (0, 1)")
        if not 0 < self.spatial_decay <= 1:
            raise ValueError("spatial_decay must lie in (0, 1]")
        if self.max_freq < 1:
            raise ValueError("max_freq must be a positive integer")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.residual_threshold < 0:
            raise ValueError("residual_threshold must be >= 0")
        if not self.scale_factor >= 1:
            raise ValueError("scale_factor must be >= 1")
        if not -(2**63) <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def normalize(cloud: PointCloud):
    """Map ``cloud`` into the unit cube with one scale for all axes.

    The longest bounding-box extent maps to 1; the minimum corner maps to
    the origin. Returns the normalized cloud and the transform that undoes it.
    """
    if len(cloud) == 0:
        raise ValueError("empty input")
    lo = cloud.positions.min(axis=0)
    extent = float((cloud.positions.max(axis=0) - lo).max())
    scale = extent if extent > 0 else 1.0
    t = NormalizationTransform(offset=tuple(float(v) for v in lo), scale=scale)
    out = np.clip(t.apply(cloud.positions), 0.0, 1.0)
    return PointCloud(out, cloud.colors), t


def denormalize(cloud: PointCloud, t: NormalizationTransform) -> PointCloud:
    return PointCloud(t.invert(cloud.positions), cloud.colors)
