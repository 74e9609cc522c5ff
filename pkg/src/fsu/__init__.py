"""Frequency-selective joint geometry and color upsampling of point clouds."""

from .core import FsuConfig, NormalizationTransform, PointCloud, denormalize, normalize
from .ply import read_ply, write_ply

__all__ = ["FsuConfig", "NormalizationTransform", "PointCloud", "denormalize",
           "normalize", "read_ply", "write_ply"]
__version__ = "0.1.0"
