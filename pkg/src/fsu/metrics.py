"""Geometry and color quality metrics for an upsampled cloud against a reference."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud

LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class NormalField:
    normals: np.ndarray
    k: int


@dataclass
class MetricsReport:
    p2p: float
    p2c: float
    c2c: float
    psnr_r: float = math.nan
    psnr_g: float = math.nan
    psnr_b: float = math.nan
    psnr_avg: float = math.nan
    hist_distance: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    def to_lines(self) -> list:
        return [f"{k}={_fmt(v)}" for k, v in self.to_dict().items()]


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


ORIENT_TOL = 1e-12


def _orient(normals):
    """Flip normals to a nonnegative z component; ties go to +y, then +x.

    Components within ORIENT_TOL of zero count as ties, so eigenvector
    round-off cannot pick the sign.
    """
    n = normals
    z, y, x = (np.abs(n[:, i]) <= ORIENT_TOL for i in (2, 1, 0))
    flip = np.where(~z, n[:, 2] < 0, np.where(~y, n[:, 1] < 0, ~x & (n[:, 0] < 0)))
    n[flip] *= -1
    return n


def estimate_normals(cloud: PointCloud, k: int = 12) -> NormalField:
    """Unit normal per point from the plane through its k nearest neighbours.

    The neighbourhood includes the point itself plus its ``k`` nearest
    neighbours. Neighbourhoods with zero spread get the normal (0, 0, 1).
    """
    pts = cloud.positions
    if len(pts) < k + 1:
        raise ValueError(f"need at least {k + 1} points for k={k}")
    _, idx = cKDTree(pts).query(pts, k=k + 1)
    nb = pts[idx]
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0].copy()
    spread = np.abs(centered).reshape(len(pts), -1).max(axis=1)
    degenerate = spread <= 1e-12 * (1.0 + np.abs(nb).reshape(len(pts), -1).max(axis=1))
    normals[degenerate] = (0.0, 0.0, 1.0)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return NormalField(_orient(normals), k)


def nearest(test: PointCloud, reference: PointCloud):
    dist, idx = cKDTree(reference.positions).query(test.positions)
    return dist, idx


def p2p_error(test: PointCloud, reference: PointCloud) -> float:
    """Mean distance from each test point to its nearest reference point."""
    dist, _ = nearest(test, reference)
    return float(np.mean(dist))


def p2c_error(test: PointCloud, reference: PointCloud, normals: NormalField) -> float:
    """Mean nearest-neighbour error projected on the reference point's normal."""
    _, idx = nearest(test, reference)
    err = test.positions - reference.positions[idx]
    return float(np.mean(np.abs(np.einsum("ij,ij->i", err, normals.normals[idx]))))


def angle_between(a, b) -> np.ndarray:
    """Unsigned angle in [0, pi/2] between the lines spanned by rows of a and b."""
    cross = np.linalg.norm(np.cross(a, b), axis=1)
    dot = np.abs(np.einsum("ij,ij->i", a, b))
    return np.arctan2(cross, dot)


def c2c_similarity(test: PointCloud, reference: PointCloud, k: int = 12,
                   test_normals: NormalField | None = None,
                   reference_normals: NormalField | None = None) -> float:
    """Mean of ``1 - 2*theta/pi`` over test points, theta being the angle
    between the test normal and the normal of the nearest reference point."""
    tn = test_normals or estimate_normals(test, k)
    rn = reference_normals or estimate_normals(reference, k)
    _, idx = nearest(test, reference)
    theta = angle_between(tn.normals, rn.normals[idx])
    return float(np.mean(1.0 - 2.0 * theta / math.pi))


def color_psnr(test_colors, truth_colors):
    """Per-channel PSNR (peak 255) and their mean.

    A channel without error reports inf; the mean is taken over finite
    channels and is inf only when all three are.
    """
    a = np.asarray(test_colors, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(truth_colors, dtype=np.float64).reshape(-1, 3)
    if a.shape != b.shape:
        raise ValueError(f"color arrays differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise ValueError("no colors to compare")
    mse = np.mean((a - b) ** 2, axis=0)
    psnr = [math.inf if m == 0 else 10.0 * math.log10(255.0 ** 2 / m) for m in mse]
    finite = [p for p in psnr if math.isfinite(p)]
    avg = sum(finite) / len(finite) if finite else math.inf
    return psnr[0], psnr[1], psnr[2], avg


def luma_histogram(colors) -> np.ndarray:
    """Normalized 256-bin histogram of Y = 0.299 R + 0.587 G + 0.114 B."""
    col = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    y = np.clip(np.rint(col @ LUMA), 0, 255).astype(np.int64)
    hist = np.bincount(y, minlength=256).astype(np.float64)
    return hist / max(hist.sum(), 1.0)


def histogram_distance(test, reference) -> float:
    """Euclidean distance between luma histograms; accepts clouds or color arrays."""
    tc = test.colors if isinstance(test, PointCloud) else test
    rc = reference.colors if isinstance(reference, PointCloud) else reference
    if tc is None or rc is None:
        raise ValueError("histogram distance needs colored input")
    return float(np.linalg.norm(luma_histogram(tc) - luma_histogram(rc)))


def evaluate_clouds(test: PointCloud, reference: PointCloud, k: int = 12) -> MetricsReport:
    """All metrics of ``test`` against ``reference``.

    Color PSNR needs point correspondence: it is reported when both clouds
    are colored and every test point coincides with a reference point
    (nearest distance zero); otherwise it is NaN.
    """
    rn = estimate_normals(reference, k)
    dist, idx = nearest(test, reference)
    report = MetricsReport(
        p2p=p2p_error(test, reference),
        p2c=p2c_error(test, reference, rn),
        c2c=c2c_similarity(test, reference, k, reference_normals=rn),
    )
    if test.has_colors and reference.has_colors:
        report.hist_distance = histogram_distance(test, reference)
        if np.all(dist == 0):
            r, g, b, avg = color_psnr(test.colors, reference.colors[idx])
            report.psnr_r, report.psnr_g, report.psnr_b, report.psnr_avg = r, g, b, avg
    return report
