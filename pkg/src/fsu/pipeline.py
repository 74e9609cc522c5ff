"""End-to-end runs: joint upsampling, the color transfer protocol and parameter sweeps."""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics
from .attributes import attribute_transfer_eval, predict_colors, upsample_block_attributes
from .core import FsuConfig, PointCloud, normalize
from .geometry import block_rng, upsample_block_geometry
from .partition import merge_block_outputs, partition

log = logging.getLogger(__name__)


@dataclass
class RunManifest:
    input_path: str
    output_path: str
    config: dict
    seed: int
    points_in: int
    points_out: int
    blocks: int = 0
    workers: int = 1
    timings_ms: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def block_targets(blocks, scale_factor: float) -> np.ndarray:
    """Points to insert per block, summing to ``round((s - 1) * n)``.

    Each block gets the floor of its proportional share; the remainder goes
    to the blocks with the largest fractional shares, ties by block order.
    """
    core = np.array([len(b.core_point_indices) for b in blocks], dtype=np.float64)
    share = (scale_factor - 1.0) * core
    base = np.floor(share).astype(np.int64)
    total = int(round((scale_factor - 1.0) * core.sum()))
    extra = max(total - int(base.sum()), 0)
    if extra:
        order = np.argsort(-(share - base), kind="stable")
        base[order[:extra]] += 1
    return base


_STATE = {}


def _init_worker(cloud, cfg):
    _STATE["cloud"] = cloud
    _STATE["cfg"] = cfg


def _process_blocks(jobs):
    cloud, cfg = _STATE["cloud"], _STATE["cfg"]
    out = []
    for block, target in jobs:
        rng = block_rng(cfg.seed, block.block_id)
        frame, _, pts = upsample_block_geometry(block, cloud, cfg, int(target), rng)
        cols = None
        if cloud.has_colors:
            if len(pts):
                cols = upsample_block_attributes(block, cloud, frame, pts, cfg)
            else:
                cols = np.zeros((0, 3), dtype=np.uint8)
        out.append((block, pts, cols))
    return out


def _chunks(items, size):
    return [items[i:i + size] for i in range(0, len(items), size)]


def upsample_cloud(cloud: PointCloud, cfg: FsuConfig, workers: int = 1):
    """Upsample geometry (and colors when present) by ``cfg.scale_factor``.

    Original points come first and unchanged, followed by new points in
    ascending block order. Returns ``(cloud, stats)`` where ``stats`` holds
    block count and stage timings in milliseconds.
    """
    timings = {}
    t0 = time.perf_counter()
    norm, transform = normalize(cloud)
    blocks = partition(norm, cfg.block_size, cfg.support_margin)
    targets = block_targets(blocks, cfg.scale_factor)
    timings["partition"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    jobs = [(b, t) for b, t in zip(blocks, targets) if t > 0]
    if workers > 1 and len(jobs) > 1:
        chunks = _chunks(jobs, max(1, math.ceil(len(jobs) / (4 * workers))))
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(norm, cfg)) as pool:
            results = [r for part in pool.map(_process_blocks, chunks) for r in part]
    else:
        _init_worker(norm, cfg)
        results = _process_blocks(jobs)
        _STATE.clear()
    timings["upsample"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    merged = merge_block_outputs(norm, results)
    new = transform.invert(merged.positions[len(cloud):])
    out = PointCloud(np.concatenate([cloud.positions, new]), merged.colors)
    timings["merge"] = 1e3 * (time.perf_counter() - t0)
    return out, {"blocks": len(blocks), "timings_ms": timings}


def _run_seed(seed, run):
    return int(np.random.SeedSequence([int(seed) % 2**64, run]).generate_state(1, np.uint64)[0])


def attr_protocol(reference: PointCloud, cfg: FsuConfig, runs: int = 3, seed=None) -> dict:
    """Color transfer evaluation averaged over ``runs`` random splits.

    Each run keeps ``1 / scale_factor`` of the points with colors, predicts
    the colors of the rest and scores PSNR and luma histogram distance on
    the predicted points only.
    """
    if not reference.has_colors:
        raise ValueError("colorless input: the color protocol needs RGB attributes")
    seed = cfg.seed if seed is None else seed
    keep = 1.0 / cfg.scale_factor
    per_run = []
    for run in range(runs):
        train, queries, truth = attribute_transfer_eval(reference, keep, _run_seed(seed, run))
        pred = predict_colors(train, queries, cfg)
        r, g, b, avg = metrics.color_psnr(pred, truth)
        per_run.append({"run": run, "psnr_r": r, "psnr_g": g, "psnr_b": b,
                        "psnr_avg": avg,
                        "hist_distance": metrics.histogram_distance(pred, truth),
                        "queries": int(len(queries))})
    summary = {k: float(np.mean([p[k] for p in per_run]))
               for k in ("psnr_r", "psnr_g", "psnr_b", "psnr_avg", "hist_distance")}
    summary["runs"] = per_run
    return summary


def geometry_protocol(reference: PointCloud, cfg: FsuConfig, k: int = 12, seed=None,
                      workers: int = 1) -> dict:
    """Downsample by the scale factor, upsample back, score against the reference."""
    seed = cfg.seed if seed is None else seed
    n = len(reference)
    n_keep = max(int(round(n / cfg.scale_factor)), 3)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) % 2**64, 7]))
    low = reference.subset(np.sort(rng.choice(n, size=n_keep, replace=False)))
    up, _ = upsample_cloud(PointCloud(low.positions), cfg, workers)
    rn = metrics.estimate_normals(reference, k)
    return {
        "points_low": n_keep,
        "points_up": len(up),
        "p2p": metrics.p2p_error(up, reference),
        "p2c": metrics.p2c_error(up, reference, rn),
        "c2c": metrics.c2c_similarity(up, reference, k, reference_normals=rn),
    }


def sweep(reference: PointCloud, block_sizes, ratios, cfg: FsuConfig, k: int = 12,
          runs: int = 1, workers: int = 1):
    """Rows of (N, M/N, M, C2C, histogram distance) over the grid of block
    sizes and relative support margins."""
    rows = []
    for n_block in block_sizes:
        for ratio in ratios:
            c = replace(cfg, block_size=float(n_block), support_margin=float(n_block) * float(ratio))
            geo = geometry_protocol(reference, c, k, workers=workers)
            hist = math.nan
            if reference.has_colors:
                hist = attr_protocol(reference, c, runs)["hist_distance"]
            log.info("N=%g M/N=%g C2C=%.4f hist=%.4g", n_block, ratio, geo["c2c"], hist)
            rows.append({"N": float(n_block), "M_over_N": float(ratio),
                         "M": c.support_margin, "c2c": geo["c2c"],
                         "hist_distance": hist})
    return rows
