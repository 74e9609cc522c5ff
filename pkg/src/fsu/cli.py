"""Command line interface: ``fsu upsample|evaluate|attr-protocol|sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import metrics
from .core import FsuConfig
from .pipeline import RunManifest, attr_protocol, sweep, upsample_cloud
from .ply import PlyError, read_ply, write_ply

log = logging.getLogger("fsu")


def _add_model_flags(p):
    d = FsuConfig()
    p.add_argument("--block-size", type=float, default=d.block_size,
                   help="core block side N in normalized units (default %(default)s)")
    p.add_argument("--margin", type=float, default=d.support_margin,
                   help="support margin M in normalized units (default %(default)s)")
    p.add_argument("--scale", type=float, default=d.scale_factor,
                   help="upsampling factor (default %(default)s)")
    p.add_argument("--iterations", type=int, default=d.max_iterations)
    p.add_argument("--max-freq", type=int, default=d.max_freq,
                   help="basis frequencies per axis (default %(default)s)")
    p.add_argument("--sigma", type=float, default=d.spectral_decay,
                   help="spectral decay (default %(default)s)")
    p.add_argument("--rho", type=float, default=d.spatial_decay,
                   help="spatial decay (default %(default)s)")
    p.add_argument("--residual-threshold", type=float, default=d.residual_threshold)
    p.add_argument("--seed", type=int, default=d.seed)


def _config(args) -> FsuConfig:
    return FsuConfig(
        block_size=args.block_size, support_margin=args.margin,
        spectral_decay=args.sigma, spatial_decay=args.rho, max_freq=args.max_freq,
        max_iterations=args.iterations, residual_threshold=args.residual_threshold,
        scale_factor=args.scale, seed=args.seed)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_value(x) for x in v]
    return v


def _write_reports(flat: dict, args, nested=None):
    lines = [f"{k}={metrics._fmt(v)}" for k, v in flat.items()]
    print("\n".join(lines))
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.report_json:
        Path(args.report_json).write_text(
            json.dumps(_json_value(nested or flat), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def cmd_upsample(args):
    cfg = _config(args)
    t0 = time.perf_counter()
    cloud = read_ply(args.input)
    t_read = 1e3 * (time.perf_counter() - t0)
    if not cloud.has_colors:
        log.info("input has no colors; running geometry-only upsampling")
    out, stats = upsample_cloud(cloud, cfg, workers=args.workers)
    t0 = time.perf_counter()
    write_ply(out, args.output, "binary_little_endian" if args.format == "binary" else "ascii",
              double=args.double)
    t_write = 1e3 * (time.perf_counter() - t0)
    manifest = RunManifest(
        input_path=str(args.input), output_path=str(args.output), config=cfg.to_dict(),
        seed=cfg.seed, points_in=len(cloud), points_out=len(out), blocks=stats["blocks"],
        workers=args.workers,
        timings_ms={"read": t_read, **stats["timings_ms"], "write": t_write})
    manifest_path = args.manifest or f"{args.output}.manifest.json"
    Path(manifest_path).write_text(manifest.to_json() + "\n", encoding="utf-8")
    print(f"points_in={len(cloud)}")
    print(f"points_out={len(out)}")
    print(f"manifest={manifest_path}")
    return manifest


def cmd_evaluate(args):
    test = read_ply(args.test)
    ref = read_ply(args.reference)
    report = metrics.evaluate_clouds(test, ref, args.knn)
    _write_reports(report.to_dict(), args)
    if args.figure and test.has_colors and ref.has_colors:
        from .plotting import plot_luma_histograms
        plot_luma_histograms(test.colors, ref.colors, args.figure)
    return report


def cmd_attr_protocol(args):
    cfg = _config(args)
    ref = read_ply(args.reference)
    summary = attr_protocol(ref, cfg, runs=args.runs)
    flat = {k: v for k, v in summary.items() if k != "runs"}
    _write_reports(flat, args, nested=summary)
    return summary


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_sweep(args):
    cfg = _config(args)
    ref = read_ply(args.input)
    rows = sweep(ref, _floats(args.block_sizes), _floats(args.ratios), cfg,
                 k=args.knn, runs=args.runs, workers=args.workers)
    fields = ["N", "M_over_N", "M", "c2c", "hist_distance"]
    out = open(args.table, "w", newline="", encoding="utf-8") if args.table else sys.stdout
    try:
        writer = csv.DictWriter(out, fields, delimiter="\t", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: metrics._fmt(r[k]) for k in fields})
    finally:
        if args.table:
            out.close()
    if args.figures:
        from .plotting import plot_sweep
        for path in plot_sweep(rows, args.figures):
            print(f"figure={path}", file=sys.stderr)
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsu", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("upsample", help="joint geometry and color upsampling")
    p.add_argument("input")
    p.add_argument("output")
    _add_model_flags(p)
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")
    p.add_argument("--double", action="store_true", help="write float64 positions")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--manifest", help="manifest path (default <output>.manifest.json)")
    p.set_defaults(func=cmd_upsample)

    p = sub.add_parser("evaluate", help="quality metrics of a test cloud against a reference")
    p.add_argument("test")
    p.add_argument("reference")
    p.add_argument("--knn", type=int, default=12, help="neighbours for normal estimation")
    p.add_argument("--report", help="write key=value report")
    p.add_argument("--report-json", help="write JSON report")
    p.add_argument("--figure", help="write luma histogram overlay (PNG)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("attr-protocol", help="color transfer evaluation on random splits")
    p.add_argument("reference")
    _add_model_flags(p)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--report")
    p.add_argument("--report-json")
    p.set_defaults(func=cmd_attr_protocol)

    p = sub.add_parser("sweep", help="block size / support margin grid")
    p.add_argument("input")
    _add_model_flags(p)
    p.add_argument("--block-sizes", default="0.02,0.03,0.04,0.08")
    p.add_argument("--ratios", default="0,0.25,0.5,0.75,1")
    p.add_argument("--knn", type=int, default=12)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--table", help="write the tab-separated table here instead of stdout")
    p.add_argument("--figures", help="path prefix for PNG figures")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, PlyError, ValueError) as exc:
        print(f"fsu: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
