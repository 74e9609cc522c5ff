import json
import math

import numpy as np
import pytest

from fsu import metrics
from fsu.cli import main
from fsu.core import FsuConfig, PointCloud
from fsu.pipeline import attr_protocol
from fsu.ply import read_ply, write_ply
from synth import terrain

FAST = ["--block-size", "0.1", "--margin", "0.025"]


@pytest.fixture(scope="module")
def cloud_path(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "terrain.ply"
    write_ply(terrain(3000, seed=0), p)
    return p


def test_scale_one_is_identity(cloud_path, tmp_path, capsys):
    out = tmp_path / "out.ply"
    assert main(["upsample", str(cloud_path), str(out), "--scale", "1", *FAST]) == 0
    assert read_ply(out).equals(read_ply(cloud_path))
    assert "points_out=3000" in capsys.readouterr().out


def test_upsample_writes_manifest(cloud_path, tmp_path):
    out = tmp_path / "out.ply"
    assert main(["upsample", str(cloud_path), str(out), *FAST, "--seed", "5"]) == 0
    man = json.loads((tmp_path / "out.ply.manifest.json").read_text())
    assert man["config"] == FsuConfig(block_size=0.1, support_margin=0.025, seed=5).to_dict()
    assert man["points_in"] == 3000 and man["points_out"] == len(read_ply(out))
    assert 2.5 * 3000 <= man["points_out"] <= 4 * 3000
    assert {"read", "partition", "upsample", "merge", "write"} <= set(man["timings_ms"])
    up = read_ply(out)
    assert up.has_colors
    np.testing.assert_array_equal(up.positions[:3000], read_ply(cloud_path).positions)


def test_same_seed_byte_identical(cloud_path, tmp_path):
    a, b = tmp_path / "a.ply", tmp_path / "b.ply"
    for p in (a, b):
        assert main(["upsample", str(cloud_path), str(p), *FAST, "--seed", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_ascii_and_double_outputs(cloud_path, tmp_path):
    a, d = tmp_path / "a.ply", tmp_path / "d.ply"
    assert main(["upsample", str(cloud_path), str(a), *FAST, "--format", "ascii"]) == 0
    assert main(["upsample", str(cloud_path), str(d), *FAST, "--double"]) == 0
    assert a.read_bytes().startswith(b"ply\nformat ascii 1.0")
    np.testing.assert_array_equal(read_ply(a).positions, read_ply(tmp_path / "d.ply").positions.astype(np.float32))


def test_geometry_only_input(tmp_path, caplog):
    src = tmp_path / "geo.ply"
    write_ply(PointCloud(terrain(2000, seed=1).positions), src)
    out = tmp_path / "geo_up.ply"
    with caplog.at_level("INFO", logger="fsu"):
        assert main(["upsample", str(src), str(out), *FAST]) == 0
    up = read_ply(out)
    assert not up.has_colors and len(up) > 2000
    assert any("no colors" in r.message for r in caplog.records)


def test_evaluate_self(cloud_path, tmp_path, capsys):
    rep = tmp_path / "r.txt"
    js = tmp_path / "r.json"
    fig = tmp_path / "h.png"
    assert main(["evaluate", str(cloud_path), str(cloud_path), "--report", str(rep),
                 "--report-json", str(js), "--figure", str(fig)]) == 0
    kv = dict(line.split("=") for line in rep.read_text().splitlines())
    assert float(kv["p2p"]) == 0 and float(kv["p2c"]) == 0 and float(kv["c2c"]) == 1
    assert float(kv["hist_distance"]) == 0 and kv["psnr_avg"] == "inf"
    assert json.loads(js.read_text())["psnr_avg"] == "inf"
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_evaluate_known_shift(tmp_path):
    g = np.arange(10) * 1.0
    pos = np.array([[x, y, 0] for x in g for y in g])
    ref, test = tmp_path / "ref.ply", tmp_path / "test.ply"
    write_ply(PointCloud(pos), ref)
    write_ply(PointCloud(pos + [0.25, 0, 0]), test)
    rep = tmp_path / "r.txt"
    assert main(["evaluate", str(test), str(ref), "--report", str(rep)]) == 0
    kv = dict(line.split("=") for line in rep.read_text().splitlines())
    assert float(kv["p2p"]) == 0.25
    assert kv["psnr_avg"] == "nan"


def test_evaluate_matches_library(cloud_path, tmp_path):
    up = tmp_path / "up.ply"
    assert main(["upsample", str(cloud_path), str(up), *FAST]) == 0
    js = tmp_path / "r.json"
    assert main(["evaluate", str(up), str(cloud_path), "--knn", "8", "--report-json", str(js)]) == 0
    got = json.loads(js.read_text())
    test, ref = read_ply(up), read_ply(cloud_path)
    assert got["p2p"] == metrics.p2p_error(test, ref)
    assert got["p2c"] == metrics.p2c_error(test, ref, metrics.estimate_normals(ref, 8))
    assert got["c2c"] == metrics.c2c_similarity(test, ref, 8)
    assert got["hist_distance"] == metrics.histogram_distance(test, ref)


def test_attr_protocol_reproducible(cloud_path, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["attr-protocol", str(cloud_path), *FAST, "--seed", "9",
                     "--report-json", str(p)]) == 0
    a, b = (json.loads(p.read_text()) for p in paths)
    assert a == b and len(a["runs"]) == 3
    lib = attr_protocol(read_ply(cloud_path), FsuConfig(block_size=0.1, support_margin=0.025, seed=9))
    assert a["psnr_avg"] == lib["psnr_avg"] and a["hist_distance"] == lib["hist_distance"]
    assert all(r["queries"] == 2250 for r in a["runs"])


def test_attr_protocol_colorless_fails(tmp_path, capsys):
    src = tmp_path / "geo.ply"
    write_ply(PointCloud(terrain(200, seed=2).positions), src)
    assert main(["attr-protocol", str(src)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("fsu: error:") and err.count("\n") == 1


def test_sweep_table_and_figures(cloud_path, tmp_path):
    table = tmp_path / "sweep.tsv"
    prefix = tmp_path / "fig"
    assert main(["sweep", str(cloud_path), "--block-sizes", "0.1,0.2", "--ratios", "0,0.5",
                 "--table", str(table), "--figures", str(prefix)]) == 0
    rows = [line.split("\t") for line in table.read_text().splitlines()]
    assert rows[0] == ["N", "M_over_N", "M", "c2c", "hist_distance"]
    assert len(rows) == 5
    assert [float(r[2]) for r in rows[1:]] == [0.0, 0.05, 0.0, 0.1]
    for r in rows[1:]:
        assert 0 <= float(r[3]) <= 1 and math.isfinite(float(r[4]))
    for suffix in ("_c2c.png", "_hist.png"):
        assert (tmp_path / f"fig{suffix}").stat().st_size > 0


@pytest.mark.parametrize("argv", [
    ["upsample", "/nonexistent/in.ply", "/tmp/out.ply"],
    ["evaluate", "/nonexistent/a.ply", "/nonexistent/b.ply"],
])
def test_error_exit(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("fsu: error:")


def test_invalid_flags(cloud_path, tmp_path, capsys):
    assert main(["upsample", str(cloud_path), str(tmp_path / "o.ply"), "--block-size", "-1"]) == 1
    with pytest.raises(SystemExit):
        main(["upsample"])


def test_malformed_ply(tmp_path, capsys):
    bad = tmp_path / "bad.ply"
    bad.write_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nend_header\n1\n")
    assert main(["evaluate", str(bad), str(bad)]) == 1


def test_parallel_matches_serial():
    from fsu.pipeline import upsample_cloud
    cloud = terrain(3000, seed=8)
    cfg = FsuConfig(block_size=0.1, support_margin=0.025, seed=1)
    serial, _ = upsample_cloud(cloud, cfg, workers=1)
    parallel, _ = upsample_cloud(cloud, cfg, workers=3)
    assert serial.equals(parallel)
