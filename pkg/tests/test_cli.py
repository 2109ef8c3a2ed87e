import json
import os

import numpy as np
import pytest

from hessode.cli import main

from helpers import FIG8_T, FIG8_Y0_INIT, KEPLER_Y0_INIT, TWO_PI

HO3_Y0_ARG = "50,10,50,-20,10,-0.1"
CORPUS = os.path.join(os.path.dirname(__file__), "data", "notation_listings.md")


def run(*argv):
    return main(list(argv))


def test_hessian_ho3_flat(tmp_path):
    out = tmp_path / "h.json"
    code = run("hessian", "--system", "ho3", "--y0", HO3_Y0_ARG,
               "--t-final", str(TWO_PI), "--method", "bp2",
               "--rtol", "1e-12", "--atol", "1e-12", "--out", str(out))
    assert code == 0
    data = json.loads(out.read_text())
    assert data["schema"] == "hessode/1"
    assert max(abs(v) for v in data["eigenvalues"]) < 1e-8
    assert data["n_flat"] == 6
    assert len(data["hessian"]) == 36
    assert (tmp_path / "h.json.manifest.json").exists()


def test_hessian_dp_vs_bp2_kepler(tmp_path):
    y0 = "0.35104504,0.70553162,-1.16135482,-0.23750538,0.59517623,-0.1199457"
    results = {}
    for method in ("dp", "bp2"):
        out = tmp_path / f"{method}.json"
        assert run("hessian", "--system", "kepler", "--y0", y0,
                   "--t-final", str(TWO_PI), "--method", method,
                   "--out", str(out)) == 0
        results[method] = np.array(json.loads(out.read_text())["hessian"])
    assert np.max(np.abs(results["dp"] - results["bp2"])) < 1e-6


def test_hessian_zero_time_all_zero(tmp_path):
    out = tmp_path / "z.json"
    assert run("hessian", "--system", "kepler", "--y0",
               "1,0,0,0,1,0", "--t-final", "0", "--method", "dp",
               "--out", str(out)) == 0
    data = json.loads(out.read_text())
    assert data["value"] == 0.0
    assert max(abs(g) for g in data["gradient"]) == 0.0
    assert max(abs(h) for h in data["hessian"]) == 0.0


def test_hessian_fd_method(tmp_path):
    out = tmp_path / "fd.json"
    assert run("hessian", "--system", "randpoly", "--dim", "4", "--seed", "5",
               "--y0", "0.1,-0.2,0.3,0.4", "--t-final", "0.2",
               "--method", "fd", "--rtol", "1e-8", "--atol", "1e-8",
               "--out", str(out)) == 0
    data = json.loads(out.read_text())
    assert len(data["hessian"]) == 16


def test_hessian_rerun_bitwise(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    args = ["hessian", "--system", "kepler", "--y0",
            ",".join(str(v) for v in KEPLER_Y0_INIT),
            "--t-final", "1.0", "--method", "bp2"]
    assert run(*args, "--out", str(out1)) == 0
    assert run(*args, "--out", str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_json_roundtrip(tmp_path):
    out = tmp_path / "r.json"
    assert run("hessian", "--system", "ho3", "--y0", HO3_Y0_ARG,
               "--t-final", "1.0", "--method", "dp", "--out", str(out)) == 0
    data = json.loads(out.read_text())
    assert json.loads(json.dumps(data)) == data


def test_find_orbit_kepler(tmp_path):
    out = tmp_path / "orbit.json"
    code = run("find-orbit", "--system", "kepler",
               "--y0-init", ",".join(str(v) for v in KEPLER_Y0_INIT),
               "--t-final", str(TWO_PI), "--rtol", "1e-12", "--atol", "1e-12",
               "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["nc_value"] < 1e-14
    assert rep["n_calls"] <= 30
    assert rep["n_flat"] == 5


def test_find_orbit_nonconvergence_exit_4(tmp_path):
    out = tmp_path / "orbit.json"
    code = run("find-orbit", "--system", "p3bp",
               "--y0-init=" + ",".join(str(v) for v in FIG8_Y0_INIT),
               "--t-final", str(FIG8_T), "--rtol", "1e-12", "--atol", "1e-12",
               "--max-iters", "1", "--out", str(out))
    assert code == 4
    data = json.loads(out.read_text())
    assert "best" in data and "error" in data


def test_find_orbit_with_deformation(tmp_path):
    out = tmp_path / "def.json"
    code = run("find-orbit", "--system", "p3bp",
               "--y0-init=" + ",".join(str(v) for v in FIG8_Y0_INIT),
               "--t-final", str(FIG8_T), "--rtol", "1e-12", "--atol", "1e-12",
               "--deform-eig", "4", "--deform-step=-0.02",
               "--out", str(out))
    assert code == 0
    data = json.loads(out.read_text())
    assert data["deformed"]["nc_value"] < 1e-14


def test_plot_svg(tmp_path):
    out = tmp_path / "o.svg"
    assert run("plot", "--system", "ho3", "--y0", HO3_Y0_ARG,
               "--t-final", str(TWO_PI), "--markers", "12",
               "--out", str(out)) == 0
    doc = out.read_text()
    assert doc.startswith("<svg")
    assert doc.count("<polyline") == 1
    assert doc.count("<circle") == 12


def test_plot_three_tracks_no_markers(tmp_path):
    out = tmp_path / "p3.svg"
    assert run("plot", "--system", "p3bp",
               "--y0=" + ",".join(str(v) for v in FIG8_Y0_INIT),
               "--t-final", str(FIG8_T), "--markers", "0",
               "--out", str(out)) == 0
    doc = out.read_text()
    assert doc.count("<polyline") == 3
    assert "<circle" not in doc


def test_plot_bad_projection_exit_2(tmp_path):
    code = run("plot", "--system", "p3bp",
               "--y0=" + ",".join(str(v) for v in FIG8_Y0_INIT),
               "--t-final", "1.0", "--projection", "0,5",
               "--out", str(tmp_path / "x.svg"))
    assert code == 2


def test_y0_from_file(tmp_path):
    vec = tmp_path / "y0.txt"
    vec.write_text("50 10 50\n-20, 10, -0.1\n")
    out = tmp_path / "h.json"
    assert run("hessian", "--system", "ho3", "--y0", f"@{vec}",
               "--t-final", "1.0", "--method", "dp", "--out", str(out)) == 0


def test_bench_small(tmp_path):
    out = tmp_path / "bench.csv"
    code = run("bench", "--dims", "4,6", "--repeats", "1",
               "--methods", "dp,bp2", "--out", str(out))
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "dim,method,best_seconds,checksum,agreement"
    body = [ln.split(",") for ln in lines[1:]]
    agreements = [float(r[4]) for r in body if r[1] == "dp_vs_bp2"]
    assert len(agreements) == 2
    assert all(a < 1e-9 for a in agreements)


def test_bench_checksum_repeat_invariant(tmp_path):
    outs = []
    for repeats in ("1", "2"):
        out = tmp_path / f"b{repeats}.csv"
        assert run("bench", "--dims", "5", "--repeats", repeats,
                   "--methods", "dp", "--out", str(out)) == 0
        rows = [ln.split(",") for ln in out.read_text().strip().splitlines()[1:]]
        outs.append([r[3] for r in rows if r[1] == "dp"])
    assert outs[0] == outs[1]


def test_tcd_check_corpus_exit_0(capsys):
    assert run("tcd-check", "--mode", "fenced", CORPUS) == 0


def test_tcd_check_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.tcd"
    bad.write_text("w = ^(a[) -> a\n")
    assert run("tcd-check", bad.as_posix()) == 1
    out = capsys.readouterr().out
    assert "error[PARSE]" in out
    assert f"{bad.as_posix()}:1:" in out


def test_tcd_check_multiple_files_grouped(tmp_path, capsys):
    good1 = tmp_path / "g1.tcd"
    good1.write_text("a[] = 1\n")
    bad = tmp_path / "bad.tcd"
    bad.write_text("w = ^(a[) -> a\n")
    good2 = tmp_path / "g2.tcd"
    good2.write_text("b[] = 2\n")
    code = run("tcd-check", good1.as_posix(), bad.as_posix(), good2.as_posix())
    assert code == 1
    out = capsys.readouterr().out
    assert out.count("error[") == 1
    assert bad.as_posix() in out


def test_tcd_check_json_output(tmp_path, capsys):
    bad = tmp_path / "bad.tcd"
    bad.write_text("w = $\n")
    assert run("tcd-check", "--json", bad.as_posix()) == 1
    data = json.loads(capsys.readouterr().out)
    assert data[0]["severity"] == "error"
    assert data[0]["file"] == bad.as_posix()


def test_tcd_check_unreadable_exit_2():
    assert run("tcd-check", "/nonexistent/file.tcd") == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        run("hessian", "--system", "nosuch", "--y0", "1", "--t-final", "1",
            "--out", "/tmp/x.json")
    assert exc.value.code == 2
