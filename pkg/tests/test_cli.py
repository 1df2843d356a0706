import json

import numpy as np
import pytest

from ehgtensor import io
from ehgtensor.cli import main, parse_rank, parse_value

PIPELINE_CFG = """\
[pipeline]
mode = simulated

[simulate]
seed = 3
duration_s = 120

[evaluate]
methods = pca,hosvd,cp-als,vb-tucker
runs = 2

[params.pca]
k = 2

[params.hosvd]
ranks = 2,2,2

[params.cp-als]
rank = 2

[params.vb-tucker]
init_rank = 4,4,8
max_iters = 30
"""


def files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file() and p.name != "manifest.json"}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "7", "--duration-s", "120", "--out", str(d)]) == 0
    return d


def test_parse_helpers():
    assert parse_rank("4,4,8") == (4, 4, 8)
    assert parse_rank("3") == 3
    assert parse_value("true") is True and parse_value("0.5") == 0.5 and parse_value("a,b") == ("a", "b")


def test_simulate_is_deterministic(sim_dir, tmp_path):
    assert main(["simulate", "--seed", "7", "--duration-s", "120", "--out", str(tmp_path)]) == 0
    assert files(tmp_path) == files(sim_dir)
    y, fs = io.read_tensor(sim_dir / "y.ehgt")
    assert y.shape == (4, 4, 1200) and fs == 10.0
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["outputs"]["y.ehgt"] == io.file_digest(sim_dir / "y.ehgt")
    assert "numpy" in manifest["versions"]


def test_decompose_vb_tucker(sim_dir, tmp_path):
    rc = main(["decompose", "--in", str(sim_dir / "y.ehgt"), "--out", str(tmp_path), "--method", "vb-tucker",
               "--init-rank", "4,4,8", "--max-iters", "20"])
    assert rc == 0
    y, _ = io.read_tensor(sim_dir / "y.ehgt")
    parts = {k: io.read_tensor(tmp_path / f"{k}.ehgt")[0] for k in "sxe"}
    assert np.allclose(parts["s"] + parts["x"] + parts["e"], y, rtol=0, atol=1e-12)
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["method"] == "vb-tucker" and "elbo_trace" in diag and "wall_time_s" not in diag


def test_decompose_bipolar_has_no_residual(sim_dir, tmp_path):
    assert main(["decompose", "--in", str(sim_dir / "y.ehgt"), "--out", str(tmp_path), "--method", "bipolar"]) == 0
    assert io.read_tensor(tmp_path / "s.ehgt")[0].shape == (3, 4, 1200)
    assert not (tmp_path / "e.ehgt").exists()


def test_preprocess_and_scalogram(sim_dir, tmp_path):
    out = tmp_path / "pre.ehgt"
    assert main(["preprocess", "--in", str(sim_dir / "y.ehgt"), "--out", str(out), "--trim-seconds", "10"]) == 0
    x, fs = io.read_tensor(out)
    assert x.shape == (4, 4, 1100) and fs == 10.0
    csv = tmp_path / "scal.csv"
    assert main(["scalogram", "--in", str(out), "--out", str(csv), "--electrode", "1,2", "--n-freqs", "8"]) == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 9 and lines[0].startswith("freq_hz,0.0,0.1")
    assert len(lines[1].split(",")) == 1101


def test_evaluate_with_truth(sim_dir, tmp_path):
    rc = main(["evaluate", "--in", str(sim_dir / "y.ehgt"), "--out", str(tmp_path), "--truth", str(sim_dir),
               "--annotations", str(sim_dir / "annotations.json"), "--methods", "pca,bipolar", "--runs", "1"])
    assert rc == 0
    rows = json.loads((tmp_path / "report.json").read_text())["rows"]
    assert [r["method"] for r in rows] == ["pca", "bipolar"]
    assert all(r["error"] is None and r["snr_mean_db"] is not None for r in rows)
    assert "pca" in (tmp_path / "report.txt").read_text()


def test_evaluate_empty_method_list(sim_dir, tmp_path):
    rc = main(["evaluate", "--in", str(sim_dir / "y.ehgt"), "--out", str(tmp_path), "--truth", str(sim_dir), "--methods", ""])
    assert rc == 0
    assert json.loads((tmp_path / "report.json").read_text())["rows"] == []


def test_unknown_flag_is_argument_error(capsys):
    assert main(["simulate", "--out", "x", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand():
    assert main([]) == 2


def test_bad_file_is_format_error(tmp_path, capsys):
    (tmp_path / "bad.ehgt").write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNKJUNKJUNK")
    assert main(["decompose", "--in", str(tmp_path / "bad.ehgt"), "--out", str(tmp_path / "o"), "--method", "pca"]) == 3
    assert "magic" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["decompose", "--in", str(tmp_path / "none.ehgt"), "--out", str(tmp_path), "--method", "pca"]) == 5


def test_invalid_parameter_is_argument_error(sim_dir, tmp_path):
    assert main(["decompose", "--in", str(sim_dir / "y.ehgt"), "--out", str(tmp_path), "--method", "pca", "--k", "99"]) == 2


def test_pipeline_needs_one_source(tmp_path):
    assert main(["pipeline", "--out", str(tmp_path)]) == 2


def test_pipeline_config_and_manifest_rerun(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(PIPELINE_CFG)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["pipeline", "--config", str(cfg), "--out", str(first)]) == 0
    assert "vb-tucker" in capsys.readouterr().out
    assert main(["pipeline", "--manifest", str(first / "manifest.json"), "--out", str(second), "-q"]) == 0
    a, b = files(first), files(second)
    assert set(a) >= {"y.ehgt", "report.json", "report.txt", "annotations.json"}
    assert a == b
    ma = json.loads((first / "manifest.json").read_text())
    mb = json.loads((second / "manifest.json").read_text())
    assert ma["outputs"] == mb["outputs"] and ma["config"] == mb["config"]
    rows = {r["method"]: r for r in json.loads((first / "report.json").read_text())["rows"]}
    assert rows["cp-als"]["runs"] == 2 and rows["pca"]["runs"] == 1


def test_pipeline_bad_mode(tmp_path):
    (tmp_path / "c.cfg").write_text("[pipeline]\nmode = live\n")
    assert main(["pipeline", "--config", str(tmp_path / "c.cfg"), "--out", str(tmp_path / "o")]) == 2


def test_pipeline_bad_manifest(tmp_path):
    (tmp_path / "m.json").write_text("{}")
    assert main(["pipeline", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")]) == 3
