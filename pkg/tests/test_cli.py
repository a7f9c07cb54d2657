"""CLI: dispatch, config handling, output formats, determinism."""

import json

import numpy as np
import pytest

from cloaklab.cli import main


def read_csv(path):
    meta, header, rows = [], None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            meta.append(line)
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows


def test_region_grid_output(tmp_path):
    rc = main([
        "region-grid", "--eps", "0.5", "--k-eps", "2", "--re=-3:3",
        "--im=-3:1", "--step", "0.05", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    meta, header, rows = read_csv(tmp_path / "region_grid.csv")
    assert any("eps = 0.5" in m for m in meta)
    assert header[:3] == ["re_k", "im_k", "label"]
    # boundary geometry at Im k = -0.25: K spans |b| <= a <= arc(b)
    b = -0.25
    arc = np.sqrt(b * b + b + 4.0)
    xs = [float(r[0]) for r in rows
          if abs(float(r[1]) - b) < 1e-9 and r[2] == "K_compact" and float(r[0]) > 0]
    assert min(xs) == pytest.approx(abs(b), abs=0.05 + 1e-9)
    assert max(xs) == pytest.approx(arc, abs=0.05 + 1e-9)


def test_region_grid_deterministic(tmp_path):
    args = ["region-grid", "--eps", "0.5", "--k-eps", "2", "--re", "0:1",
            "--im=-1:0", "--step", "0.1", "--out-dir", str(tmp_path)]
    assert main(args) == 0
    first = (tmp_path / "region_grid.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "region_grid.csv").read_bytes() == first


def test_scatter_json_schema(tmp_path):
    rc = main([
        "scatter", "--eps", "0.5", "--k-eps", "2", "--dim", "2", "--k", "1",
        "--n-far", "16", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    doc = json.loads((tmp_path / "scatter.json").read_text())
    assert doc["command"] == "scatter"
    assert doc["config"]["eps"] == 0.5
    assert doc["N"] >= 14
    assert len(doc["far_field"]) == 16
    assert {"index", "gamma", "s"} <= set(doc["modes"][0])
    assert doc["norms"]["l2_scattered_2_R"] > 0


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("eps = 0.5\nk_eps = 2.0\ndim = 2\nstep = 0.2\n")
    rc = main([
        "region-grid", "--config", str(cfg), "--re", "0:1", "--im=-1:0",
        "--step", "0.5", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    meta, _, _ = read_csv(tmp_path / "region_grid.csv")
    # CLI flag overrides the file value
    assert any("step = 0.5" in m for m in meta)


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("eps = 0.5\nmystery_knob = 7\n")
    rc = main(["region-grid", "--config", str(cfg), "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "mystery_knob" in capsys.readouterr().err


def test_validation_error_exit_code(tmp_path):
    rc = main(["scatter", "--eps", "1.5", "--k-eps", "2", "--dim", "2",
               "--out-dir", str(tmp_path)])
    assert rc == 1


def test_numerical_failure_exit_code(tmp_path, capsys):
    # at the resonance (k = k_eps) the contrast is O(1) and ||T|| > 0.9:
    # the fixed point refuses and the CLI reports a numerical failure
    rc = main(["ls-check", "--eps", "0.5", "--k-eps", "2", "--dim", "2",
               "--k", "2", "--n-nodes", "48", "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "numerical failure" in capsys.readouterr().err


def test_teig_scan_csv(tmp_path):
    rc = main([
        "teig-scan", "--eps", "0.5", "--k-eps", "2", "--n", "1",
        "--line=im=-0.484", "--re", "1.80:1.88", "--step", "0.02",
        "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    meta, header, rows = read_csv(tmp_path / "teig_scan.csv")
    assert header == ["re_k", "im_k", "re_f", "im_f", "abs_f"]
    assert len(rows) == 5
    assert any("normalization" in m for m in meta)


def test_ls_check_json(tmp_path):
    rc = main([
        "ls-check", "--eps", "0.1", "--dim", "2", "--k", "1",
        "--n-nodes", "64", "--out-dir", str(tmp_path),
    ])
    assert rc == 0
    doc = json.loads((tmp_path / "ls_check.json").read_text())
    assert doc["t_norm"] < 0.5
    assert doc["comparison_to_modesolver"] < 1e-3
    assert doc["iterations"] >= 1
