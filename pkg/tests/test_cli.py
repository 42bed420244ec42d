import json
import math

import numpy as np
import pytest

from cisim.cli import ConfigError, main, parse_config_file
from cisim.tomography import DensityGrid

FAST = "kappa_hz = 1000\nomega_hz = 667\nn_max = 12\nq_points = 41\n"


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_config(tmp_path):
    path = write_config(tmp_path, "# comment\nkappa_hz = 900  # inline\n\nn_max = 20\n")
    cfg = parse_config_file(path)
    assert cfg == {"kappa_hz": "900", "n_max": "20"}
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, "bogus_key = 3\n", "bad.cfg"))
    with pytest.raises(ConfigError):
        parse_config_file(write_config(tmp_path, "no equals sign\n", "bad2.cfg"))
    with pytest.raises(ConfigError):
        parse_config_file(str(tmp_path / "missing.cfg"))


def test_invalid_kappa_exits_2(tmp_path, capsys):
    cfgp = write_config(tmp_path, "kappa_hz = -3\n")
    code = main(["simulate", "--config", cfgp, "--out", str(tmp_path / "o")])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_shot_mode_requires_seed(tmp_path, capsys):
    code = main(["reconstruct", "--config", write_config(tmp_path, FAST),
                 "--shots", "100", "--times", "0",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_malformed_window_exits_2(tmp_path):
    cfgp = write_config(tmp_path, FAST + "window_lo = 0.002\n")
    assert main(["find-t", "--config", cfgp, "--out", str(tmp_path / "o")]) == 2
    cfgp2 = write_config(tmp_path, FAST + "window_lo = 0.003\nwindow_hi = 0.002\n",
                         "w2.cfg")
    assert main(["find-t", "--config", cfgp2, "--out", str(tmp_path / "o")]) == 2


def test_simulate_t0_matches_gaussian(tmp_path):
    cfgp = write_config(tmp_path, FAST)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfgp, "--times", "0",
                 "--out", str(out)]) == 0
    dens = DensityGrid.from_csv(out / "density2d_00.csv")
    ratio = 1000.0 / 667.0
    g1 = np.exp(-((dens.q1_axis + ratio) ** 2))
    g2 = np.exp(-(dens.q2_axis**2))
    ref = np.outer(g1, g2) / np.pi
    assert np.max(np.abs(dens.values - ref)) < 1e-4  # n_max=12 truncation
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert len(manifest["outputs"]) == 2
    assert len(manifest["config_sha256"]) == 64


def test_simulate_deterministic(tmp_path):
    cfgp = write_config(tmp_path, FAST)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", cfgp, "--times", "0,0.0005",
                     "--out", str(out)]) == 0
        outs.append((out / "density2d_01.csv").read_bytes()
                    + (out / "manifest.json").read_bytes())
    assert outs[0] == outs[1]


def test_reconstruct_1d_default_grid(tmp_path):
    cfgp = write_config(tmp_path, FAST + "mode = 1d\n")
    out = tmp_path / "rec"
    assert main(["reconstruct", "--config", cfgp, "--times", "0",
                 "--out", str(out)]) == 0
    rows = (out / "char_1d_00.csv").read_text().strip().split("\n")
    assert rows[0] == "beta1,beta2,re,im,p_down,p_up,shots"
    assert len(rows) == 1 + 26
    betas = [float(r.split(",")[1]) for r in rows[1:]]
    assert min(betas) == 0.0 and max(betas) == 5.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert "baseline_correction" in manifest["results"]["points"][0]


def test_reconstruct_2d_shot_mode(tmp_path):
    cfgp = write_config(tmp_path, FAST)
    out = tmp_path / "rec2"
    assert main(["reconstruct", "--config", cfgp, "--times", "0",
                 "--shots", "200", "--seed", "4", "--out", str(out)]) == 0
    rows = (out / "char_2d_00.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 11 * 11
    assert rows[1].split(",")[6] == "200"
    dens = DensityGrid.from_csv(out / "density_2d_00.csv")
    assert abs(dens.norm - 1.0) < 0.2  # shot noise allows a loose bound


def test_reconstruct_matches_simulate(tmp_path):
    cfg = "kappa_hz = 1000\nomega_hz = 667\nn_max = 14\nq_points = 41\n"
    cfgp = write_config(tmp_path, cfg)
    sim_out, rec_out = tmp_path / "sim", tmp_path / "rec"
    assert main(["simulate", "--config", cfgp, "--times", "0.0008",
                 "--out", str(sim_out)]) == 0
    assert main(["reconstruct", "--config", cfgp, "--times", "0.0008",
                 "--out", str(rec_out)]) == 0
    ref = DensityGrid.from_csv(sim_out / "density2d_00.csv")
    rec = DensityGrid.from_csv(rec_out / "density_2d_00.csv")
    dq = ref.q1_axis[1] - ref.q1_axis[0]
    l1 = np.abs(ref.values - rec.values).sum() * dq * dq
    assert l1 < 0.05


def test_numerical_failure_exits_3(tmp_path, capsys):
    # calibration scan that cannot bracket the injected offset
    cfgp = write_config(tmp_path, "injected_offset_hz = 5000\nscan_span_hz = 200\n")
    code = main(["calibrate-demo", "--config", cfgp, "--seed", "1",
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_find_t_reports(tmp_path, capsys):
    cfgp = write_config(tmp_path, "n_max = 24\n")
    out = tmp_path / "ft"
    assert main(["find-t", "--config", cfgp, "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "T = " in captured
    manifest = json.loads((out / "manifest.json").read_text())
    t_ms = manifest["results"]["t_interference_s"] * 1e3
    assert math.isclose(t_ms, 1.59, abs_tol=0.1)


def test_calibrate_demo(tmp_path, capsys):
    out = tmp_path / "cal"
    assert main(["calibrate-demo", "--seed", "3", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert abs(manifest["results"]["error_hz"]) < 67.0
    scan = (out / "calibration_scan.csv").read_text().strip().split("\n")
    assert scan[0] == "offset_hz,p_up"


def test_compare_gp_command(tmp_path):
    cfgp = write_config(tmp_path, "n_max = 20\nq_points = 61\nt_interference = 1.6075e-3\n")
    out = tmp_path / "gp"
    assert main(["compare-gp", "--config", cfgp, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    res = manifest["results"]
    assert res["contrast_full"] > res["contrast_no_gp"]
    assert (out / "density_full.csv").exists()
    assert (out / "density_no_gp.csv").exists()
