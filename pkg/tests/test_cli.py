import json
import subprocess
import sys

import numpy as np
import pytest

from lrvlab.cli import SCHEMA, run
from lrvlab.io import format_series, parse_series
from lrvlab.selection import preset, suggested_estimator


@pytest.fixture
def series(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(300) + np.linspace(0, 2, 300)
    x[150:] += 5
    path = tmp_path / "x.csv"
    path.write_text(format_series(x, ["x"]))
    return path, x


def _json(capsys):
    out = capsys.readouterr().out
    payload = json.loads(out)
    assert payload["schema"] == SCHEMA
    return payload


def test_estimate_default(series, capsys):
    path, x = series
    assert run(["estimate", str(path)]) == 0
    payload = _json(capsys)
    expected = suggested_estimator(x, preset("paper-default"))
    assert payload["value"] == expected.value
    assert payload["ell"] == expected.config_used.ell and payload["regime"] == "optimal"
    assert payload["config"]["m"] == 3 and "rcp" in payload


def test_estimate_fixed_bandwidth(series, capsys):
    path, _ = series
    assert run(["estimate", str(path), "--ell", "5", "--m", "2", "--kernel", "bartlett", "--lambda", "1"]) == 0
    payload = _json(capsys)
    assert payload["ell"] == 5 and payload["h"] == 5 and payload["config"]["kernel"] == "bartlett"


def test_estimate_csv_and_out(series, tmp_path):
    path, _ = series
    out = tmp_path / "v.csv"
    assert run(["estimate", str(path), "--format", "csv", "--out", str(out), "--preset", "v2*"]) == 0
    data, _ = parse_series(out.read_text())
    assert data.shape == (1, 1) and data[0, 0] > 0


def test_estimate_two_columns(tmp_path, capsys):
    x = np.random.default_rng(1).standard_normal((400, 2))
    x[:, 1] = x[:, 0] + 0.1 * x[:, 1]
    path = tmp_path / "xy.csv"
    path.write_text(format_series(x))
    assert run(["estimate", str(path)]) == 0
    payload = _json(capsys)
    assert np.array(payload["value"]).shape == (2, 2)
    assert payload["long_run_correlation"] > 0.9


def test_center_round_trip(series, tmp_path):
    path, x = series
    centered, report = tmp_path / "c.csv", tmp_path / "r.json"
    assert run(["center", str(path), "--out", str(centered), "--report", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["schema"] == SCHEMA and rep["reports"]["N"] >= 1
    out2 = tmp_path / "v2.json"
    out1 = tmp_path / "v1.json"
    assert run(["estimate", str(centered), "--no-rcp", "--out", str(out2)]) == 0
    assert run(["estimate", str(path), "--out", str(out1)]) == 0
    one_shot = json.loads(out1.read_text())["value"]
    assert json.loads(out2.read_text())["value"] == one_shot


def test_center_report_to_stderr(series, capsys):
    path, _ = series
    assert run(["center", str(path)]) == 0
    captured = capsys.readouterr()
    data, header = parse_series(captured.out)
    assert header == ["x"] and data.shape == (300, 1)
    assert json.loads(captured.err)["command"] == "center"


def test_ks(series, capsys):
    path, _ = series
    assert run(["test", "ks", str(path), "--lrv", "auto"]) == 0
    payload = _json(capsys)
    assert payload["critical_value"] == pytest.approx(1.358, abs=1e-3)
    assert payload["reject"] is True and payload["lrv"]["config"]["m"] == 3
    assert run(["test", "ks", str(path), "--lrv", "2.0", "--level", "0.01"]) == 0
    payload = _json(capsys)
    assert payload["critical_value"] == pytest.approx(1.6276, abs=1e-3)


def test_wz(series, capsys):
    path, _ = series
    assert run(["test", "wz", str(path), "--lrv", "1", "--reps", "300", "--seed", "4"]) == 0
    a = _json(capsys)
    assert run(["test", "wz", str(path), "--lrv", "1", "--reps", "300", "--seed", "4"]) == 0
    assert _json(capsys) == a
    assert a["k_n"] == 31 and a["test"] == "wz" and a["reject"] is True


def test_trend_and_scb(series, capsys, tmp_path):
    path, _ = series
    assert run(["trend", str(path), "--b", "0.1"]) == 0
    payload = _json(capsys)
    assert len(payload["mu_hat"]) == 300
    out = tmp_path / "band.csv"
    assert run(["scb", str(path), "--reps", "200", "--format", "csv", "--out", str(out)]) == 0
    data, header = parse_series(out.read_text())
    assert header == ["t", "mu_hat", "lower", "upper"] and data.shape == (201, 4)
    assert np.all(data[:, 2] < data[:, 3])


def test_simulate_json_and_toml(tmp_path, capsys):
    cfg = {"experiment": "mse", "noise": {"kind": "ar", "coeffs": [0.3]}, "mean": {"kind": "h1a", "xi": 1.0},
           "n": 100, "reps": 4, "estimators": ["v0*", "v3*"]}
    jpath = tmp_path / "c.json"
    jpath.write_text(json.dumps(cfg))
    tpath = tmp_path / "c.toml"
    tpath.write_text(
        'experiment = "mse"\nn = 100\nreps = 4\nestimators = ["v0*", "v3*"]\n'
        '[noise]\nkind = "ar"\ncoeffs = [0.3]\n[mean]\nkind = "h1a"\nxi = 1.0\n'
    )
    assert run(["simulate", "--config", str(jpath), "--seed", "7", "--format", "csv"]) == 0
    a = capsys.readouterr().out
    assert run(["simulate", "--config", str(tpath), "--seed", "7", "--format", "csv", "--workers", "2"]) == 0
    assert capsys.readouterr().out == a
    assert a.splitlines()[0] == "estimator,n,xi,mse,se,bias,mean"
    assert run(["simulate", "--config", str(jpath), "--seed", "8", "--format", "csv"]) == 0
    assert capsys.readouterr().out != a


def test_bench(capsys):
    assert run(["bench", "--n", "200", "--reps", "2"]) == 0
    assert _json(capsys)["seconds_per_call"] > 0


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["estimate"],
        ["estimate", "x.csv", "--preset", "v9*"],
        ["test", "ks"],
        ["test"],
        ["estimate", "x.csv", "--bogus"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(argv) == 1
    assert capsys.readouterr().err


def test_bad_lrv_flag_is_usage_error(series, capsys):
    path, _ = series
    assert run(["test", "ks", str(path), "--lrv", "big"]) == 1


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n1\n2\nNA\n")
    assert run(["estimate", str(bad)]) == 2
    assert "row 4, column 1" in capsys.readouterr().err
    assert run(["estimate", str(tmp_path / "absent.csv")]) == 2
    short = tmp_path / "short.csv"
    short.write_text("1\n2\n3\n")
    assert run(["estimate", str(short)]) == 2
    assert run(["test", "ks", str(short), "--lrv", "-1"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert run(["simulate", "--config", str(cfg)]) == 2


def test_console_script(series):
    path, _ = series
    proc = subprocess.run([sys.executable, "-m", "lrvlab.cli", "estimate", str(path)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["schema"] == SCHEMA
    proc = subprocess.run([sys.executable, "-m", "lrvlab.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "lrvlab" in proc.stdout
