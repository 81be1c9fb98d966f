import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from pytest import approx

from filmcrit.cli import main
from filmcrit.io import read_csv, read_points

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _cfg(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _load(name):
    return json.loads((CONFIGS / name).read_text())


def _table(path):
    meta, header, rows = read_csv(path)
    return meta, header, np.array([[float(v) if v not in ("true", "false") else v == "true" for v in r] for r in rows])


@pytest.fixture(autouse=True)
def _no_env(monkeypatch):
    monkeypatch.delenv("FILMCRIT_OUT", raising=False)


def test_model_writes_table_and_validity(tmp_path):
    out = tmp_path / "o"
    assert main(["model", "--config", str(CONFIGS / "al300.json"), "--out", str(out)]) == 0
    meta, header, rows = _table(out / "model.csv")
    assert header == ["t", "sqrt_1mt", "h_film_G", "h_cavity_G", "r"]
    assert meta["tool"] == "filmcrit" and meta["seed"] == "20051"
    assert len(rows) == 101
    # single-film signal: cavity column is the film column
    assert np.array_equal(rows[:, 2], rows[:, 3])
    assert rows[-1, 0] == 1.0 and rows[-1, 2] == 0.0
    validity = json.loads((out / "validity.json").read_text())
    assert validity["all_ok"] and not validity["waived"]


def test_model_zn_au_ratio_band(tmp_path):
    out = tmp_path / "o"
    assert main(["model", "--config", str(CONFIGS / "zn_au.json"), "--out", str(out)]) == 0
    _, _, rows = _table(out / "model.csv")
    r = rows[:, 4]
    assert np.all((r >= 5e-3) & (r <= 1e-2))
    assert np.all(rows[:-1, 3] < rows[:-1, 2])


def test_model_validity_violation_and_waiver(tmp_path):
    data = _load("al300.json")
    data["model_grid"] = {"t_min": 0.0, "t_max": 1.0, "n": 11}
    assert main(["model", "--config", _cfg(tmp_path, data), "--out", str(tmp_path / "a")]) == 1
    assert not (tmp_path / "a" / "model.csv").exists()
    data["thresholds"] = {"waive_validity": True}
    assert main(["model", "--config", _cfg(tmp_path, data), "--out", str(tmp_path / "b")]) == 2
    validity = json.loads((tmp_path / "b" / "validity.json").read_text())
    assert validity["waived"] and not validity["all_ok"]


def test_campaign_is_byte_identical_for_fixed_seed(tmp_path):
    cfg = str(CONFIGS / "al300.json")
    for d in ("a", "b"):
        assert main(["campaign", "--config", cfg, "--out", str(tmp_path / d), "--seed", "11"]) == 0
    for rel in ("points.csv", "campaign.json", "curves/curve_000.csv", "curves/curve_019.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert main(["campaign", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "12"]) == 0
    assert (tmp_path / "a" / "points.csv").read_bytes() != (tmp_path / "c" / "points.csv").read_bytes()


def test_noiseless_campaign_fit_round_trip(tmp_path):
    data = _load("al300.json")
    data["apparatus"].update(noise_sigma=0.0, current_rel_err=0.0)
    cfg = _cfg(tmp_path, data)
    out = tmp_path / "o"
    assert main(["campaign", "--config", cfg, "--out", str(out)]) == 0
    points, t_ref = read_points(out / "points.csv")
    assert t_ref == data["film"]["t_c"]
    assert main(["fit", "--config", cfg, "--out", str(out), str(out / "points.csv")]) == 0
    fit = json.loads((out / "fit.json").read_text())
    truth = data["film"]
    for key in ("t_c", "lambda0", "xi0"):
        assert fit["params"][key] == approx(truth[key], rel=1e-6)
    assert fit["converged"]
    _, header, band = _table(out / "band.csv")
    assert header == ["sqrt_1mt", "h_G", "h_model_G", "band_low_G", "band_high_G"]
    assert np.allclose(band[:, 1], band[:, 2], rtol=1e-8)


def test_fit_reference_scale_and_detect_from_fit(tmp_path):
    cfg = str(CONFIGS / "al300.json")
    out = tmp_path / "o"
    assert main(["campaign", "--config", cfg, "--out", str(out)]) == 0
    assert main(["fit", "--config", cfg, "--out", str(out), str(out / "points.csv")]) == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["params"]["t_c"] == approx(1.2932, abs=1e-3)
    assert 1e-3 < fit["residual_sensitivity"] < 1e-2
    assert fit["reference_comparison"]["lambda0"] == 104.3
    _, _, res = _table(out / "residuals.csv")
    assert len(res) == 20
    # single-film signal is never detectable
    assert main(["detect", "--config", cfg, "--out", str(out), str(out / "fit.json")]) == 0
    det = json.loads((out / "detect.json").read_text())
    assert det["snr"] == 0.0 and not det["detectable"]
    assert main(["detect", "--config", cfg, "--out", str(out), str(out / "points.csv")]) == 0


def test_fit_nonconvergence_exit_code(tmp_path):
    data = _load("al300.json")
    cfg = _cfg(tmp_path, data)
    out = tmp_path / "o"
    assert main(["campaign", "--config", cfg, "--out", str(out)]) == 0
    data["fit"]["max_iter"] = 1
    cfg = _cfg(tmp_path, data)
    assert main(["fit", "--config", cfg, "--out", str(out), str(out / "points.csv")]) == 2
    assert not json.loads((out / "fit.json").read_text())["converged"]


def test_detect_verdicts(tmp_path, capsys):
    out = tmp_path / "o"
    # the config file references its signal table by a relative path
    shutil.copy(CONFIGS / "zn_au_signal.txt", tmp_path)
    zn = _load("zn_au.json")
    assert main(["detect", "--config", _cfg(tmp_path, zn), "--out", str(out)]) == 0
    assert "detectable=yes" in capsys.readouterr().out
    al_au = dict(zn, signal={"kind": "power_law", "amplitude": 5e-4, "exponent": 0.0})
    assert main(["detect", "--config", _cfg(tmp_path, al_au), "--out", str(out)]) == 0
    assert "detectable=no" in capsys.readouterr().out


def test_budget_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["budget", "--config", str(CONFIGS / "zn_au.json"), "--out", str(out)]) == 0
    _, header, rows = _table(out / "budget.csv")
    assert header[:4] == ["t", "delta_t", "delta_T", "delta_theta_max"]
    assert len(rows) == 20
    assert np.all(np.diff(rows[:, 1]) < 0)
    worst = json.loads((out / "budget.json").read_text())["worst_case"]
    assert worst["delta_t"] == rows[:, 1].min()


def test_bridge_trace(tmp_path):
    out = tmp_path / "o"
    cfg = str(CONFIGS / "bridge_al10.json")
    assert main(["bridge", "--config", cfg, "--out", str(out)]) == 0
    meta, header, rows = _table(out / "trace.csv")
    assert header == ["field_G", "peak_T_K", "peak_height_mOhm", "significant"]
    assert meta["seed"] == "3"
    assert len(rows) == 10
    first = (out / "trace.csv").read_bytes()
    assert main(["bridge", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "trace.csv").read_bytes() == first


def test_env_output_override(tmp_path, monkeypatch):
    monkeypatch.setenv("FILMCRIT_OUT", str(tmp_path / "env"))
    assert main(["budget", "--config", str(CONFIGS / "zn_au.json")]) == 0
    assert (tmp_path / "env" / "budget.csv").exists()


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["model", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["fit", "--config", str(CONFIGS / "al300.json"), "--out", str(tmp_path)]) == 1
    assert main(["bridge", "--config", _cfg(tmp_path, {"film": _load("al300.json")["film"]}), "--out", str(tmp_path)]) == 1
    assert main(["model", "--config", _cfg(tmp_path, {"bogus": 1})]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["model"])
    assert exc.value.code == 1


def test_io_errors_exit_three(tmp_path):
    cfg = str(CONFIGS / "al300.json")
    assert main(["fit", "--config", cfg, "--out", str(tmp_path), str(tmp_path / "nope.csv")]) == 3
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["budget", "--config", cfg, "--out", str(blocker / "sub")]) == 3


def test_console_entry_point(tmp_path):
    out = tmp_path / "o"
    proc = subprocess.run(
        [sys.executable, "-m", "filmcrit.cli", "budget", "--config", str(CONFIGS / "zn_au.json"), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "budget.json").exists()
