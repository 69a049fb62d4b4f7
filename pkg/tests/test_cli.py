import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from floquet_amp import cli
from floquet_amp.fano import multiline_response_squared
from floquet_amp.specfun import bessel_j

CONFIGS = Path(__file__).parent.parent / "configs"
DESK = ["--set", "spin.t1n=2.0", "--set", "spin.t2n=2.0", "--set", "test.b_y=0.01",
        "--set", "sim.duration=36.0", "--set", "sim.transient_skip=10.0", "--set", "sim.record_every=5"]


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ROOT_ENV, str(tmp_path / "runs"))
    return tmp_path / "runs"


def run(argv, out=None):
    if out is not None:
        argv = [*argv, "--out", str(out)]
    return cli.main(argv)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def manifest(d):
    return json.loads((Path(d) / "manifest.json").read_text())


# -- profile --------------------------------------------------------------------------

def test_profile_outputs_and_manifest(tmp_path):
    assert run(["profile"], tmp_path / "p") == 0
    man = manifest(tmp_path / "p")
    assert man["command"] == "profile"
    assert man["outputs"] == ["profile.csv", "profile.json", "profile_direct.csv", "profile_direct.json"]
    for name in man["outputs"]:
        assert (tmp_path / "p" / name).exists()
    assert {"started", "finished", "code_version", "config"} <= set(man)
    header, data = read_csv(tmp_path / "p" / "profile.csv")
    assert header == ["nu_hz", "eta"]
    _, direct = read_csv(tmp_path / "p" / "profile_direct.csv")
    assert np.array_equal(data[:, 0], direct[:, 0])
    # seven lines with the default drive
    peaks = [k for k in range(-3, 4)
             if np.min(np.abs(data[:, 0] - (10.039 + 1.5 * k))) < 1e-9]
    assert len(peaks) == 7


def test_profile_fig2_caption_fields(tmp_path):
    argv = ["profile", "--set", "drive.b0=853.0", "--set", "drive.b_ac=397.0", "--set", "drive.nu_ac=1.5"]
    assert run(argv, tmp_path / "p") == 0
    _, data = read_csv(tmp_path / "p" / "profile.csv")
    eta = data[:, 1]
    inner = (eta[1:-1] > eta[:-2]) & (eta[1:-1] >= eta[2:]) & (eta[1:-1] > 5.0)
    assert np.count_nonzero(inner) == 7


def test_profile_undriven_single_resonance(tmp_path):
    assert run(["profile", "--set", "drive.b_ac=0.0"], tmp_path / "p") == 0
    _, data = read_csv(tmp_path / "p" / "profile.csv")
    assert data[:, 0].min() > 10.039 - 0.2 and data[:, 0].max() < 10.039 + 0.2
    assert int(np.argmax(data[:, 1])) == len(data) // 2


def test_profile_step_override_exact(tmp_path):
    assert run(["profile", "--step", "0.002", "--set", "drive.b_ac=0.0"], tmp_path / "p") == 0
    with open(tmp_path / "p" / "profile.csv") as fh:
        nus = [float(r.split(",")[0]) for r in fh.read().splitlines()[1:]]
    steps = {round(b - a, 12) for a, b in zip(nus, nus[1:])}
    assert steps == {0.002}


def test_profile_deterministic(tmp_path):
    assert run(["profile"], tmp_path / "a") == 0
    assert run(["profile"], tmp_path / "b") == 0
    for name in ("profile.csv", "profile.json", "profile_direct.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_default_run_directory_under_env_root(output_root):
    assert run(["profile"]) == 0
    dirs = list(output_root.iterdir())
    assert len(dirs) == 1 and dirs[0].name.startswith("profile-")
    assert (dirs[0] / "manifest.json").exists()


def test_invalid_config_names_field(tmp_path, capsys):
    assert run(["profile", "--set", "spin.t2n=-1"], tmp_path / "p") == 1
    err = capsys.readouterr().err
    assert "spin.t2n" in err and "relaxation time must be positive" in err
    assert not (tmp_path / "p").exists()


def test_bad_override_and_missing_config(tmp_path, capsys):
    assert run(["profile", "--set", "spin.nope=1"], tmp_path / "p") == 1
    assert "spin.nope" in capsys.readouterr().err
    assert run(["profile", "--config", str(tmp_path / "missing.toml")]) == 1


# -- simulate -----------------------------------------------------------------------------

def test_simulate_seven_sidebands(tmp_path):
    assert run(["simulate", *DESK], tmp_path / "s") == 0
    d = tmp_path / "s"
    assert manifest(d)["outputs"] == ["timeseries.csv", "timeseries.bin", "spectrum.csv",
                                      "spectrum.json", "sidebands.json"]
    table = json.loads((d / "sidebands.json").read_text())
    assert [r["k"] for r in table] == list(range(-3, 4))
    assert all({"k", "nu_hz", "amplitude", "eta"} <= set(r) for r in table)
    u = 3.12
    eta = {r["k"]: r["eta"] for r in table}
    for k in range(-3, 4):
        assert eta[k] / eta[1] == pytest.approx(abs(bessel_j(k, u) / bessel_j(1, u)), rel=0.03)
    header, _ = read_csv(d / "spectrum.csv")
    assert header == ["frequency_hz", "amplitude"]


def test_simulate_zero_test_field_empty_table(tmp_path):
    assert run(["simulate", *DESK, "--set", "test.b_y=0.0"], tmp_path / "s") == 0
    assert json.loads((tmp_path / "s" / "sidebands.json").read_text()) == []


def test_simulate_dt_violation(tmp_path, capsys):
    assert run(["simulate", *DESK, "--set", "sim.dt=0.01"], tmp_path / "s") == 1
    assert "dt" in capsys.readouterr().err


def test_simulate_binary_matches_csv(tmp_path):
    from floquet_amp.bloch_sim import TimeSeries

    assert run(["simulate", *DESK, "--set", "sim.duration=12.0"], tmp_path / "s") == 0
    series = TimeSeries.from_bytes((tmp_path / "s" / "timeseries.bin").read_bytes())
    header, data = read_csv(tmp_path / "s" / "timeseries.csv")
    assert header[0] == "t" and header[1:] == list(series.channels)
    assert np.allclose(data[:, 1], series[header[1]], rtol=1e-11, atol=1e-300)


# -- sweep ---------------------------------------------------------------------------------

def test_sweep_u_curves(tmp_path):
    argv = ["sweep", "--axis", "u", "--start", "0", "--stop", "8", "--steps", "81",
            "--pairs", "1,0;1,-1;1,1", "--jobs", "1"]
    assert run(argv, tmp_path / "w") == 0
    header, data = read_csv(tmp_path / "w" / "sweep.csv")
    assert header == ["u", "eta_k1_l0", "eta_k1_l-1", "eta_k1_l1", "total_response"]
    u = data[:, 0]
    j0, j1, j2 = (np.array([bessel_j(n, x) for x in u]) for n in (0, 1, 2))
    assert np.allclose(data[:, 1], 110 * j1 * j1, rtol=1e-9, atol=1e-12)
    assert np.allclose(data[:, 2], 110 * np.abs(j1 * j0), rtol=1e-9, atol=1e-12)
    assert np.allclose(data[:, 3], 110 * np.abs(j1 * j2), rtol=1e-9, atol=1e-12)


def test_sweep_single_step(tmp_path):
    assert run(["sweep", "--steps", "1", "--start", "2.0", "--jobs", "1"], tmp_path / "w") == 0
    _, data = read_csv(tmp_path / "w" / "sweep.csv")
    assert data.shape[0] == 1 and data[0, 0] == 2.0


def test_sweep_parallel_order_preserved(tmp_path):
    base = ["sweep", "--start", "0", "--stop", "8", "--steps", "57"]
    assert run([*base, "--jobs", "1"], tmp_path / "a") == 0
    assert run([*base, "--jobs", "3"], tmp_path / "b") == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_sweep_fig4_minimum_location(tmp_path):
    assert run(["sweep", "--config", str(CONFIGS / "fig4_deamplification.toml"), "--jobs", "1"],
               tmp_path / "w") == 0
    _, data = read_csv(tmp_path / "w" / "sweep.csv")
    i = int(np.argmin(data[:, -1]))
    assert abs(data[i, 0] - 3.50) < 0.01
    assert data[i, -1] < 1.0


def test_sweep_other_axes(tmp_path):
    assert run(["sweep", "--axis", "nu", "--start", "11.4", "--stop", "11.7", "--steps", "31",
                "--pairs", "1,0", "--jobs", "1"], tmp_path / "n") == 0
    header, data = read_csv(tmp_path / "n" / "sweep.csv")
    assert header[0] == "nu_hz"
    assert data[int(np.argmax(data[:, 1])), 0] == pytest.approx(11.539, abs=0.006)
    assert run(["sweep", "--axis", "nu_ac", "--start", "1.0", "--stop", "3.0", "--steps", "5",
                "--jobs", "1"], tmp_path / "a") == 0
    assert read_csv(tmp_path / "a" / "sweep.csv")[0][0] == "nu_ac_hz"


@pytest.mark.parametrize("argv", [["--steps", "0"], ["--pairs", "1;x"], ["--axis", "nu", "--start", "-1"]])
def test_sweep_input_errors(tmp_path, argv):
    assert run(["sweep", *argv, "--jobs", "1"], tmp_path / "w") == 1


# -- fit ---------------------------------------------------------------------------------------

TABLE_ETA = [-12.47, -21.86, -9.574, -8.532, -7.219, -18.71, -8.121]
TABLE_NU = [5.539 + 1.5 * k for k in range(7)]


def write_table_csv(path, squared=False):
    gamma = 1 / (math.pi * 34.05)
    offsets = np.arange(-3 * gamma, 3 * gamma + 5e-4, 1e-3)
    nu = np.concatenate([c + offsets for c in TABLE_NU])
    y = multiline_response_squared(nu, TABLE_ETA, TABLE_NU, 34.05)
    if not squared:
        y = np.sqrt(y)
    with open(path, "w") as fh:
        fh.write("nu_hz,response\n")
        for a, b in zip(nu, y):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
    return path


def test_fit_table_round_trip(tmp_path):
    data = write_table_csv(tmp_path / "data.csv")
    assert run(["fit", str(data), "--config", str(CONFIGS / "table2_fit.toml")], tmp_path / "f") == 0
    result = json.loads((tmp_path / "f" / "fit.json").read_text())
    assert result["converged"]
    assert result["t2n"] == pytest.approx(34.05, rel=1e-3)
    for line, eta, nu in zip(result["lines"], TABLE_ETA, TABLE_NU):
        assert line["eta_k0"] == pytest.approx(eta, rel=1e-3)
        assert line["nu_k"] == pytest.approx(nu, abs=1e-4)
    header, curve = read_csv(tmp_path / "f" / "fit_curve.csv")
    assert header == ["nu_hz", "response_squared", "response"]
    assert manifest(tmp_path / "f")["status"] == "ok"


def test_fit_squared_input(tmp_path):
    data = write_table_csv(tmp_path / "data.csv", squared=True)
    assert run(["fit", str(data), "--squared"], tmp_path / "f") == 0


def test_fit_non_convergence_exit_code(tmp_path):
    data = write_table_csv(tmp_path / "data.csv")
    assert run(["fit", str(data), "--set", "fit.max_iter=1"], tmp_path / "f") == 2
    assert manifest(tmp_path / "f")["status"] == "not converged"


def test_fit_malformed_csv_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("nu_hz,response\n10.0,1.0\n10.1,oops\n10.2,1.0\n")
    assert run(["fit", str(bad)], tmp_path / "f") == 1
    assert "bad.csv:3" in capsys.readouterr().err
    bad.write_text("nu_hz,response\n10.0,1.0,3\n")
    assert run(["fit", str(bad)], tmp_path / "f") == 1


def test_fit_data_outside_comb(tmp_path, capsys):
    far = tmp_path / "far.csv"
    far.write_text("".join(f"{100 + 0.01 * i},1.0\n" for i in range(50)))
    assert run(["fit", str(far)], tmp_path / "f") == 1
    assert "no comb line" in capsys.readouterr().err


# -- verify -----------------------------------------------------------------------------------

def test_verify_default_passes(tmp_path, capsys):
    assert run(["verify"], tmp_path / "v") == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert report["passed"] and report["schema"] == "floquet-amp/verify/1"


def test_verify_negative_control(tmp_path, capsys):
    assert run(["verify", "--fast", "--corrupt-t2n", "1.5"], tmp_path / "v") == 3
    out = capsys.readouterr().out
    assert "FAIL  fwhm" in out
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    assert failed == ["fwhm"]


def test_verify_report_stable(tmp_path):
    assert run(["verify", "--fast"], tmp_path / "a") == 0
    assert run(["verify", "--fast"], tmp_path / "b") == 0
    a = (tmp_path / "a" / "verify.json").read_bytes()
    assert a == (tmp_path / "b" / "verify.json").read_bytes()
    report = json.loads(a)
    assert set(report) == {"schema", "passed", "checks"}
    assert all(set(c) == {"name", "deviation", "tolerance", "passed", "detail"} for c in report["checks"])


def test_validate_dump_round_trips(capsys):
    from floquet_amp.config import ExperimentConfig, loads

    assert cli.main(["validate", "--dump"]) == 0
    text = capsys.readouterr().out
    assert loads(text.split("\n", 1)[1]) == ExperimentConfig()
