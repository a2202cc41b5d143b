import json
import math
import subprocess
import sys

import pytest

from profilecov.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def metrics(out: str) -> dict:
    rows = [line.split() for line in out.strip().splitlines()[1:]]
    return {name: value for name, value in rows}


def test_analyze_density_in_km2(capsys):
    code, out, _ = run(capsys, "analyze", "--density-km2", "80", "--rs", "80", "--tau", "0", "--r", "0")
    assert code == 0
    # 1 - exp(-8e-5 * pi * 80^2), evaluated with mpmath
    assert float(metrics(out)["nu_tau"]) == pytest.approx(0.79981141638717724, abs=1e-9)


def test_density_units_equivalent(capsys):
    _, a, _ = run(capsys, "analyze", "--density-km2", "5.3206", "--m", "2")
    _, b, _ = run(capsys, "analyze", "--lambda", repr(5.3206 * 1e-6), "--m", "2")
    assert a == b


def test_analyze_empty_network(capsys):
    code, out, _ = run(capsys, "analyze", "--lambda", "0", "--m", "2")
    m = metrics(out)
    assert code == 0
    for key in ("nu_tau", "mu_tau", "beta_tau", "nu_m_tau", "mu_m_tau", "beta_m_tau"):
        assert float(m[key]) == 0.0
    assert float(m["vacancy_tau"]) == 1.0
    assert m["eta_tau"] == "undefined"


def test_no_profile_equals_zero_tolerance(capsys):
    _, a, _ = run(capsys, "analyze", "--no-profile", "--tau", "10", "--m", "3")
    _, b, _ = run(capsys, "analyze", "--tau", "0", "--m", "3")
    assert a == b


def test_analyze_json_embeds_config(capsys):
    _, out, _ = run(capsys, "analyze", "--format", "json", "--m", "1")
    doc = json.loads(out)
    assert doc["config"] == {"lambda": 1e-5, "lambda_km2": pytest.approx(10.0), "rs": 150.0, "tau": 5.0,
                             "A": 1.0, "w": 0.01, "no_profile": False, "r": 100.0, "m": 1}
    values = {row["metric"]: row["value"] for row in doc["results"]}
    assert values["mu_max"] == pytest.approx(math.exp(-1))


def test_analyze_csv(capsys):
    _, out, _ = run(capsys, "analyze", "--format", "csv")
    lines = out.splitlines()
    assert lines[0] == "metric,value"
    assert lines[1].startswith("effective_radius,3.109437912434e+02")


@pytest.mark.parametrize("argv", [
    ["analyze", "--lambda", "-1"],
    ["analyze", "--rs", "abc"],
    ["analyze", "--w", "0.01", "--no-profile"],
    ["analyze", "--lambda", "1e-5", "--density-km2", "10"],
    ["analyze", "--amplitude", "0"],
    ["simulate", "--replications", "0"],
    ["simulate", "--padding", "10"],
    ["figure", "7"],
])
def test_invalid_flags_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2
    _, err = capsys.readouterr()
    assert "error" in err


SMALL_SIM = ["--replications", "20", "--test-points", "400", "--window", "600"]


def test_simulate_is_deterministic(capsys):
    _, a, _ = run(capsys, "simulate", "--m", "2", "--seed", "7", *SMALL_SIM)
    _, b, _ = run(capsys, "simulate", "--m", "2", "--seed", "7", *SMALL_SIM)
    assert a == b
    _, c, _ = run(capsys, "simulate", "--m", "2", "--seed", "8", *SMALL_SIM)
    assert a != c


def test_simulate_unit_mean(capsys):
    lam = 1 / (math.pi * (80 + math.log(10) / 0.01) ** 2)
    code, out, _ = run(capsys, "simulate", "--lambda", repr(lam), "--rs", "80", "--tau", "10", "--r", "0",
                       "--replications", "500", "--test-points", "100", "--window", "1000",
                       "--format", "json", "--check")
    assert code == 0
    row = next(r for r in json.loads(out)["results"] if r["metric"] == "nu_tau")
    assert row["closed_form"] == pytest.approx(1 - math.exp(-1))
    assert abs(row["estimate"] - row["closed_form"]) <= 4 * row["se"]


def test_simulate_single_replication(capsys):
    code, out, _ = run(capsys, "simulate", "--replications", "1", "--test-points", "100", "--window", "500")
    assert code == 0
    assert "undefined" in out


def test_simulate_check_failure_exit_3(capsys):
    code, _, err = run(capsys, "simulate", "--check", "--z-threshold", "1e-9", *SMALL_SIM)
    assert code == 3
    assert "check failed" in err


def test_seed_from_environment():
    env_run = lambda seed: subprocess.run(
        [sys.executable, "-m", "profilecov", "simulate", "--format", "json", *SMALL_SIM],
        capture_output=True, text=True, env={"PROFILECOV_SEED": seed, "PATH": ""}, check=True)
    doc = json.loads(env_run("42").stdout)
    assert doc["config"]["seed"] == 42


def test_figure1(capsys, tmp_path):
    code, out, _ = run(capsys, "figure", "1", "--output", str(tmp_path))
    assert code == 0
    assert "figure1:" in out and "rows" in out
    lines = (tmp_path / "figure1.csv").read_text().splitlines()
    assert lines[0] == "lambda,w,nu_0,nu_tau,eta"
    assert all(float(line.split(",")[-1]) >= 1.0 for line in lines[1:])


def test_figure3_two_tables_equal_maxima(capsys, tmp_path):
    code, _, _ = run(capsys, "figure", "3", "--m", "1", "--r", "100", "--r", "300", "--output", str(tmp_path))
    assert code == 0
    maxima = []
    for r in ("100", "300"):
        rows = (tmp_path / f"figure3_r{r}.csv").read_text().splitlines()[1:]
        maxima.append(max(float(row.split(",")[-1]) for row in rows))
    summary = json.loads((tmp_path / "figure3_summary.json").read_text())
    closed = [e for e in summary["summary"] if e["metric"] == "mu_m_grid_max"]
    assert len(closed) == 2
    assert maxima[0] == pytest.approx(maxima[1], rel=1e-3)
    assert all(m <= math.exp(-1) for m in maxima)


def test_figure_rerun_is_byte_identical(capsys, tmp_path):
    run(capsys, "figure", "2", "--output", str(tmp_path / "a"))
    run(capsys, "figure", "2", "--output", str(tmp_path / "b"))
    for name in ("figure2.csv", "figure2_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_figure_io_failure_exit_4(capsys, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "figure", "4", "--output", str(blocker / "sub"))
    assert code == 4
    assert "I/O error" in err


def test_sweep(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"variable": "tau", "grid": [0, 2, 5, 10],
                                "fixed": {"lambda": 1e-5, "rs": 80, "r": 0}}))
    out_csv = tmp_path / "out.csv"
    code, out, _ = run(capsys, "sweep", str(spec), "--output", str(out_csv))
    assert code == 0
    assert "4 rows" in out
    header, *rows = out_csv.read_text().splitlines()
    assert header == "tau,nu,vacancy,eta,mu,beta"
    assert [float(r.split(",")[3]) for r in rows][0] == 1.0
    assert (tmp_path / "out.json").exists()


@pytest.mark.parametrize("doc", [
    {"variable": "tau", "grid": []},
    {"variable": "tau", "grid": [3, 1, 2]},
    {"variable": "tau", "grid": [1, 2], "fixed": {"tau": 1}},
    {"grid": [1, 2]},
])
def test_bad_sweep_spec_exit_2(capsys, tmp_path, doc):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(doc))
    code, _, err = run(capsys, "sweep", str(spec))
    assert code == 2
    assert "bad sweep spec" in err


def test_validate_small(capsys, tmp_path):
    code, out, _ = run(capsys, "validate", "--replications", "4", "--test-points", "100", "--window", "500",
                       "--output", str(tmp_path / "report.csv"))
    assert code == 0
    assert out.count("\n") == 49
    assert (tmp_path / "report.csv").read_text().startswith("metric,lambda,R_S,tau,closed_form")
