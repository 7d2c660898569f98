"""Exit codes, artifact determinism, config merging for the qcalc CLI."""

import json

import pytest

from qcalc.cli import ConfigError, main, parse_q


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


# -- backend selection -------------------------------------------------------


def test_parse_q_backends():
    assert parse_q("3/2").exact
    assert not parse_q("2").exact
    assert not parse_q("2.0").exact
    with pytest.raises(ConfigError):
        parse_q("1")
    with pytest.raises(ConfigError):
        parse_q("2/4")
    with pytest.raises(ConfigError):
        parse_q("zebra")


def test_exact_battery_refuses_double(tmp_path):
    assert run(tmp_path, "verify-algebra", "--q", "2.0") == 2
    assert run(tmp_path, "leibniz", "--q", "2.0") == 2


def test_double_battery_refuses_exact(tmp_path):
    assert run(tmp_path, "spectrum", "--q", "3/2") == 2
    assert run(tmp_path, "fourier", "--q", "3/2") == 2
    assert run(tmp_path, "oscillator", "--q", "3/2") == 2


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as err:
        main(["no-such-battery"])
    assert err.value.code == 2


# -- one-shot integration ----------------------------------------------------


def test_integrate_one_shot_prints_six(capsys, tmp_path):
    code = run(tmp_path, "integrate", "--q", "2", "--poly", "x",
               "--from", "0", "--to", "2")
    assert code == 0
    assert capsys.readouterr().out.strip() == "6"


def test_integrate_one_shot_exact_fraction(capsys, tmp_path):
    # (q^6 - 1)/[3] at q = 3/2 over [q^0, q^2]
    code = run(tmp_path, "integrate", "--q", "3/2", "--poly", "x^2",
               "--from", "0", "--to", "2")
    assert code == 0
    assert capsys.readouterr().out.strip() == "45/16"


def test_integrate_poly_parser_errors(tmp_path):
    assert run(tmp_path, "integrate", "--q", "2", "--poly", "x") == 2
    assert run(tmp_path, "integrate", "--q", "2", "--poly", "x + ^",
               "--from", "0", "--to", "2") == 2


# -- batteries and exit codes -------------------------------------------------


def test_verify_algebra_battery(tmp_path):
    assert run(tmp_path, "verify-algebra", "--q", "3/2",
               "--trials", "40") == 0
    report = json.loads((tmp_path / "verify-algebra.json").read_text())
    assert report["command"] == "verify-algebra"
    assert all(r["ok"] for r in report["checks"])
    names = {r["check"] for r in report["checks"]}
    assert "defining-relation" in names
    assert "derivative-extraction" in names


def test_integrate_batteries_both_backends(tmp_path):
    assert run(tmp_path, "integrate", "--q", "3/2", "--trials", "20") == 0
    assert run(tmp_path, "integrate", "--q", "2", "--trials", "20") == 0
    report = json.loads((tmp_path / "integrate.json").read_text())
    assert report["config"]["backend"] == "double"
    assert {r["check"] for r in report["checks"]} >= {
        "trace-vs-closed-form", "stokes", "green-identity"}


def test_tolerance_override_forces_failure(tmp_path):
    assert run(tmp_path, "fourier", "--tol", "1e-30") == 1
    report = json.loads((tmp_path / "fourier.json").read_text())
    assert not any(r["ok"] for r in report["checks"])
    assert all(r["tolerance"] == 1e-30 for r in report["checks"])


def test_spectrum_table_artifact(tmp_path):
    assert run(tmp_path, "spectrum", "--q", "2", "--n-max", "2") == 0
    lines = (tmp_path / "spectrum.csv").read_text().strip().splitlines()
    assert lines[0] == "family,label,n,energy,residual"
    assert len(lines) == 1 + 2 * 2 * 2
    for row in lines[1:]:
        energy = float(row.split(",")[3])
        assert energy > 0.0


def test_bad_window_rejected(tmp_path):
    assert run(tmp_path, "spectrum", "--q", "2", "--window", "4", "-4") == 2


# -- artifacts ----------------------------------------------------------------


def test_artifacts_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["fourier", "--q", "2", "--seed", "7",
                     "--out", str(out)]) == 0
    for name in ("fourier.json", "fourier-checks.csv",
                 "step_transform.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_oscillator_artifacts(tmp_path):
    assert run(tmp_path, "oscillator", "--q", "2", "--levels", "4") == 0
    levels = (tmp_path / "levels.csv").read_text().strip().splitlines()
    assert levels[0] == "n,energy,residual"
    assert len(levels) == 6
    assert abs(float(levels[2].split(",")[1]) - 1.0) < 1e-10
    assert (tmp_path / "ground_state.csv").exists()
    gp = json.loads((tmp_path / "gaussian_pair.json").read_text())
    assert gp["max_rel"] < 1e-8


def test_config_file_merge_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"q": "2", "levels": 5}))
    out = tmp_path / "from-file"
    assert main(["oscillator", "--config", str(cfg),
                 "--out", str(out)]) == 0
    assert len((out / "levels.csv").read_text().strip().splitlines()) == 7
    out2 = tmp_path / "flag-wins"
    assert main(["oscillator", "--config", str(cfg), "--levels", "2",
                 "--out", str(out2)]) == 0
    assert len((out2 / "levels.csv").read_text().strip().splitlines()) == 4


def test_config_file_errors(tmp_path):
    missing = tmp_path / "nope.json"
    assert main(["gauge", "--config", str(missing),
                 "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["gauge", "--config", str(bad),
                 "--out", str(tmp_path)]) == 2


def test_gauge_battery(tmp_path):
    assert run(tmp_path, "gauge") == 0
    report = json.loads((tmp_path / "gauge.json").read_text())
    assert {r["check"] for r in report["checks"]} >= {
        "derivative-covariance", "commutator", "commutator-order"}
    assert all(r["ok"] for r in report["checks"])


def test_evolve_battery(tmp_path):
    assert run(tmp_path, "evolve", "--q", "2", "--steps", "50") == 0
    history = (tmp_path / "history.csv").read_text().splitlines()
    assert history[0] == "t,sigma,n,rho,j"
    assert len(history) > 10
