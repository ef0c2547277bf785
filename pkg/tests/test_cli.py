import csv
import math
import subprocess
import sys
import time

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import nan_equal
from specgap import BetaEstimate, ConfigError, ZetaReport, run_preset, spectrum_summary
from specgap.cli import (
    RunConfig,
    ThetaTable,
    TorsionResult,
    load_config_file,
    main,
    parse_structured,
    serialize_report,
)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(argv, tmp_path):
    return main([*argv, "--out", str(tmp_path)])


def test_hyperbolic_determinant(tmp_path, capsys):
    assert run(["hyperbolic", "--d", "5", "--degree", "1", "--vol", "1", "--determinant"], tmp_path) == 0
    assert "8.70623694" in capsys.readouterr().out
    rows = read_csv(tmp_path / "hyperbolic_zeta.csv")
    assert rows[0] == ["degree", "zeta0", "zeta_prime0", "log_det"]
    assert float(rows[1][3]) == pytest.approx(8 * math.sqrt(3) * math.pi / 5, rel=1e-12)
    # 17 significant digits
    assert len(rows[1][3].replace(".", "").lstrip("0")) == 17


def test_hyperbolic_gaps_and_theta(tmp_path, capsys):
    assert run(["hyperbolic", "--d", "3", "--gaps", "--theta"], tmp_path) == 0
    out = capsys.readouterr().out
    assert "gaps: 1, 0, 0, 1" in out
    assert "theta_0(t)" in out


def test_torus_theta_table(tmp_path):
    assert run(["torus", "--g", "1", "--n", "64", "--theta", "--t-window", "0.5:5", "--n-t", "20"], tmp_path) == 0
    rows = read_csv(tmp_path / "theta.csv")
    assert rows[0] == ["t", "theta_comb", "theta_ref", "abs_error"]
    assert len(rows) == 21
    t, comb, ref, err = map(float, rows[1])
    assert t == 0.5
    assert ref == pytest.approx((4 * math.pi * t) ** -0.5)
    assert err == pytest.approx(abs(comb - ref))
    assert max(float(r[3]) / float(r[2]) for r in rows[1:]) < 0.02


def test_torus_spectrum_structured(tmp_path):
    assert run(["torus", "--preset", "square-coarse", "--spectrum", "--resolution", "4",
                "--format", "structured"], tmp_path) == 0
    data = (tmp_path / "spectrum.txt").read_bytes()
    assert data.startswith(b"schema = specgap-report/1\n")
    summary = parse_structured(data)
    assert summary.degrees == (0, 1, 2)


def test_torus_spectrum_csv(tmp_path):
    assert run(["torus", "--g", "2", "--n", "2", "--resolution", "4"], tmp_path) == 0
    rows = read_csv(tmp_path / "spectrum.csv")
    assert rows[0] == ["degree", "lambda0", "kernel_dim", "kappa0"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]


def test_beta_and_product(tmp_path):
    assert run(["beta", "--d", "3", "--degree", "1"], tmp_path) == 0
    rows = read_csv(tmp_path / "beta.csv")
    assert rows[0][:5] == ["beta", "beta_bar", "window_min", "window_max", "residual"]
    assert float(rows[1][0]) == pytest.approx(0.5, abs=0.05)
    assert run(["beta", "--product", "3,3", "--degree", "0"], tmp_path) == 0
    assert float(read_csv(tmp_path / "beta.csv")[1][0]) == pytest.approx(3.0, abs=0.1)


def test_zeta_and_torsion(tmp_path, capsys):
    assert run(["zeta", "--d", "3"], tmp_path) == 0
    assert len(read_csv(tmp_path / "zeta.csv")) == 5
    assert run(["torsion", "--d", "3"], tmp_path) == 0
    assert read_csv(tmp_path / "torsion.csv")[0] == ["log_torsion"]
    assert "log_torsion" in capsys.readouterr().out


def test_convergence_preset(tmp_path):
    assert run(["convergence", "--preset", "circle-theta", "--levels", "3"], tmp_path) == 0
    rows = read_csv(tmp_path / "convergence.csv")
    assert rows[0] == ["level", "mesh", "metric_name", "value", "error", "order"]
    assert len(rows) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["hyperbolic", "--d", "4"],
        ["hyperbolic", "--d", "5", "--degree", "9"],
        ["torus", "--g", "1", "--theta", "--t-window", "5:1"],
        ["torus", "--g", "1", "--d", "3"],
        ["beta", "--d", "3", "--window", "10:20"],
        ["convergence", "--preset", "circle-theta", "--levels", "2"],
        ["torus"],
        ["hyperbolic", "--d", "3", "--format", "yaml"],
        ["frobnicate"],
    ],
)
def test_configuration_errors_exit_2(argv, tmp_path, capsys):
    assert run(argv, tmp_path) == 2
    assert capsys.readouterr().err


def test_numerical_errors_exit_3(tmp_path, capsys):
    code = run(["beta", "--g", "1", "--n", "8", "--window", "0.00001:0.001"], tmp_path)
    assert code == 3
    assert "numerical" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# hyperbolic run\ngeometry.d = 3\nnumeric.degree = 0\noutput.format = structured\n")
    assert main(["zeta", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    reports = parse_structured((tmp_path / "zeta.txt").read_bytes())
    assert [r.degree for r in reports] == [0]
    assert main(["zeta", "--config", str(cfg), "--degree", "1", "--format", "csv", "--out", str(tmp_path)]) == 0
    assert read_csv(tmp_path / "zeta.csv")[1][0] == "1"


def test_config_file_validation(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("d = 3\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    bad.write_text("geometry.d 3\n")
    with pytest.raises(ConfigError):
        load_config_file(bad)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.cfg")
    assert main(["zeta", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig("zeta").validate()
    with pytest.raises(ConfigError):
        RunConfig("zeta", {"hyperbolic": True}, {"kernel_tol": -1.0}).validate()
    assert RunConfig("convergence").validate().geometry_kind == ""


finite = st.floats(allow_nan=False, allow_infinity=False)
any_float = st.floats(allow_nan=True, allow_infinity=True)


@given(any_float, any_float, finite, finite, any_float, finite, any_float, st.integers(0, 1000))
def test_beta_report_round_trip(b, bb, w0, w1, res, lam, slope, n):
    rep = BetaEstimate(b, bb, w0, w1, res, lam, slope, n)
    assert nan_equal(parse_structured(serialize_report(rep, "structured")), rep)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=5),
       st.dictionaries(st.text(min_size=1).filter(lambda k: "/" not in k), st.one_of(finite, st.text(), st.none())))
def test_zeta_report_round_trip(vals, notes):
    reps = [ZetaReport(j, a, b, a, b, a, b, a, b, -b, dict(notes)) for j, (a, b) in enumerate(vals)]
    assert nan_equal(parse_structured(serialize_report(reps, "structured")), reps)
    rows = serialize_report(reps, "csv").decode().splitlines()
    assert len(rows) == len(reps) + 1


def test_convergence_and_summary_round_trip():
    r = run_preset("circle-gap", levels=3)
    assert nan_equal(parse_structured(serialize_report(r, "structured")), r)
    table = ThetaTable((0.5, 1.0), (0.1, 0.2), (0.1, 0.2), (0.0, 0.0))
    assert parse_structured(serialize_report(table, "structured")) == table
    tr = TorsionResult(1.5, (0.0, 1.0 + 0j))
    assert parse_structured(serialize_report(tr, "structured")) == tr


def test_serialization_is_deterministic():
    r = run_preset("circle-zeta", levels=3)
    assert serialize_report(r, "csv") == serialize_report(run_preset("circle-zeta", levels=3), "csv")


def test_serialization_errors():
    with pytest.raises(ConfigError):
        serialize_report(object(), "csv")
    with pytest.raises(ConfigError):
        serialize_report(TorsionResult(1.0, ()), "xml")
    with pytest.raises(ConfigError):
        parse_structured(b"schema = other/9\n/ = @dict\n")
    with pytest.raises(ConfigError):
        parse_structured(b"schema = specgap-report/1\n/ = @Unknown\n")


def test_console_script_is_fast(tmp_path):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "specgap.cli", "hyperbolic", "--d", "5", "--degree", "1", "--vol", "1",
         "--determinant", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    assert "8.7062" in proc.stdout
    assert elapsed < 1.0
