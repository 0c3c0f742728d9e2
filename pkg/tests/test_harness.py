import math

import numpy as np
import pytest

from dgheat import cli
from dgheat import harness
from dgheat.harness import (
    ConfigError,
    StudyConfig,
    config_echo,
    load_config,
    parse_config_text,
    run_convergence_study,
    run_probe,
    slab_counts,
    study_csv,
)
from dgheat.solver import MarchError, NewtonReport


SMALL = dict(base_level=1, levels=2, m_base=8)


def test_parse_config_roundtrip(tmp_path):
    text = """
# study setup
problem = cubic_mms
T = 0.5
levels = 3
sigma = 2.0
probe = false
"""
    values = parse_config_text(text)
    assert values == {
        "problem": "cubic_mms",
        "T": 0.5,
        "levels": 3,
        "sigma": 2.0,
        "probe": False,
    }
    path = tmp_path / "study.cfg"
    path.write_text(text)
    cfg = load_config(str(path), {"seed": 3})
    assert cfg.problem == "cubic_mms" and cfg.T == 0.5 and cfg.seed == 3


def test_parse_rejects_unknown_key_and_bad_values():
    with pytest.raises(ConfigError):
        parse_config_text("mystery = 1")
    with pytest.raises(ConfigError):
        parse_config_text("levels = many")
    with pytest.raises(ConfigError):
        parse_config_text("probe = perhaps")
    with pytest.raises(ConfigError):
        parse_config_text("just a line")


def test_config_validation():
    with pytest.raises(ConfigError):
        StudyConfig(levels=1).validate()
    with pytest.raises(ConfigError):
        StudyConfig(sigma=0.0).validate()
    with pytest.raises(ConfigError):
        StudyConfig(T=-1.0).validate()
    with pytest.raises(ConfigError):
        StudyConfig(rho=1.0).validate()


def test_config_echo_reparses_identically():
    cfg = StudyConfig(problem="zero", T=0.25, levels=2, out="x.csv", probe_b=-0.5)
    parsed = parse_config_text(config_echo(cfg))
    assert StudyConfig(**parsed) == cfg


def test_slab_counts_follow_coupling():
    cfg = StudyConfig(m_base=16, sigma=2.0, levels=4)
    assert slab_counts(cfg) == [16, 64, 256, 1024]
    cfg = StudyConfig(m_base=10, sigma=1.0, levels=3)
    assert slab_counts(cfg) == [10, 20, 40]


def test_zero_problem_study_has_exact_zero_errors(tmp_path):
    out = tmp_path / "zero.csv"
    cfg = StudyConfig(problem="zero", out=str(out), **SMALL)
    report = run_convergence_study(cfg)
    assert not report.failures
    for row in report.rows:
        assert row.errors.as_tuple() == (0.0, 0.0, 0.0)
        assert row.bounded
    lines = out.read_text().splitlines()
    assert lines[0] == harness.STUDY_CSV_HEADER
    # EOC cells stay empty when errors vanish
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[5] == "0" and cells[8] == "" and cells[9] == ""


def test_study_rows_respect_coupling_rule(tmp_path):
    cfg = StudyConfig(problem="heat_eigenmode", **SMALL)
    report = run_convergence_study(cfg)
    c = (0.1 / 8) / report.rows[0].h ** 2.0
    for row in report.rows:
        assert row.k <= c * row.h**2.0 * (1.0 + 1e-12)


def test_study_csv_deterministic_and_echo_reruns_byte_identically(tmp_path):
    out1 = tmp_path / "a.csv"
    cfg = StudyConfig(problem="heat_eigenmode", out=str(out1), **SMALL)
    run_convergence_study(cfg)
    first = out1.read_bytes()
    run_convergence_study(cfg)
    assert out1.read_bytes() == first
    # rerun solely from the echoed config
    echo = load_config(str(out1) + ".config")
    out2 = tmp_path / "b.csv"
    run_convergence_study(harness.replace(echo, out=str(out2)))
    assert out2.read_bytes() == first


def test_study_rejects_inadmissible_grid():
    cfg = StudyConfig(problem="heat_eigenmode", base_level=1, levels=2, m_base=2)
    with pytest.raises(ConfigError):  # k = T/2 > T/4
        run_convergence_study(cfg)


def test_study_handles_march_failure(tmp_path, monkeypatch):
    calls = {"n": 0}
    real_march = harness.march

    def flaky_march(mesh, grid, d, f, u0, opts):
        if calls["n"] == 1:
            raise MarchError(2, NewtonReport(), RuntimeError("synthetic"))
        calls["n"] += 1
        return real_march(mesh, grid, d, f, u0, opts)

    monkeypatch.setattr(harness, "march", flaky_march)
    out = tmp_path / "fail.csv"
    cfg = StudyConfig(problem="heat_eigenmode", out=str(out), **SMALL)
    report = run_convergence_study(cfg)
    assert len(report.failures) == 1
    assert len(report.rows) == 2
    assert math.isnan(report.rows[-1].errors.l2l2)
    csv = out.read_text().splitlines()
    assert len(csv) == 3  # header + good row + error row
    assert "nan" in csv[-1]


def test_probe_rows_and_csv(tmp_path):
    out = tmp_path / "probe.csv"
    cfg = StudyConfig(probe=True, probe_b=-0.5, out=str(out), T=1.0, **SMALL)
    rows = run_probe(cfg)
    assert [row.level for row in rows] == [1, 2]
    for row in rows:
        for value in row.ratios.as_dict().values():
            assert np.isfinite(value) and value > 0.0
    lines = out.read_text().splitlines()
    assert lines[0] == harness.PROBE_CSV_HEADER
    assert len(lines) == 3


def test_csv_float_cells_have_full_precision(tmp_path):
    cfg = StudyConfig(problem="heat_eigenmode", **SMALL)
    report = run_convergence_study(cfg)
    text = study_csv(report)
    h_cell = text.splitlines()[1].split(",")[1]
    assert float(h_cell) == report.rows[0].h  # 17 significant digits round-trip


# ---------------------------------------------------------------- CLI


def test_cli_study_success(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = cli.main(
        ["--problem", "heat_eigenmode", "--base-level", "1", "--levels", "2",
         "--out", str(out)]
    )
    assert code == 0
    assert out.exists() and (tmp_path / "run.csv.config").exists()
    assert "study" in capsys.readouterr().out


def test_cli_probe_mode(tmp_path, capsys):
    out = tmp_path / "probe.csv"
    code = cli.main(
        ["--probe", "--base-level", "1", "--levels", "2", "--out", str(out)]
    )
    assert code == 0
    assert "probe" in capsys.readouterr().out
    assert out.exists()


def test_cli_config_error_exit_code(capsys):
    assert cli.main(["--problem", "nonexistent"]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["--levels", "1"]) == 2


def test_cli_failure_exit_code(tmp_path, monkeypatch, capsys):
    def exploding_march(mesh, grid, d, f, u0, opts):
        raise MarchError(1, NewtonReport(), RuntimeError("synthetic"))

    monkeypatch.setattr(harness, "march", exploding_march)
    code = cli.main(
        ["--problem", "heat_eigenmode", "--base-level", "1", "--levels", "2",
         "--out", str(tmp_path / "f.csv")]
    )
    assert code == 1
    assert "FAILED" in capsys.readouterr().err


def test_cli_config_file_with_overrides(tmp_path):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("problem = zero\nlevels = 2\nbase_level = 1\nm_base = 8\n")
    out = tmp_path / "o.csv"
    code = cli.main(["--config", str(cfgfile), "--out", str(out)])
    assert code == 0
    assert out.read_text().count("\n") == 3
