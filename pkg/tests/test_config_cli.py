import json

import pytest

from chemoslab import __version__
from chemoslab.cli import main
from chemoslab.config import parse_config
from chemoslab.errors import ConfigurationError, SolverError
from chemoslab.study import RATES_COLUMNS, StudyResult, write_outputs

SMALL_SWEEP = """
grids: {n_x: 16, n_t: 20, n_v: 4}
study:
  kind: epsilon_sweep
  epsilons: [0.5, 0.25, 0.125]
  reference: {refine_x: 2, refine_t: 4}
output: {snapshots: 4}
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_document_defaults():
    cfg = parse_config("scenario: default\n")
    assert cfg.grids.n_v == 8 and cfg.grids.n_x == 128 and cfg.solver.theta == 1.0
    assert cfg.study.kind == "single" and cfg.epsilons() == [0.25]
    assert parse_config("").grids.n_t == 400


def test_epsilon_list_preserved():
    cfg = parse_config("study: {kind: epsilon_sweep, epsilons: [0.5, 0.25, 0.125, 0.0625, 0.03125]}")
    assert cfg.epsilons() == [0.5, 0.25, 0.125, 0.0625, 0.03125]


@pytest.mark.parametrize("text,message", [
    ("study: {kind: epsilon_sweep, epsilons: [0.5, 0, 0.1]}", "epsilon must be positive"),
    ("study: {kind: epsilon_sweep, epsilons: [0.5, 0.6, 0.1]}", "strictly decreasing"),
    ("study: {kind: epsilon_sweep, epsilons: [0.5, 0.25]}", "at least 3"),
    ("study: {kind: mesh_refinement, levels: 1}", "levels >= 2"),
    ("scenario: {sigmaa: 2}", "scenario.sigmaa: unknown key"),
    ("solver: {scheme: leapfrog}", "solver.scheme"),
    ("grids: {n_x: 1}", "grids.n_x"),
    ("- a\n- b\n", "must be a mapping"),
    ("grids: {n_x: 16\nstudy: x\n", "line 2"),
])
def test_config_errors(text, message):
    with pytest.raises(ConfigurationError, match=message):
        parse_config(text)


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_validate(tmp_path, capsys):
    assert main(["validate", write(tmp_path, "scenario: default\n")]) == 0
    bad = write(tmp_path, "scenario: {u0: 'x'}\n", "bad.yaml")
    assert main(["validate", bad]) == 2
    assert main(["validate", str(tmp_path / "missing.yaml")]) == 2
    big = write(tmp_path, "study: {epsilon: 2.0}\n", "eps.yaml")
    assert main(["validate", big]) == 2


def test_run_single_zero_data(tmp_path):
    cfg = write(tmp_path, """
scenario: {u0: "0", c0: "0", gu: {left: 0, right: 0}, gc: {left: 0, right: 0}}
grids: {n_x: 8, n_t: 4, n_v: 2}
""")
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    rates = (out / "rates.csv").read_text().splitlines()
    assert rates[0] == ",".join(RATES_COLUMNS)
    assert rates[1] == "0.25,0.0,0.0,0.0,1,"
    snaps = (out / "snapshots.csv").read_text().splitlines()
    assert snaps[0] == "epsilon,t,x,ubar_eps,ubar0,cbar_eps,cbar0"
    assert all(line.split(",")[3:] == ["0.0"] * 4 for line in snaps[1:])
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["version"] == __version__
    assert man["config"]["grids"]["n_x"] == 8


def test_run_incompatible_is_config_error(tmp_path):
    cfg = write(tmp_path, "scenario: {u0: 'x'}\ngrids: {n_x: 8, n_t: 4}\n")
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    ok = write(tmp_path, "scenario: {u0: 'x'}\ngrids: {n_x: 8, n_t: 4}\nstudy: {allow_incompatible: true}\n", "ok.yaml")
    assert main(["run", ok, "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert any("compatibility" in w for w in man["warnings"])


def test_gate_exit_codes(tmp_path):
    strict = SMALL_SWEEP.replace("output:", "  gates: {combined: [5.0, 6.0]}\noutput:")
    cfg = write(tmp_path, strict)
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 1
    assert main(["run", cfg, "--out", str(tmp_path / "b"), "--no-gates"]) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["gates"]["slope_combined"]["passed"] is False
    assert man["epsilons"] == [0.5, 0.25, 0.125]
    assert (tmp_path / "a" / "rates.csv").read_text() == (tmp_path / "b" / "rates.csv").read_text()


def test_run_failure_recorded_per_row(tmp_path, monkeypatch):
    import chemoslab.study as study

    real = study.run_kinetic

    def flaky(setup, *args, **kwargs):
        if setup.epsilon == 0.25:
            raise SolverError("synthetic blow-up")
        return real(setup, *args, **kwargs)

    monkeypatch.setattr(study, "run_kinetic", flaky)
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, SMALL_SWEEP), "--out", str(out)]) == 3
    rows = (out / "rates.csv").read_text().splitlines()
    assert rows[2].startswith("0.25,nan,nan,nan,0,error: synthetic blow-up")
    man = json.loads((out / "manifest.json").read_text())
    assert man["failures"] == ["epsilon=0.25: synthetic blow-up"]


def test_manifest_written_on_runtime_failure(tmp_path, monkeypatch):
    import chemoslab.study as study

    def boom(*args, **kwargs):
        raise FloatingPointError("overflow in reference")

    monkeypatch.setattr(study, "run_ks", boom)
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, SMALL_SWEEP), "--out", str(out)]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and "overflow" in man["warnings"][0]


def test_unwritable_output_reports_path(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write(tmp_path, "grids: {n_x: 4, n_t: 2, n_v: 2}\n")
    assert main(["run", cfg, "--out", str(blocker / "sub")]) == 3
    assert str(blocker / "sub") in capsys.readouterr().err


def test_empty_result_header_only(tmp_path):
    res = StudyResult(kind="epsilon_sweep", config=parse_config(SMALL_SWEEP))
    write_outputs(res, tmp_path)
    for name in ("rates.csv", "bounds.csv", "snapshots.csv"):
        assert len((tmp_path / name).read_text().splitlines()) == 1


def test_mesh_refinement_table(tmp_path):
    cfg = write(tmp_path, "grids: {n_x: 8, n_t: 10, n_v: 4}\nstudy: {kind: mesh_refinement, levels: 3}\n")
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 0
    lines = (out / "refinement.csv").read_text().splitlines()
    assert lines[0] == "solver,level,n_x,n_t,difference,order"
    assert len(lines) == 5
