import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from puccisys.cli import main
from puccisys.errors import ConfigError
from puccisys.evolve import solve_system
from puccisys.harness import parse_config, run, selfcheck, sweep, sweep_summary
from puccisys.harness.pipeline import RunError, compute_eigenpairs, read_records

BASE = """
[operators]
F1 = laplacian
F2 = laplacian
[grid]
dim = 1
radius = 10
h = 0.1
[exponents]
p = 2
q = 2
[initial]
kind = gaussian
amplitude = 5
width = 1
[step]
t_end = 1.0
"""

SWEEP = BASE + """
[sweep]
p_min = 2
p_max = 4
p_steps = 3
q_min = 2
q_max = 4
q_steps = 3
certify = yes
[certify]
t_long = 5
"""


def one_cell(p, q, certify="no"):
    return BASE + f"""
[sweep]
p_min = {p}
p_max = {p}
q_min = {q}
q_max = {q}
certify = {certify}
"""


# -- configuration ---------------------------------------------------------------


def test_parse_defaults():
    cfg = parse_config(BASE, mode="evolve")
    assert cfg.mode == "evolve"
    assert cfg.grid.points_per_axis == 201
    assert cfg.operators[0].kind == "linear-trace"
    assert cfg.cfl_safety == 0.9


@pytest.mark.parametrize("text,path", [
    (BASE.replace("p = 2", "p = 0.5"), "exponents.p"),
    (BASE.replace("q = 2", "q = 0.9"), "exponents.q"),
    (BASE + "[step]\ncfl_safety = 1.5\n", None),
    (BASE.replace("dim = 1", "dim = 1\nspacing = 3"), "grid.spacing"),
    (BASE + "[extras]\nx = 1\n", "extras"),
    (BASE.replace("F1 = laplacian", "F1 = heat"), "operators.F1"),
    (BASE.replace("F1 = laplacian", "F1 = minmax-2d"), "operators.F1"),
    (BASE.replace("p = 2", "p = two"), "exponents.p"),
    (BASE.replace("kind = gaussian", "kind = random"), "initial.kind"),
    (BASE.replace("p_min", "x") + "[sweep]\np_min = 0.5\np_max = 2\nq_min = 1\nq_max = 2\n", "sweep.p_min"),
])
def test_parse_errors(text, path):
    with pytest.raises(ConfigError) as err:
        parse_config(text, mode="evolve")
    if path:
        assert err.value.path == path
        assert str(err.value).startswith(path)


def test_sweep_mode_needs_section():
    with pytest.raises(ConfigError):
        parse_config(BASE, mode="sweep")


def test_coupled_modes_need_pq_above_one():
    text = BASE.replace("p = 2", "p = 1").replace("q = 2", "q = 1")
    with pytest.raises(ConfigError):
        parse_config(text, mode="evolve")
    parse_config(text, mode="eigen")


def test_sweep_cells():
    cfg = parse_config(SWEEP, mode="sweep")
    assert cfg.sweep.cells()[:3] == [(2.0, 2.0), (2.0, 3.0), (2.0, 4.0)]
    assert len(cfg.sweep.cells()) == 9


# -- modes -----------------------------------------------------------------------


def test_eigen_mode(tmp_path):
    res = run(parse_config(BASE, mode="eigen"), tmp_path)
    assert res.status == 0
    rows = read_records(tmp_path / "records.csv")
    assert abs(float(rows[0]["alpha"]) - 0.5) <= 0.025
    assert list((tmp_path / "fields").glob("*.bin"))


def test_evolve_mode(tmp_path):
    res = run(parse_config(BASE, mode="evolve"), tmp_path)
    row = read_records(tmp_path / "records.csv")[0]
    assert row["outcome"] == "blown-up"
    assert 0 < float(row["blowup_time"]) < 1
    assert res.summary["outcome"] == "blown-up"
    events = [json.loads(x)["event"] for x in (tmp_path / "logs.jsonl").read_text().splitlines()]
    assert events[0] == "start" and "snapshot" in events


def test_certify_mode(tmp_path):
    text = BASE.replace("p = 2", "p = 4").replace("q = 2", "q = 4") + "[certify]\nt_long = 3\n"
    run(parse_config(text, mode="certify"), tmp_path)
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["verdict"] == "certified"
    assert doc["global_run"]["ordered"]


def test_barrier_seeded_evolve(tmp_path):
    text = (BASE.replace("p = 2", "p = 4").replace("q = 2", "q = 4")
            .replace("kind = gaussian", "kind = barrier-seeded\nscale = 0.5"))
    res = run(parse_config(text, mode="evolve"), tmp_path)
    assert res.summary["outcome"] == "global-to-T"


def test_manifest_completeness(tmp_path):
    run(parse_config(BASE, mode="eigen"), tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    listed = {f["path"] for f in man["files"]}
    on_disk = {str(p.relative_to(tmp_path)) for p in tmp_path.rglob("*")
               if p.is_file() and p.name != "manifest.json"}
    assert listed == on_disk
    assert {"python", "numpy", "scipy"} <= set(man["versions"])
    assert man["config"]["operator_specs"] == ["laplacian", "laplacian"]
    assert "wall_time_s" in man


def test_solver_errors_carry_context(tmp_path):
    cfg = parse_config(BASE.replace("kind = gaussian", "kind = file\npath1 = /nope.csv\npath2 = /nope.csv"),
                       mode="evolve")
    with pytest.raises(RunError) as err:
        run(cfg, tmp_path)
    assert "evolve run" in str(err.value)
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "error"


# -- sweeps ----------------------------------------------------------------------


def test_single_cell_sweep_is_evolve_run():
    cfg = parse_config(one_cell(2, 2), mode="sweep")
    pairs = compute_eigenpairs(cfg)
    row, = sweep(cfg, pairs)
    u10, u20 = cfg.initial.fields(cfg.grid)
    traj = solve_system(u10, u20, cfg.operators, 2.0, 2.0, cfg.step_control())
    assert row["outcome"] == "blown-up" and traj.blown_up
    assert row["blowup_time"] == traj.blowup_time


def test_sweep_cell_errors_are_recorded():
    cfg = parse_config(one_cell(1, 1), mode="sweep")
    row, = sweep(cfg)
    assert "pq" in row["error"]


@pytest.fixture(scope="module")
def sweep_rows():
    cfg = parse_config(SWEEP, mode="sweep")
    pairs = compute_eigenpairs(cfg)
    return cfg, pairs, sweep(cfg, pairs)


def test_sweep_classification(sweep_rows):
    _, _, rows = sweep_rows
    by = {(r["p"], r["q"]): r for r in rows}
    assert by[(2.0, 2.0)]["outcome"] == "blown-up"
    assert by[(3.0, 3.0)]["eh_side"] == "critical"
    assert by[(4.0, 4.0)]["outcome"] == "certified-global"
    for r in rows:
        assert not r.get("error")
        if r["outcome"] == "certified-global":
            assert r["eh_side"] == "super" and r["admissible"]
        if r["eh_side"] in ("sub", "critical"):
            assert r["outcome"] != "certified-global"
    s = sweep_summary(rows)
    assert s["certified_global"] == s["certified_on_super_side"] >= 1


def test_sweep_worker_invariance(sweep_rows):
    cfg, pairs, rows = sweep_rows
    again = sweep(cfg, pairs, workers=2)
    assert again == rows


def test_sweep_csv_deterministic(tmp_path):
    text = one_cell(2, 3) + "[run]\nseed = 4\n"
    for d in ("a", "b"):
        run(parse_config(text, mode="sweep"), tmp_path / d)
    assert (tmp_path / "a" / "records.csv").read_bytes() == (tmp_path / "b" / "records.csv").read_bytes()
    head = (tmp_path / "a" / "records.csv").read_text().splitlines()[0]
    assert head == "# puccisys sweep-records v1"


# -- selfcheck and CLI -----------------------------------------------------------


def test_selfcheck_passes_and_is_deterministic():
    a, b = selfcheck(seed=3), selfcheck(seed=3)
    assert a.passed
    assert a.text() == b.text()


def test_selfcheck_negative_control():
    rep = selfcheck(cfl_safety=2.0)
    assert not rep.passed
    failed = {c.name for c in rep.checks if not c.passed}
    assert "heat-kernel" in failed


def test_cli_selfcheck(tmp_path, capsys):
    assert main(["selfcheck", "--out", str(tmp_path / "a"), "--seed", "1"]) == 0
    first = capsys.readouterr().out
    assert "ALL PASS" in first
    assert main(["selfcheck", "--out", str(tmp_path / "b"), "--seed", "1"]) == 0
    assert capsys.readouterr().out == first
    assert main(["selfcheck", "--out", str(tmp_path / "c"), "--cfl-safety", "2.0"]) == 1


def test_cli_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(BASE.replace("p = 2", "p = 0.5"))
    assert main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "exponents.p" in capsys.readouterr().err
    assert main(["evolve", "--out", str(tmp_path / "o")]) == 2


def test_cli_env_overrides(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "eigen.ini"
    cfg.write_text(BASE)
    monkeypatch.setenv("PUCCISYS_OUT", str(tmp_path / "env-out"))
    monkeypatch.setenv("PUCCISYS_WORKERS", "2")
    assert main(["eigen", "--config", str(cfg)]) == 0
    man = json.loads((tmp_path / "env-out" / "manifest.json").read_text())
    assert man["config"]["workers"] == 2
    assert json.loads(capsys.readouterr().out)


def test_cli_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "puccisys", "selfcheck", "--out", str(tmp_path)],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0, out.stderr
    assert (Path(tmp_path) / "selfcheck.txt").read_text() == out.stdout
