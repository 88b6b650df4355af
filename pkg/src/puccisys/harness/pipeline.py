"""Experiment pipelines behind the CLI subcommands.

Every run writes into one output directory::

    manifest.json   config echo, versions, wall time, checksums of all files
    records.csv     mode-specific rows, schema version in a leading comment
    logs.jsonl      one JSON object per event / snapshot
    fields/         GridField dumps (.bin and .csv) and eigenpair metadata
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..barrier import BarrierField, build_certificate, certify_global, eh_value
from ..errors import CertificateContradiction, InvalidArgument
from ..evolve import solve_system
from ..selfsim import envelope_check, power_iterate

logger = logging.getLogger(__name__)

CSV_VERSION = 1
SWEEP_COLUMNS = (
    "p", "q", "outcome", "blowup_time", "evolve_outcome", "alpha1", "alpha2",
    "eh_value", "eh_side", "threshold1_side", "threshold2_side", "admissible",
    "certificate", "epsilon", "error",
)


class RunError(RuntimeError):
    def __init__(self, mode, out_dir, cause):
        super().__init__(f"{mode} run in {out_dir} failed: {type(cause).__name__}: {cause}")
        self.mode = mode
        self.cause = cause


@dataclass
class RunResult:
    status: int
    out_dir: Path
    summary: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_records(path, kind, columns, rows):
    """CSV with a schema comment line; floats written with ``repr`` for exact round trips."""
    buf = io.StringIO()
    buf.write(f"# puccisys {kind}-records v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_records(path):
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("# puccisys"):
            raise ValueError(f"{path} is not a records file")
        return list(csv.DictReader(fh))


class _Log:
    def __init__(self, path):
        self._fh = open(path, "w")

    def __call__(self, event, **data):
        self._fh.write(json.dumps({"event": event, **data}, sort_keys=True) + "\n")

    def close(self):
        self._fh.close()


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out, cfg, status, wall, summary):
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    manifest = {
        "package": "puccisys",
        "version": __version__,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "mode": cfg.mode,
        "seed": cfg.seed,
        "status": status,
        "wall_time_s": round(wall, 3),
        "config": cfg.echo(),
        "summary": summary,
        "files": [
            {"path": str(p.relative_to(out)), "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in files
        ],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _dump(field_, stem):
    field_.to_binary(stem.with_suffix(".bin"))
    field_.to_csv(stem.with_suffix(".csv"))


# -- eigenpairs -------------------------------------------------------------


def compute_eigenpairs(cfg, log=None):
    """Eigenpairs for F1 and F2 (computed once when both specs agree)."""
    cache = {}
    pairs = []
    for spec, op in zip(cfg.operator_specs, cfg.operators):
        if spec not in cache:
            cache[spec] = power_iterate(
                op, cfg.grid, tol=cfg.eigen_tol, max_tau=cfg.eigen_max_tau, renorm=cfg.eigen_renorm
            )
            if log:
                pr = cache[spec]
                log("eigenpair", operator=spec, alpha=pr.alpha, converged=pr.converged,
                    iterations=len(pr.alpha_history))
        pairs.append(cache[spec])
    return tuple(pairs)


# -- modes --------------------------------------------------------------------


def _initial_fields(cfg, log):
    if cfg.initial.kind != "barrier-seeded":
        return cfg.initial.fields(cfg.grid)
    pairs = compute_eigenpairs(cfg, log)
    cert = build_certificate(cfg.p, cfg.q, cfg.operators, pairs, cfg.alpha_margin, cfg.tol_residual)
    if cert.epsilon is None:
        raise InvalidArgument(f"barrier-seeded data need an admissible certificate ({cert.verdict})")
    u10, u20 = BarrierField(cert, pairs).fields(0.0)
    log("barrier-seed", epsilon=cert.epsilon, verdict=cert.verdict, scale=cfg.initial.scale)
    return u10 * cfg.initial.scale, u20 * cfg.initial.scale


def _mode_evolve(cfg, out, log):
    u10, u20 = _initial_fields(cfg, log)

    def snap(state):
        log("snapshot", t=state.t, sup_norms=list(state.sup_norms), blown_up=state.blown_up)

    traj = solve_system(
        u10, u20, cfg.operators, cfg.p, cfg.q, cfg.step_control(), stride=cfg.stride,
        on_snapshot=snap,
    )
    final = traj.final
    _dump(final.u1, out / "fields" / "u1_final")
    _dump(final.u2, out / "fields" / "u2_final")
    row = {
        "p": cfg.p, "q": cfg.q, "outcome": "blown-up" if traj.blown_up else "global-to-T",
        "t_final": float(final.t), "blown_up": traj.blown_up,
        "blowup_time": traj.blowup_time, "sup1": final.sup_norms[0], "sup2": final.sup_norms[1],
        "dt": traj.dt,
    }
    write_records(out / "records.csv", "evolve", list(row), [row])
    return {"outcome": row["outcome"], "blowup_time": traj.blowup_time, "t_final": row["t_final"]}


def _mode_eigen(cfg, out, log):
    pairs = compute_eigenpairs(cfg, log)
    rows = []
    for name, spec, op, pr in zip(("F1", "F2"), cfg.operator_specs, cfg.operators, pairs):
        pr.save(out / "fields" / f"eigen_{name}")
        env = envelope_check(pr, op.lam, op.Lam)
        rows.append({
            "name": name, "operator": spec, "alpha": pr.alpha, "converged": pr.converged,
            "iterations": len(pr.alpha_history), "envelope_pass": env.passed,
            "delta_fit": env.delta_fit,
        })
    write_records(out / "records.csv", "eigen", list(rows[0]), rows)
    return {"alpha": [r["alpha"] for r in rows]}


def _mode_certify(cfg, out, log):
    pairs = compute_eigenpairs(cfg, log)
    for name, pr in zip(("F1", "F2"), pairs):
        pr.save(out / "fields" / f"eigen_{name}")
    cert = build_certificate(
        cfg.p, cfg.q, cfg.operators, pairs, cfg.alpha_margin, cfg.tol_residual
    )
    report = None
    if cert.verdict == "residual-ok":
        u10, u20 = BarrierField(cert, pairs).fields(0.0)
        _dump(u10, out / "fields" / "barrier_u1_t0")
        _dump(u20, out / "fields" / "barrier_u2_t0")
        report = certify_global(
            cert, pairs, cfg.operators, cfg.step_control(cfg.t_long), cfg.certify_tol
        )
        cert.verdict = "certified" if report.ordered else "ordering-violated"
    doc = cert.to_json()
    doc["global_run"] = None if report is None else asdict(report)
    (out / "certificate.json").write_text(json.dumps(doc, indent=2) + "\n")
    row = {
        "p": cfg.p, "q": cfg.q, "alpha1": cert.alpha1, "alpha2": cert.alpha2, "a": cert.a,
        "b": cert.b, "epsilon": cert.epsilon, "verdict": cert.verdict,
        "residual1": None if cert.residual_min is None else cert.residual_min[0],
        "residual2": None if cert.residual_min is None else cert.residual_min[1],
        "max_violation": None if report is None else report.max_violation,
    }
    write_records(out / "records.csv", "certify", list(row), [row])
    log("certificate", verdict=cert.verdict)
    return {"verdict": cert.verdict}


def _side(x, tol=1e-12):
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def sweep_cell(cfg, p, q, pairs):
    """Classify one (p, q) cell; errors are recorded in the row instead of raised."""
    N = cfg.grid.dim
    a1, a2 = pairs[0].alpha, pairs[1].alpha
    row = {"p": p, "q": q, "alpha1": a1, "alpha2": a2, "admissible": False, "certificate": ""}
    try:
        if p * q <= 1:
            raise ValueError(f"pq = {p * q} <= 1")
        d = p * q - 1
        eh = eh_value(p, q)
        row["eh_value"] = eh
        row["eh_side"] = {1: "sub", 0: "critical", -1: "super"}[_side(eh - N / 2)]
        row["threshold1_side"] = _side(a1 - (p + 1) / d)
        row["threshold2_side"] = _side(a2 - (q + 1) / d)
        u10, u20 = cfg.initial.fields(cfg.grid)
        traj = solve_system(
            u10, u20, cfg.operators, p, q, cfg.step_control(), stride=10**9
        )
        row["evolve_outcome"] = "blown-up" if traj.blown_up else "global-to-T"
        row["blowup_time"] = traj.blowup_time
        row["outcome"] = row["evolve_outcome"]
        if cfg.sweep.certify:
            cert = build_certificate(
                p, q, cfg.operators, pairs, cfg.sweep.alpha_margin, cfg.tol_residual
            )
            row["admissible"] = cert.conditions["admissible"] and cert.valid_exponents
            row["epsilon"] = cert.epsilon
            row["certificate"] = cert.verdict
            if cert.verdict == "residual-ok":
                rep = certify_global(
                    cert, pairs, cfg.operators, cfg.step_control(cfg.t_long), cfg.certify_tol
                )
                if rep.ordered:
                    row["outcome"] = "certified-global"
                    row["certificate"] = "certified"
                else:
                    row["certificate"] = "ordering-violated"
    except CertificateContradiction as exc:
        row["certificate"] = "contradiction"
        row["error"] = f"CertificateContradiction: {exc}"
    except Exception as exc:  # noqa: BLE001 - cell errors are data
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _cell_task(args):
    return sweep_cell(*args)


def sweep(cfg, pairs=None, workers=None, log=None):
    """Evaluate all sweep cells; rows come back in cell order regardless of worker count."""
    pairs = compute_eigenpairs(cfg, log) if pairs is None else pairs
    workers = cfg.workers if workers is None else workers
    tasks = [(cfg, p, q, pairs) for p, q in cfg.sweep.cells()]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell_task, tasks))
    else:
        rows = [_cell_task(t) for t in tasks]
    if log:
        for r in rows:
            log("cell", p=r["p"], q=r["q"], outcome=r.get("outcome"), error=r.get("error"))
    return rows


def sweep_summary(rows):
    """Agreement between observed outcomes and the side of the Escobedo-Herrero curve."""
    certified = [r for r in rows if r.get("outcome") == "certified-global"]
    blown = [r for r in rows if r.get("outcome") == "blown-up"]
    return {
        "cells": len(rows),
        "errors": sum(1 for r in rows if r.get("error")),
        "certified_global": len(certified),
        "certified_on_super_side": sum(1 for r in certified if r.get("eh_side") == "super"),
        "blown_up": len(blown),
        "blown_up_on_sub_or_critical_side": sum(
            1 for r in blown if r.get("eh_side") in ("sub", "critical")
        ),
        "global_to_T": sum(1 for r in rows if r.get("outcome") == "global-to-T"),
    }


def _mode_sweep(cfg, out, log):
    rows = sweep(cfg, log=log)
    write_records(out / "records.csv", "sweep", SWEEP_COLUMNS, rows)
    return sweep_summary(rows)


def _mode_selfcheck(cfg, out, log):
    from .selfcheck import selfcheck

    report = selfcheck(seed=cfg.seed, cfl_safety=cfg.selfcheck_cfl_safety)
    (out / "selfcheck.txt").write_text(report.text())
    rows = [{"check": c.name, "passed": c.passed, "margin": c.margin, "detail": c.detail}
            for c in report.checks]
    write_records(out / "records.csv", "selfcheck", ["check", "passed", "margin", "detail"], rows)
    return {"passed": report.passed}


_MODES = {
    "evolve": _mode_evolve,
    "eigen": _mode_eigen,
    "certify": _mode_certify,
    "sweep": _mode_sweep,
    "selfcheck": _mode_selfcheck,
}


def run(cfg, out_dir):
    """Execute ``cfg.mode`` and write all artifacts into ``out_dir``."""
    out = Path(out_dir)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    log = _Log(out / "logs.jsonl")
    start = time.perf_counter()
    log("start", mode=cfg.mode, seed=cfg.seed)
    try:
        summary = _MODES[cfg.mode](cfg, out, log)
    except Exception as exc:
        log("error", type=type(exc).__name__, message=str(exc))
        log.close()
        _write_manifest(out, cfg, "error", time.perf_counter() - start, {"error": str(exc)})
        raise RunError(cfg.mode, out, exc) from exc
    status = 0
    if cfg.mode == "selfcheck" and not summary["passed"]:
        status = 1
    log("done", status=status)
    log.close()
    _write_manifest(out, cfg, "ok" if status == 0 else "failed",
                    time.perf_counter() - start, summary)
    return RunResult(status, out, summary)
