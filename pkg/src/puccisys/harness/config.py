"""Run configuration: sectioned key-value text (INI syntax, read with configparser).

Example::

    [run]
    mode = sweep
    seed = 0

    [operators]
    F1 = pucci-minus lambda=1 Lambda=2
    F2 = laplacian

    [grid]
    dim = 1
    radius = 10
    h = 0.05

    [exponents]
    p = 2
    q = 2

    [initial]
    kind = gaussian
    amplitude = 5
    width = 1

    [step]
    t_end = 2

Unknown sections or keys are rejected so typos do not silently fall back
to defaults.
"""
from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, InvalidArgument
from ..grid import Grid
from ..operators import parse_operator

MODES = ("evolve", "eigen", "certify", "sweep", "selfcheck")
INITIAL_KINDS = ("gaussian", "barrier-seeded", "file")

_SCHEMA = {
    "run": {"mode", "seed", "out", "workers"},
    "operators": {"f1", "f2"},
    "grid": {"dim", "radius", "h", "points_per_axis"},
    "exponents": {"p", "q"},
    "sweep": {"p_min", "p_max", "p_steps", "q_min", "q_max", "q_steps", "certify", "alpha_margin"},
    "initial": {"kind", "amplitude", "width", "path1", "path2", "scale"},
    "step": {"t_end", "cfl_safety", "dt_cap", "blowup_threshold", "stride"},
    "eigen": {"tol", "max_tau", "renorm"},
    "certify": {"t_long", "tol", "tol_residual", "alpha_margin"},
}


@dataclass
class InitialSpec:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    path1: str | None = None
    path2: str | None = None
    scale: float = 1.0

    def fields(self, grid):
        """Gaussian data ``amplitude * exp(-|x|^2 / width^2)`` or fields read from disk."""
        from ..grid import GridField

        if self.kind == "gaussian":
            f = grid.sample(lambda c: self.amplitude * np.exp(-np.sum(c**2, axis=0) / self.width**2))
            return f, f
        if self.kind == "file":
            load = GridField.from_binary if str(self.path1).endswith(".bin") else GridField.from_csv
            return load(self.path1), load(self.path2)
        raise InvalidArgument("barrier-seeded data are built by the certify pipeline")


@dataclass
class SweepSpec:
    p_min: float
    p_max: float
    p_steps: int
    q_min: float
    q_max: float
    q_steps: int
    certify: bool = True
    alpha_margin: float = 0.01

    def cells(self):
        ps = np.linspace(self.p_min, self.p_max, self.p_steps)
        qs = np.linspace(self.q_min, self.q_max, self.q_steps)
        return [(float(p), float(q)) for p in ps for q in qs]


@dataclass
class RunConfig:
    mode: str
    operators: tuple
    operator_specs: tuple
    grid: Grid
    p: float = 2.0
    q: float = 2.0
    sweep: SweepSpec | None = None
    initial: InitialSpec = field(default_factory=InitialSpec)
    t_end: float = 1.0
    cfl_safety: float = 0.9
    dt_cap: float | None = None
    blowup_threshold: float = 1e6
    stride: int = 100
    eigen_tol: float = 1e-4
    eigen_max_tau: float = 40.0
    eigen_renorm: float = 0.5
    t_long: float = 50.0
    certify_tol: float = 1e-3
    tol_residual: float = 1e-3
    alpha_margin: float = 0.0
    seed: int = 0
    out: str | None = None
    workers: int = 1
    selfcheck_cfl_safety: float = 0.9

    def echo(self):
        """JSON-friendly view of the configuration, for manifests."""
        d = {
            k: v for k, v in asdict(self).items()
            if k not in ("operators", "grid", "sweep", "initial")
        }
        d["grid"] = {"dim": self.grid.dim, "radius": self.grid.radius,
                     "points_per_axis": self.grid.points_per_axis}
        d["operator_specs"] = list(self.operator_specs)
        d["sweep"] = None if self.sweep is None else asdict(self.sweep)
        d["initial"] = asdict(self.initial)
        return d

    def step_control(self, t_end=None):
        from ..evolve import StepControl

        return StepControl(
            t_end=self.t_end if t_end is None else t_end,
            cfl_safety=self.cfl_safety,
            dt_cap=self.dt_cap,
            blowup_threshold=self.blowup_threshold,
        )


def _get(cp, section, key, conv, default=None, required=False):
    path = f"{section}.{key}"
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(path, "missing")
        return default
    raw = cp.get(section, key).strip()
    if raw == "" and not required:
        return default
    try:
        return conv(raw)
    except (ValueError, InvalidArgument) as exc:
        raise ConfigError(path, str(exc)) from None


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text, mode=None):
    """Parse configuration text into a :class:`RunConfig`; ``mode`` overrides ``run.mode``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key in cp.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")

    mode = mode or _get(cp, "run", "mode", str, "evolve")
    if mode not in MODES:
        raise ConfigError("run.mode", f"must be one of {MODES}, got {mode!r}")

    specs = (
        _get(cp, "operators", "f1", str, "laplacian"),
        _get(cp, "operators", "f2", str, None),
    )
    specs = (specs[0], specs[1] or specs[0])
    ops = []
    for name, spec in zip(("operators.F1", "operators.F2"), specs):
        try:
            ops.append(parse_operator(spec))
        except InvalidArgument as exc:
            raise ConfigError(name, str(exc)) from None

    dim = _get(cp, "grid", "dim", int, 1)
    radius = _get(cp, "grid", "radius", float, 10.0)
    M = _get(cp, "grid", "points_per_axis", int, None)
    try:
        grid = Grid(dim, radius, M) if M else Grid.from_spacing(dim, radius, _get(cp, "grid", "h", float, 0.05))
    except InvalidArgument as exc:
        raise ConfigError("grid", str(exc)) from None
    for name, op in zip(("operators.F1", "operators.F2"), ops):
        if op.dim is not None and op.dim != dim:
            raise ConfigError(name, f"operator dimension {op.dim} != grid.dim {dim}")

    cfg = RunConfig(mode=mode, operators=tuple(ops), operator_specs=specs, grid=grid)
    cfg.p = _get(cp, "exponents", "p", float, 2.0)
    cfg.q = _get(cp, "exponents", "q", float, 2.0)

    if cp.has_section("sweep"):
        sw = SweepSpec(
            _get(cp, "sweep", "p_min", float, required=True),
            _get(cp, "sweep", "p_max", float, required=True),
            _get(cp, "sweep", "p_steps", int, 1),
            _get(cp, "sweep", "q_min", float, required=True),
            _get(cp, "sweep", "q_max", float, required=True),
            _get(cp, "sweep", "q_steps", int, 1),
            _get(cp, "sweep", "certify", _bool, True),
            _get(cp, "sweep", "alpha_margin", float, 0.01),
        )
        for ax in ("p", "q"):
            lo, hi, n = getattr(sw, f"{ax}_min"), getattr(sw, f"{ax}_max"), getattr(sw, f"{ax}_steps")
            if lo < 1:
                raise ConfigError(f"sweep.{ax}_min", f"exponents must be >= 1, got {lo}")
            if hi < lo:
                raise ConfigError(f"sweep.{ax}_max", "must be >= the minimum")
            if n < 1:
                raise ConfigError(f"sweep.{ax}_steps", "must be >= 1")
        cfg.sweep = sw
    elif mode == "sweep":
        raise ConfigError("sweep", "sweep mode needs a [sweep] section")

    if mode != "sweep":
        for ax in ("p", "q"):
            val = getattr(cfg, ax)
            if val < 1:
                raise ConfigError(f"exponents.{ax}", f"exponents must be >= 1, got {val}")
        if mode in ("evolve", "certify") and cfg.p * cfg.q <= 1:
            raise ConfigError("exponents", f"coupled modes need pq > 1, got pq={cfg.p * cfg.q}")

    kind = _get(cp, "initial", "kind", str, "gaussian")
    if kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind", f"must be one of {INITIAL_KINDS}")
    cfg.initial = InitialSpec(
        kind,
        _get(cp, "initial", "amplitude", float, 1.0),
        _get(cp, "initial", "width", float, 1.0),
        _get(cp, "initial", "path1", str, None),
        _get(cp, "initial", "path2", str, None),
        _get(cp, "initial", "scale", float, 1.0),
    )
    if kind == "file" and not (cfg.initial.path1 and cfg.initial.path2):
        raise ConfigError("initial.path1", "file initial data need path1 and path2")

    cfg.t_end = _get(cp, "step", "t_end", float, 1.0)
    cfg.cfl_safety = _get(cp, "step", "cfl_safety", float, 0.9)
    cfg.dt_cap = _get(cp, "step", "dt_cap", float, None)
    cfg.blowup_threshold = _get(cp, "step", "blowup_threshold", float, 1e6)
    cfg.stride = _get(cp, "step", "stride", int, 100)
    if not 0 < cfg.cfl_safety <= 1:
        raise ConfigError("step.cfl_safety", "must lie in (0, 1]")
    if cfg.t_end <= 0:
        raise ConfigError("step.t_end", "must be positive")
    if cfg.stride < 1:
        raise ConfigError("step.stride", "must be >= 1")

    cfg.eigen_tol = _get(cp, "eigen", "tol", float, 1e-4)
    cfg.eigen_max_tau = _get(cp, "eigen", "max_tau", float, 40.0)
    cfg.eigen_renorm = _get(cp, "eigen", "renorm", float, 0.5)
    cfg.t_long = _get(cp, "certify", "t_long", float, 50.0)
    cfg.certify_tol = _get(cp, "certify", "tol", float, 1e-3)
    cfg.tol_residual = _get(cp, "certify", "tol_residual", float, 1e-3)
    cfg.alpha_margin = _get(cp, "certify", "alpha_margin", float, 0.0)

    cfg.seed = _get(cp, "run", "seed", int, 0)
    cfg.out = _get(cp, "run", "out", str, None)
    cfg.workers = _get(cp, "run", "workers", int, 1)
    if cfg.workers < 1:
        raise ConfigError("run.workers", "must be >= 1")
    return cfg


def load_config(path, mode=None):
    with open(path) as fh:
        return parse_config(fh.read(), mode)
