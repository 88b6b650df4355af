"""Self-similar profiles of ``u_t + F(D^2 u) = 0``.

A solution ``Phi(x, t) = t^(-alpha) psi(x / sqrt(t))`` has a profile solving

    F(D^2 psi) - (1/2) y . D psi = alpha psi,     psi > 0,  psi -> 0 at infinity.

In the similarity variables ``y = x / sqrt(t)``, ``tau = log t`` the flow
becomes ``w_tau + F(D^2 w) - (1/2) y . Dw = 0`` and ``w ~ exp(-alpha tau) psi``.
Since F is positively homogeneous the flow commutes with positive scaling,
so renormalizing ``w`` and reading off the sup-norm decay rate is a power
iteration for ``(alpha, psi)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .errors import DegenerateProfile, InvalidArgument, StepRejected
from .grid import Grid, GridField, upwind_drift_field
from .evolve import apply_operator

RENORM_INTERVAL = 0.5
WINDOW = (0.2, 0.8)
UPPER_SLACK = 0.9
LOWER_SLACK = 1.1


def rescaled_cfl_limit(grid, Lam, drift=True):
    """Monotonicity bound for the explicit rescaled step (diffusion plus upwind drift)."""
    rate = 2.0 * grid.dim * Lam / grid.h**2
    if drift:
        rate += grid.dim * 0.5 * grid.radius / grid.h
    return 1.0 / rate


def _drift(grid):
    inner = grid.interior
    return 0.5 * grid.coords[(slice(None),) + inner]


def rescaled_step(w, op, dtau, drift=True):
    """One explicit step of ``w_tau = -F(D^2 w) + (1/2) y . Dw``, Dirichlet-zero boundary.

    With ``drift=False`` this is exactly :func:`puccisys.evolve.semigroup_step`.
    """
    limit = rescaled_cfl_limit(w.grid, op.Lam, drift)
    if dtau > limit * (1 + 1e-12):
        raise StepRejected(f"dtau={dtau:.3e} exceeds the rescaled-flow limit {limit:.3e}")
    v = w.values
    inner = w.grid.interior
    rhs = -apply_operator(v, op, w.grid.h)
    if drift:
        rhs = rhs + upwind_drift_field(v, w.grid.h, _drift(w.grid))
    new = v.copy()
    new[inner] = v[inner] + dtau * rhs
    return w.replace(new).with_boundary(w)


@dataclass(eq=False)
class EigenPair:
    alpha: float
    psi: GridField
    converged: bool
    alpha_history: list
    envelope: tuple = ()
    fit: tuple = ()
    operator: str = ""
    tau: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.psi.grid

    def to_json(self):
        g = self.grid
        du, cu, dl, cl = self.envelope
        return {
            "alpha": self.alpha,
            "converged": self.converged,
            "alpha_history": list(self.alpha_history),
            "envelope": {"delta_upper": du, "C_upper": cu, "delta_lower": dl, "C_lower": cl},
            "fit": {"delta": self.fit[0], "C": self.fit[1]},
            "operator": self.operator,
            "tau": self.tau,
            "grid": {"dim": g.dim, "radius": g.radius, "points_per_axis": g.points_per_axis},
            **self.meta,
        }

    def save(self, stem):
        """Write ``<stem>.json`` (metadata) and ``<stem>.bin`` (profile)."""
        stem = Path(stem)
        self.psi.to_binary(stem.with_suffix(".bin"))
        stem.with_suffix(".json").write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        psi = GridField.from_binary(stem.with_suffix(".bin"))
        env = meta["envelope"]
        return cls(
            meta["alpha"],
            psi,
            meta["converged"],
            meta["alpha_history"],
            (env["delta_upper"], env["C_upper"], env["delta_lower"], env["C_lower"]),
            (meta["fit"]["delta"], meta["fit"]["C"]),
            meta["operator"],
            meta["tau"],
        )


def _window_mask(grid, window=WINDOW):
    r = np.sqrt(grid.r2)
    mask = (r >= window[0] * grid.radius) & (r <= window[1] * grid.radius)
    mask &= ~grid.boundary_mask
    return mask


def fit_gaussian(psi, window=WINDOW):
    """Least-squares fit of ``log psi = log C - delta |y|^2`` on the annulus window."""
    mask = _window_mask(psi.grid, window) & (psi.values > 0)
    if mask.sum() < 2:
        raise InvalidArgument("fitting window holds fewer than two positive nodes")
    slope, intercept = np.polyfit(psi.grid.r2[mask], np.log(psi.values[mask]), 1)
    return float(-slope), float(math.exp(intercept))


def _envelope_constants(psi, lam, Lam, window=WINDOW):
    mask = _window_mask(psi.grid, window)
    if not mask.any():
        raise InvalidArgument("fitting window is empty")
    r2 = psi.grid.r2[mask]
    vals = psi.values[mask]
    du = UPPER_SLACK / (4.0 * Lam)
    dl = LOWER_SLACK / (4.0 * lam)
    return du, float(np.max(vals * np.exp(du * r2))), dl, float(np.min(vals * np.exp(dl * r2)))


def power_iterate(
    op, grid, tol=1e-4, max_tau=40.0, renorm=RENORM_INTERVAL, w0=None, dtau=None, cfl_safety=0.9
):
    """Eigenpair ``(alpha, psi)`` from the long-time decay of the rescaled flow.

    Parameters
    ----------
    op : EllipticOperator
    grid : Grid
        Box ``[-R, R]^N``; R must be large enough that the profile has
        decayed well before the boundary.
    tol : float
        Stop when two successive decay-rate estimates differ by less than this.
    max_tau : float
        Give up (``converged=False``) after this much rescaled time.
    renorm : float
        Rescaled time between renormalizations / decay-rate readings.
    w0 : GridField, optional
        Positive initial guess, default ``exp(-|y|^2/4)``.

    Returns
    -------
    EigenPair
    """
    if w0 is None:
        w0 = grid.sample(lambda c: np.exp(-np.sum(c**2, axis=0) / 4.0))
    if dtau is None:
        dtau = cfl_safety * rescaled_cfl_limit(grid, op.Lam)
    n_sub = max(1, math.ceil(renorm / dtau - 1e-9))
    dtau = renorm / n_sub
    w = w0.with_boundary()
    norm = float(np.max(np.abs(w.values)))
    if norm <= 0:
        raise InvalidArgument("initial guess must be positive")
    history, tau, converged = [], 0.0, False
    while tau < max_tau - 1e-12:
        for _ in range(n_sub):
            w = rescaled_step(w, op, dtau)
        tau += renorm
        new = float(np.max(np.abs(w.values)))
        if not np.isfinite(new) or new <= 0:
            raise DegenerateProfile("profile vanished or diverged during power iteration")
        history.append(-math.log(new / norm) / renorm)
        w = w * (1.0 / new)
        norm = 1.0
        if np.min(w.values[grid.interior]) < -1e-6:
            raise DegenerateProfile(
                f"profile lost positivity (min {np.min(w.values):.2e}); refine h or enlarge R"
            )
        if len(history) >= 2 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
    envelope = _envelope_constants(w, op.lam, op.Lam)
    return EigenPair(
        alpha=history[-1],
        psi=w,
        converged=converged,
        alpha_history=history,
        envelope=envelope,
        fit=fit_gaussian(w),
        operator=op.describe(),
        tau=tau,
        meta={"lambda": op.lam, "Lambda": op.Lam, "renorm": renorm, "dtau": dtau, "tol": tol},
    )


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    upper_passed: bool
    lower_passed: bool
    delta_upper: float
    C_upper: float
    delta_lower: float
    C_lower: float
    delta_fit: float


def envelope_check(pair, lam, Lam, window=WINDOW):
    """Check the two-sided Gaussian envelope of a profile.

    The constants are the tightest ones on the window for the rates
    ``0.9/(4 Lam)`` (upper) and ``1.1/(4 lam)`` (lower). A bound *passes* when
    the profile's fitted Gaussian rate on the window is at least the upper
    rate (so the upper constant does not grow with the window) and at most
    the lower rate.
    """
    du, cu, dl, cl = _envelope_constants(pair.psi, lam, Lam, window)
    delta_fit, _ = fit_gaussian(pair.psi, window)
    up = delta_fit >= du and np.isfinite(cu)
    lo = delta_fit <= dl and cl > 0
    return EnvelopeReport(bool(up and lo), bool(up), bool(lo), du, cu, dl, cl, delta_fit)


class ProfileInterpolant:
    """Smooth interpolant of ``psi`` with Gaussian-envelope extrapolation outside the box."""

    def __init__(self, pair):
        g = pair.grid
        self.radius = g.radius
        self.dim = g.dim
        self.delta, self.C = pair.fit
        if g.dim == 1:
            self._f = CubicSpline(g.axis, pair.psi.values)
        else:
            self._f = RegularGridInterpolator([g.axis] * g.dim, pair.psi.values, method="cubic")

    def __call__(self, y):
        """``y`` has shape ``(N, ...)``."""
        y = np.asarray(y, dtype=float)
        inside = np.all(np.abs(y) <= self.radius, axis=0)
        out = self.C * np.exp(-self.delta * np.sum(y**2, axis=0))
        if inside.any():
            pts = y[:, inside]
            if self.dim == 1:
                out[inside] = self._f(pts[0])
            else:
                out[inside] = self._f(pts.T)
        return out


def self_similar_field(pair, t, grid=None, interp=None):
    """``phi(x, t) = t^(-alpha) psi(x / sqrt(t))`` sampled on ``grid`` (default: the profile's)."""
    if t <= 0:
        raise InvalidArgument(f"t must be positive, got {t}")
    grid = pair.grid if grid is None else grid
    if t == 1 and grid == pair.grid:
        return pair.psi.replace(pair.psi.values.copy())
    interp = ProfileInterpolant(pair) if interp is None else interp
    vals = t ** (-pair.alpha) * interp(grid.coords / math.sqrt(t))
    return GridField(grid, vals, pair.psi.boundary)


def default_grid(dim=1, radius=10.0, h=0.05):
    return Grid.from_spacing(dim, radius, h)
