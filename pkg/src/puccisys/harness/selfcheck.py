"""Invariant suite with measured margins.

The report text is a pure function of ``(seed, cfl_safety)``: no timings or
paths, so two runs with the same seed give identical bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..barrier import exponent_identities, exponents
from ..evolve import (
    StepControl,
    cfl_limit,
    evolve_semigroup,
    semigroup_nonexpansion_check,
    solve_system,
)
from ..grid import Grid, hessian_field
from ..operators import barenblatt, laplacian, minmax_2d, pucci, pucci_minus, pucci_plus


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class SelfcheckReport:
    checks: tuple
    seed: int

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def text(self):
        lines = [f"puccisys selfcheck seed={self.seed}"]
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            lines.append(f"{tag} {c.name:<22} margin={c.margin:+.6e} {c.detail}".rstrip())
        lines.append("ALL PASS" if self.passed else "FAILED")
        return "\n".join(lines) + "\n"


def _random_sym(rng, n, count):
    A = rng.standard_normal((count, n, n))
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def check_sandwich(rng, count=1000):
    worst = np.inf
    cases = [(op, 1) for op in (laplacian(), pucci("+", 1, 2), pucci("-", 1, 2), barenblatt(0.5))]
    cases += [(op, 2) for op in (laplacian(2), pucci("+", 1, 2), minmax_2d(), barenblatt(0.3))]
    cases += [(pucci("-", 1, 2), 3)]
    for op, n in cases:
        X, Y = _random_sym(rng, n, count), _random_sym(rng, n, count)
        diff = op.evaluate_batch(X) - op.evaluate_batch(Y)
        lo = pucci_minus(X - Y, op.lam, op.Lam)
        hi = pucci_plus(X - Y, op.lam, op.Lam)
        worst = min(worst, float(np.min(diff - lo)), float(np.min(hi - diff)))
    return Check("operator-sandwich", worst >= -1e-12, worst)


def check_quadratic_exactness(rng):
    g = Grid(2, 1.0, 11)
    C = _random_sym(rng, 2, 1)[0]
    b = rng.standard_normal(2)
    x = g.coords
    vals = 0.5 * np.einsum("i...,ij,j...->...", x, C, x) + np.einsum("i,i...->...", b, x)
    err = float(np.max(np.abs(hessian_field(vals, g.h) - C)))
    return Check("quadratic-exactness", err <= 1e-10, 1e-10 - err, f"err={err:.3e}")


def check_heat_kernel(cfl_safety):
    g = Grid.from_spacing(1, 10.0, 0.05)
    t0, t1 = 0.5, 1.0

    def kernel(t):
        return lambda c: np.exp(-c[0] ** 2 / (4 * t)) / np.sqrt(4 * np.pi * t)

    u = evolve_semigroup(g.sample(kernel(t0)), laplacian(), t1 - t0, cfl_safety,
                         enforce_cfl=False)
    err = float(np.max(np.abs(u.values - g.sample(kernel(t1)).values)))
    if not math.isfinite(err):
        err = math.inf
    return Check("heat-kernel", err <= 1e-3, 1e-3 - err, f"err={err:.3e}")


def check_nonexpansion(rng, cfl_safety):
    g = Grid.from_spacing(1, 5.0, 0.05)
    op = pucci("-", 1, 2)
    x = g.coords[0]
    worst = 0.0
    for _ in range(3):
        c = rng.uniform(-1, 1, size=3)
        phi = g.sample(lambda _: np.exp(-x**2) * (1 + c[0] * np.sin(2 * x)))
        psi = g.sample(lambda _: np.exp(-x**2) * (1 + c[1] * np.cos(3 * x)) + 0.1 * c[2])
        dt = cfl_safety * cfl_limit(g, op.Lam)
        ratio = semigroup_nonexpansion_check(phi, psi, op, 0.2, cfl_safety=cfl_safety) \
            if cfl_safety <= 1 else _unchecked_ratio(phi, psi, op, dt, 0.2)
        worst = max(worst, ratio)
    return Check("nonexpansion", worst <= 1 + 1e-8, 1 + 1e-8 - worst, f"ratio={worst:.6f}")


def _unchecked_ratio(phi, psi, op, dt, t_total):
    n = max(1, math.ceil(t_total / dt))
    a = evolve_semigroup(phi, op, t_total, dt=t_total / n, enforce_cfl=False)
    b = evolve_semigroup(psi, op, t_total, dt=t_total / n, enforce_cfl=False)
    den = float(np.max(np.abs(phi.values - psi.values)))
    r = float(np.max(np.abs(a.values - b.values))) / den
    return r if math.isfinite(r) else math.inf


def check_positivity(rng, cfl_safety):
    g = Grid.from_spacing(1, 5.0, 0.05)
    op = pucci("+", 1, 2)
    amp = rng.uniform(0.5, 1.0)
    u0 = g.sample(lambda c: amp * np.exp(-c[0] ** 2) * (1 + 0.5 * np.cos(5 * c[0])))
    try:
        traj = solve_system(u0, u0, (op, op), 2.0, 2.0,
                            StepControl(t_end=0.2, cfl_safety=cfl_safety))
    except Exception as exc:  # noqa: BLE001 - a rejected step is a failed check
        return Check("positivity", False, -math.inf, type(exc).__name__)
    m = float(min(traj.u1.min(), traj.u2.min()))
    return Check("positivity", m >= -1e-8, m + 1e-8, f"min={m:.3e}")


def check_exponent_identities(rng):
    worst = 0.0
    for _ in range(20):
        p, q = rng.uniform(1.0, 6.0, size=2)
        if p * q <= 1.05:
            continue
        a1, a2 = rng.uniform(0.2, 2.0, size=2)
        a, b = exponents(a1, a2, p, q)
        worst = max(worst, *map(abs, exponent_identities(a, b, a1, a2, p, q)))
    return Check("exponent-identities", worst <= 1e-12, 1e-12 - worst)


def selfcheck(seed=0, cfl_safety=0.9):
    """Run the invariant suite; ``cfl_safety > 1`` is the deliberate-instability control."""
    rng = np.random.default_rng(seed)
    checks = (
        check_sandwich(rng),
        check_quadratic_exactness(rng),
        check_heat_kernel(cfl_safety),
        check_nonexpansion(rng, cfl_safety),
        check_positivity(rng, cfl_safety),
        check_exponent_identities(rng),
    )
    return SelfcheckReport(checks, seed)
