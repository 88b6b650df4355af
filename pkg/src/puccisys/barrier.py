"""Supersolution barriers certifying global existence for the coupled system.

With eigenpairs ``(alpha_i, psi_i)`` and ``phi_i(x, t) = t^(-alpha_i) psi_i(x / sqrt(t))``
the barrier is

    U1(x, t) = eps (t+1)^a phi_1(x, t+1),   U2(x, t) = eps (t+1)^b phi_2(x, t+1)

with ``a = alpha_1 - (p+1)/(pq-1)`` and ``b = alpha_2 - (q+1)/(pq-1)``. These
exponents make the time factors in the supersolution inequalities cancel,
leaving the nodewise conditions ``eps a psi_1 >= eps^p psi_2^p`` and
``eps b psi_2 >= eps^q psi_1^q``. Positive ``a, b`` and a small enough ``eps``
give a supersolution, and any solution started below ``U(., 0)`` stays below
it forever.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    CertificateContradiction,
    CoverageError,
    DegenerateRatio,
    InvalidArgument,
)
from .evolve import apply_operator, choose_dt, power_source, solve_system
from .grid import GridField, sup_ratio
from .selfsim import ProfileInterpolant, fit_gaussian

EPS_SAFETY = 0.9
T_SAMPLES = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
DT_T = 1e-3
RATIO_FLOOR = 1e-12


def exponents(alpha1, alpha2, p, q):
    """``(a, b)`` solving the two linear exponent-balance equations."""
    d = p * q - 1.0
    if d <= 0:
        raise InvalidArgument(f"need pq > 1, got p={p}, q={q}")
    return alpha1 - (p + 1.0) / d, alpha2 - (q + 1.0) / d


def exponent_identities(a, b, alpha1, alpha2, p, q):
    """Residuals of ``a-1-alpha1-bp+alpha2 p = 0`` and ``b-1-alpha2-aq+alpha1 q = 0``."""
    return (a - 1 - alpha1 - b * p + alpha2 * p, b - 1 - alpha2 - a * q + alpha1 * q)


def eh_value(p, q):
    """``(max{p,q}+1)/(pq-1)``, compared against N/2 on the Escobedo-Herrero curve."""
    return (max(p, q) + 1.0) / (p * q - 1.0)


@dataclass
class Admissibility:
    p_q_ge_1: bool
    pq_gt_1: bool
    ellipticity: bool
    thresholds: bool
    ratio1_bounded: bool
    ratio2_bounded: bool
    alpha_margin: float = 0.0

    @property
    def admissible(self):
        return all(
            (self.p_q_ge_1, self.pq_gt_1, self.ellipticity, self.thresholds,
             self.ratio1_bounded, self.ratio2_bounded)
        )


def check_admissibility(p, q, ops, pairs, alpha_margin=0.0):
    """Hypothesis flags for the barrier construction.

    ``ellipticity`` is ``p > Lam2/lam1 and q > Lam1/lam2``; ``thresholds`` is
    ``(p+1)/(pq-1) < alpha1 - margin and (q+1)/(pq-1) < alpha2 - margin``,
    where ``alpha_margin`` absorbs the discretization error in the computed
    eigenvalues. The ratio verdicts compare the measured Gaussian tail rates
    of the profiles: ``psi2^p/psi1`` stays bounded when ``p * rate2 >= rate1``.
    """
    op1, op2 = ops
    pair1, pair2 = pairs
    if not (pair1.converged and pair2.converged):
        raise InvalidArgument("eigenpairs must be converged")
    pq_gt_1 = p * q > 1
    flags = dict(
        p_q_ge_1=p >= 1 and q >= 1,
        pq_gt_1=pq_gt_1,
        ellipticity=p > op2.Lam / op1.lam and q > op1.Lam / op2.lam,
        thresholds=False,
        alpha_margin=alpha_margin,
    )
    if pq_gt_1:
        d = p * q - 1
        flags["thresholds"] = (p + 1) / d < pair1.alpha - alpha_margin and (
            q + 1
        ) / d < pair2.alpha - alpha_margin
    rate1, _ = fit_gaussian(pair1.psi)
    rate2, _ = fit_gaussian(pair2.psi)
    flags["ratio1_bounded"] = bool(p * rate2 >= rate1)
    flags["ratio2_bounded"] = bool(q * rate1 >= rate2)
    return Admissibility(**flags)


def _disc_constants(pair, radius_frac=0.8):
    """Tightest envelope constants on the disc ``|y| <= 0.8 R`` for the pair's rates."""
    du, _, dl, _ = pair.envelope
    g = pair.grid
    mask = (g.r2 <= (radius_frac * g.radius) ** 2) & ~g.boundary_mask
    vals, r2 = pair.psi.values[mask], g.r2[mask]
    return du, float(np.max(vals * np.exp(du * r2))), dl, float(np.min(vals * np.exp(dl * r2)))


def ratio_envelope_bound(pair_num, pair_den, power, radius_frac=0.8):
    """Envelope upper bound for ``sup psi_num^power / psi_den`` on ``|y| <= 0.8 R``."""
    du, cu, _, _ = _disc_constants(pair_num, radius_frac)
    _, _, dl, cl = _disc_constants(pair_den, radius_frac)
    rate = power * du - dl
    rmax2 = (radius_frac * pair_num.grid.radius) ** 2
    return cu**power / cl * (1.0 if rate >= 0 else math.exp(-rate * rmax2))


def profile_hash(pair):
    return hashlib.sha256(pair.psi.to_bytes()).hexdigest()


@dataclass
class BarrierCertificate:
    p: float
    q: float
    alpha1: float
    alpha2: float
    a: float
    b: float
    ratio_bounds: tuple
    conditions: dict
    epsilon: float | None = None
    residual_min: tuple | None = None
    branch_ok: bool = True
    profiles: tuple = ()
    verdict: str = "draft"
    notes: list = field(default_factory=list)

    @property
    def valid_exponents(self):
        return self.a > 0 and self.b > 0

    def to_json(self):
        out = asdict(self)
        out["ratio_bounds"] = list(self.ratio_bounds)
        out["residual_min"] = None if self.residual_min is None else list(self.residual_min)
        out["profiles"] = list(self.profiles)
        out["exponent_identities"] = list(
            exponent_identities(self.a, self.b, self.alpha1, self.alpha2, self.p, self.q)
        )
        return out


def draft_certificate(p, q, ops, pairs, alpha_margin=0.0, floor=RATIO_FLOOR):
    """Exponents, ratio bounds and hypothesis flags; ``epsilon`` is left unset."""
    pair1, pair2 = pairs
    if pair1.grid != pair2.grid:
        raise InvalidArgument("eigenpairs must share a grid")
    adm = check_admissibility(p, q, ops, pairs, alpha_margin)
    a, b = exponents(pair1.alpha, pair2.alpha, p, q)
    psi1 = np.maximum(pair1.psi.values, 0.0)
    psi2 = np.maximum(pair2.psi.values, 0.0)
    r1 = sup_ratio(psi2**p, psi1, floor).value
    r2 = sup_ratio(psi1**q, psi2, floor).value
    conditions = {k: bool(v) for k, v in asdict(adm).items() if k != "alpha_margin"}
    conditions["admissible"] = adm.admissible
    return BarrierCertificate(
        p, q, pair1.alpha, pair2.alpha, a, b, (r1, r2), conditions,
        profiles=(profile_hash(pair1), profile_hash(pair2)),
    )


def select_epsilon(cert, safety=EPS_SAFETY):
    """Largest admissible amplitude times ``safety``; stored on ``cert`` and returned.

    ``eps^(p-1) r1 <= a`` and ``eps^(q-1) r2 <= b``. An exponent equal to 1
    removes the amplitude from its constraint, which then either holds
    (``a >= r1``) or fails the certificate.
    """
    p, q, a, b = cert.p, cert.q, cert.a, cert.b
    r1, r2 = cert.ratio_bounds
    if p == 1 and q == 1:
        raise InvalidArgument("p = q = 1 violates pq > 1")
    if a <= 0 or b <= 0:
        raise InvalidArgument(f"need a, b > 0, got a={a:.4g}, b={b:.4g}")
    if not (np.isfinite(r1) and np.isfinite(r2)):
        raise DegenerateRatio("profile ratio bound is infinite")
    candidates, ok = [], True
    for expo, coef, r in ((p, a, r1), (q, b, r2)):
        if expo == 1:
            ok = ok and coef >= r
        elif r > 0:
            candidates.append((coef / r) ** (1.0 / (expo - 1.0)))
    eps = safety * min(candidates) if candidates else safety
    cert.epsilon = eps
    cert.branch_ok = ok
    if not ok:
        cert.verdict = "rejected"
        cert.notes.append("linear branch: coefficient below ratio bound")
    return eps


class BarrierField:
    """Evaluates ``U_i(., t)`` for a certificate on a fixed grid."""

    def __init__(self, cert, pairs, grid=None):
        self.cert = cert
        self.pairs = pairs
        self.grid = pairs[0].grid if grid is None else grid
        self._interp = [ProfileInterpolant(pr) for pr in pairs]

    def phi(self, i, s):
        pr = self.pairs[i]
        return s ** (-pr.alpha) * self._interp[i](self.grid.coords / math.sqrt(s))

    def __call__(self, t):
        s = t + 1.0
        eps = self.cert.epsilon
        return (eps * s**self.cert.a * self.phi(0, s), eps * s**self.cert.b * self.phi(1, s))

    def fields(self, t, boundary="dirichlet-zero"):
        u1, u2 = self(t)
        return GridField(self.grid, u1, boundary), GridField(self.grid, u2, boundary)


def barrier_residual(cert, pairs, ops, grid=None, t_samples=T_SAMPLES, dt_t=DT_T, couple=True):
    """Minimum over interior nodes and ``t_samples`` of the two supersolution residuals.

    ``d/dt U1 + F1(D^2 U1) - |U2|^(p-1) U2``: the time derivative uses the
    product rule on ``(t+1)^a`` with a centered difference of ``phi`` in time;
    spatial derivatives use the grid stencils. ``couple=False`` drops the
    source terms.
    """
    if cert.epsilon is None:
        raise InvalidArgument("select epsilon before computing residuals")
    bf = BarrierField(cert, pairs, grid)
    g = bf.grid
    s_min = 1.0 + min(t_samples) - dt_t
    for pr in pairs:
        if g.radius / math.sqrt(s_min) > pr.grid.radius + pr.grid.h:
            raise CoverageError(
                f"grid radius {g.radius} exceeds the rescaled profile box at t+1={s_min:.3g}"
            )
    inner = g.interior
    eps = cert.epsilon
    mins = [np.inf, np.inf]
    for t in t_samples:
        s = t + 1.0
        u = bf(t)
        for i, (expo, op) in enumerate(((cert.a, ops[0]), (cert.b, ops[1]))):
            phi = bf.phi(i, s)
            dphi = (bf.phi(i, s + dt_t) - bf.phi(i, s - dt_t)) / (2 * dt_t)
            dt_u = eps * (expo * s ** (expo - 1) * phi + s**expo * dphi)
            res = dt_u[inner] + apply_operator(u[i], op, g.h)
            if couple:
                other, power = (u[1], cert.p) if i == 0 else (u[0], cert.q)
                res = res - power_source(other, power)[inner]
            mins[i] = min(mins[i], float(np.min(res)))
    cert.residual_min = tuple(mins)
    return tuple(mins)


@dataclass
class GlobalReport:
    global_to_T: bool
    T: float
    max_violation: float
    ordered: bool
    decay_slope: float
    predicted_slope: float
    final_sup: tuple
    samples: int
    h: float
    dt: float


def run_from_barrier(cert, pairs, ops, ctl, scale=1.0, stride=None, grid=None):
    """Evolve the coupled system from ``scale * U(., 0)``."""
    bf = BarrierField(cert, pairs, grid)
    u10, u20 = bf.fields(0.0)
    u10, u20 = u10 * scale, u20 * scale
    if stride is None:
        stride = max(1, int(ctl.t_end / choose_dt(bf.grid, ops, ctl) / 200))
    return solve_system(u10, u20, ops, cert.p, cert.q, ctl, stride=stride), bf


def certify_global(cert, pairs, ops, ctl, tol=1e-3, stride=None, grid=None):
    """Run from the barrier's initial data to ``ctl.t_end`` and check ``u_i <= U_i + tol``.

    Raises :class:`CertificateContradiction` if the certified run blows up.
    """
    traj, bf = run_from_barrier(cert, pairs, ops, ctl, 1.0, stride, grid)
    g = bf.grid
    if traj.blown_up:
        raise CertificateContradiction(
            f"certified run blew up at t={traj.blowup_time}", g.h, traj.dt, g.radius
        )
    worst = 0.0
    for k, t in enumerate(traj.times):
        U1, U2 = bf(float(t))
        worst = max(worst, float(np.max(traj.u1[k] - U1)), float(np.max(traj.u2[k] - U2)))
    s1, _ = traj.sup_history()
    half = traj.times >= 0.5 * traj.times[-1]
    slope = float("nan")
    if np.all(s1[half] > 0) and half.sum() >= 2:
        slope = float(np.polyfit(np.log1p(traj.times[half]), np.log(s1[half]), 1)[0])
    predicted = cert.a - cert.alpha1
    return GlobalReport(
        global_to_T=True,
        T=float(traj.times[-1]),
        max_violation=max(worst, 0.0),
        ordered=worst <= tol,
        decay_slope=slope,
        predicted_slope=predicted,
        final_sup=tuple(float(x) for x in traj.final.sup_norms),
        samples=len(traj.times),
        h=g.h,
        dt=traj.dt,
    )


def build_certificate(p, q, ops, pairs, alpha_margin=0.0, tol_residual=1e-3, grid=None):
    """Draft, pick epsilon and residual-check a certificate; sets ``verdict``."""
    cert = draft_certificate(p, q, ops, pairs, alpha_margin)
    if not cert.conditions["admissible"] or not cert.valid_exponents:
        cert.verdict = "inadmissible"
        return cert
    select_epsilon(cert)
    if not cert.branch_ok:
        return cert
    r1, r2 = barrier_residual(cert, pairs, ops, grid)
    cert.verdict = "residual-ok" if min(r1, r2) >= -tol_residual else "rejected"
    return cert
