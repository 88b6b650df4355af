"""Explicit time integration for the weakly coupled system

    d/dt u1 + F1(D^2 u1) = |u2|^(p-1) u2
    d/dt u2 + F2(D^2 u2) = |u1|^(q-1) u1

plus the Duhamel (mild-solution) fixed point and numerical checks of the
comparison principle. Everything is forward Euler under the CFL bound
``dt <= h^2 / (2 N Lambda)``, which makes the scheme monotone in N = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument, InvalidState, StepRejected
from .grid import GridField, hessian_field, sup_norm

_CFL_SLACK = 1.0 + 1e-12


@dataclass(frozen=True)
class StepControl:
    t_end: float = 1.0
    cfl_safety: float = 0.9
    dt_cap: float | None = None
    blowup_threshold: float = 1e6

    def __post_init__(self):
        if self.cfl_safety <= 0:
            raise InvalidArgument("cfl_safety must be positive")
        if self.dt_cap is not None and self.dt_cap <= 0:
            raise InvalidArgument("dt_cap must be positive")


def cfl_limit(grid, Lam):
    """Largest stable explicit step for an operator with upper constant ``Lam``."""
    return grid.h**2 / (2.0 * grid.dim * Lam)


def choose_dt(grid, ops, ctl):
    dt = ctl.cfl_safety * cfl_limit(grid, max(op.Lam for op in ops))
    if ctl.dt_cap is not None:
        dt = min(dt, ctl.dt_cap)
    return dt


def _check_cfl(grid, op, dt):
    limit = cfl_limit(grid, op.Lam)
    if dt > limit * _CFL_SLACK:
        raise StepRejected(f"dt={dt:.3e} exceeds the CFL limit {limit:.3e} for Lambda={op.Lam}")


def apply_operator(values, op, h):
    """``F(D^2 v)`` on the interior nodes of the array ``values``."""
    return op.evaluate_batch(hessian_field(values, h))


def power_source(u, p):
    """``|u|^(p-1) u``, written as ``sign(u) |u|^p`` so it is defined for every real u."""
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sign(u) * np.abs(u) ** p


def _euler(f, op, dt, source=None, nu=0.0):
    """One forward Euler step of ``v_t = -F(D^2 v) - nu v + source`` (interior only).

    Shared by the plain and the exponentially rescaled systems so that
    ``nu = 0`` reproduces the plain system bit for bit.
    """
    v = f.values
    inner = f.grid.interior
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = -apply_operator(v, op, f.grid.h) - nu * v[inner]
        if source is not None:
            rhs = rhs + source[inner]
        new = v.copy()
        new[inner] = v[inner] + dt * rhs
    return f.replace(new).with_boundary(f)


def semigroup_step(f, op, dt, enforce_cfl=True):
    """One explicit step of ``u_t = -F(D^2 u)``.

    Raises :class:`StepRejected` if ``dt`` breaks the CFL bound for ``op``;
    ``enforce_cfl=False`` is for deliberate instability probes only.
    """
    if dt < 0:
        raise InvalidArgument("dt must be nonnegative")
    if enforce_cfl:
        _check_cfl(f.grid, op, dt)
    if dt == 0:
        return f
    return _euler(f, op, dt)


def evolve_semigroup(f, op, t_total, cfl_safety=0.9, dt=None, enforce_cfl=True):
    """Approximate ``S(t_total) f`` with uniform steps no larger than ``dt``."""
    if t_total < 0:
        raise InvalidArgument("t_total must be nonnegative")
    if t_total == 0:
        return f
    dt_max = cfl_safety * cfl_limit(f.grid, op.Lam) if dt is None else dt
    n = max(1, math.ceil(t_total / dt_max - 1e-9))
    step = t_total / n
    for _ in range(n):
        f = semigroup_step(f, op, step, enforce_cfl)
    return f


def semigroup_nonexpansion_check(phi, psi, op, t_total, cfl_safety=0.9):
    """``||S(t)phi - S(t)psi||_inf / ||phi - psi||_inf`` (0 when the inputs coincide)."""
    if phi.grid != psi.grid:
        raise InvalidArgument("fields live on different grids")
    denom = sup_norm(phi - psi)
    if denom == 0:
        return 0.0
    a = evolve_semigroup(phi, op, t_total, cfl_safety)
    b = evolve_semigroup(psi, op, t_total, cfl_safety)
    return sup_norm(a - b) / denom


# -- coupled system ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SystemState:
    u1: GridField
    u2: GridField
    t: float = 0.0
    blown_up: bool = False
    blowup_time: float | None = None

    @property
    def sup_norms(self):
        return (sup_norm(self.u1), sup_norm(self.u2))

    @property
    def grid(self):
        return self.u1.grid


def _blew_up(u1, u2, threshold):
    for u in (u1, u2):
        v = u.values
        if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > threshold:
            return True
    return False


def system_step(s, ops, p, q, ctl, dt=None, couple=True):
    """Advance the coupled system by one forward Euler step.

    The source is evaluated at the current step. The returned state is
    flagged blown-up when a sup-norm passes ``ctl.blowup_threshold`` or a
    value stops being finite.
    """
    if s.blown_up:
        raise InvalidState(f"cannot step a blown-up state (t*={s.blowup_time})")
    op1, op2 = ops
    if dt is None:
        dt = choose_dt(s.grid, ops, ctl)
    _check_cfl(s.grid, op1, dt)
    _check_cfl(s.grid, op2, dt)
    src1 = power_source(s.u2.values, p) if couple else None
    src2 = power_source(s.u1.values, q) if couple else None
    u1 = _euler(s.u1, op1, dt, src1)
    u2 = _euler(s.u2, op2, dt, src2)
    t = s.t + dt
    if _blew_up(u1, u2, ctl.blowup_threshold):
        return SystemState(u1, u2, t, True, t)
    return SystemState(u1, u2, t)


@dataclass(eq=False)
class Trajectory:
    """Snapshots of a system run on a fixed time mesh.

    ``u1``/``u2`` have shape ``(n_snapshots,) + grid.shape``. The final state
    is always stored, also when it is not on the stride.
    """

    grid: object
    boundary: str
    times: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    dt: float
    ops: tuple = ()
    p: float = 1.0
    q: float = 1.0
    blown_up: bool = False
    blowup_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, k):
        g = lambda v: GridField(self.grid, v, self.boundary)  # noqa: E731
        last = k in (-1, len(self.times) - 1)
        return SystemState(
            g(self.u1[k]),
            g(self.u2[k]),
            float(self.times[k]),
            self.blown_up and last,
            self.blowup_time if self.blown_up and last else None,
        )

    @property
    def final(self):
        return self.state(-1)

    def sup_history(self):
        ax = tuple(range(1, self.u1.ndim))
        return np.max(np.abs(self.u1), axis=ax), np.max(np.abs(self.u2), axis=ax)


def solve_system(u10, u20, ops, p, q, ctl, stride=1, dt=None, couple=True, on_snapshot=None):
    """Run :func:`system_step` from ``(u10, u20)`` until ``ctl.t_end`` or blow-up.

    The step count is ``ceil(t_end / dt)`` with ``dt`` shrunk to land exactly
    on ``t_end``. ``on_snapshot`` is called with every stored state.
    """
    if u10.grid != u20.grid:
        raise InvalidArgument("initial data live on different grids")
    if dt is None:
        dt = choose_dt(u10.grid, ops, ctl)
    n = max(1, math.ceil(ctl.t_end / dt - 1e-9))
    dt = ctl.t_end / n
    state = SystemState(u10.with_boundary(), u20.with_boundary(), 0.0)
    if _blew_up(state.u1, state.u2, ctl.blowup_threshold):
        state = replace(state, blown_up=True, blowup_time=0.0)
    times, s1, s2 = [0.0], [state.u1.values], [state.u2.values]
    if on_snapshot is not None:
        on_snapshot(state)
    k = 0
    while not state.blown_up and k < n:
        state = system_step(state, ops, p, q, ctl, dt=dt, couple=couple)
        k += 1
        # recompute t from the step count so the mesh carries no round-off drift
        state = replace(state, t=k * dt, blowup_time=k * dt if state.blown_up else None)
        if k % stride == 0 or k == n or state.blown_up:
            times.append(state.t)
            s1.append(state.u1.values)
            s2.append(state.u2.values)
            if on_snapshot is not None:
                on_snapshot(state)
    return Trajectory(
        u10.grid,
        u10.boundary,
        np.array(times),
        np.array(s1),
        np.array(s2),
        dt,
        tuple(ops),
        p,
        q,
        state.blown_up,
        state.blowup_time,
        {"stride": stride, "couple": couple, "steps": k},
    )


# -- Duhamel fixed point ------------------------------------------------------


@dataclass(eq=False)
class DuhamelResult:
    trajectory: Trajectory
    iterations: int
    contraction_factor: float
    distances: list


def _free_orbit(f, op, dt, n):
    out = [f.values]
    for _ in range(n):
        f = semigroup_step(f, op, dt)
        out.append(f.values)
    return np.array(out)


def _duhamel_integral(g, op, grid, boundary, dt):
    """Trapezoid rule for ``int_0^{t_n} S(t_n - s) g(s) ds`` at every mesh time.

    ``S`` may be nonlinear, so each ``g_k`` is propagated separately.
    """
    n = len(g) - 1
    acc = np.zeros_like(g)
    for k in range(n + 1):
        y = GridField(grid, g[k].copy(), boundary)
        for m in range(k, n + 1):
            if m > 0:
                w = 0.5 if (k == 0 or k == m) else 1.0
                acc[m] += dt * w * y.values
            if m < n:
                y = semigroup_step(y, op, dt)
    return acc


def duhamel_fixed_point(
    u10, u20, ops, p, q, T, tol=1e-8, max_iter=50, dt=None, cfl_safety=0.9, couple=True
):
    """Solve the mild formulation by Picard iteration on the stepping mesh.

    Iterates ``v <- (S1(t)u10 + int S1(t-s)|v2|^(p-1)v2 ds, S2(t)u20 + ...)``
    starting from the free evolution. The contraction factor is the largest
    observed ratio of successive sup-distances between iterates.
    """
    op1, op2 = ops
    grid, bnd = u10.grid, u10.boundary
    if dt is None:
        dt = cfl_safety * cfl_limit(grid, max(op1.Lam, op2.Lam))
    n = max(1, math.ceil(T / dt - 1e-9))
    dt = T / n
    z1 = _free_orbit(u10.with_boundary(), op1, dt, n)
    z2 = _free_orbit(u20.with_boundary(), op2, dt, n)
    v1, v2 = z1, z2
    distances, factor, it = [], 0.0, 0
    for it in range(1, max_iter + 1):
        if couple:
            w1 = z1 + _duhamel_integral(power_source(v2, p), op1, grid, bnd, dt)
            w2 = z2 + _duhamel_integral(power_source(v1, q), op2, grid, bnd, dt)
        else:
            w1, w2 = z1, z2
        d = max(float(np.max(np.abs(w1 - v1))), float(np.max(np.abs(w2 - v2))))
        if distances and distances[-1] > 0:
            factor = max(factor, d / distances[-1])
        distances.append(d)
        v1, v2 = w1, w2
        if d < tol:
            break
    traj = Trajectory(
        grid, bnd, dt * np.arange(n + 1), v1, v2, dt, tuple(ops), p, q,
        meta={"method": "duhamel", "converged": distances[-1] < tol},
    )
    return DuhamelResult(traj, it, factor, distances)


# -- numerical comparison checks ---------------------------------------------


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    component: int | None
    time: float | None
    initially_ordered: bool


def comparison_check(sub, sup):
    """Largest positive part of ``sub_i - sup_i`` over components, times and nodes."""
    if sub.grid != sup.grid or sub.u1.shape != sup.u1.shape:
        raise InvalidArgument("trajectories are on different grids or snapshot counts")
    if not np.allclose(sub.times, sup.times, rtol=0, atol=1e-12):
        raise InvalidArgument("trajectories are on different time meshes")
    ordered = bool(np.all(sub.u1[0] <= sup.u1[0]) and np.all(sub.u2[0] <= sup.u2[0]))
    worst, comp, when = 0.0, None, None
    for i, (a, b) in enumerate(((sub.u1, sup.u1), (sub.u2, sup.u2)), start=1):
        gap = np.maximum(a - b, 0.0).reshape(len(a), -1).max(axis=1)
        k = int(np.argmax(gap))
        if gap[k] > worst:
            worst, comp, when = float(gap[k]), i, float(sub.times[k])
    return ComparisonReport(worst, comp, when, ordered)


def rescaled_system(u10, u20, ops, p, q, nu, dt, n_steps, stride=1):
    """Evolve ``w_t + F(D^2 w) + nu w = e^((p-1) nu t)|w2|^(p-1) w2`` (and the twin).

    This is the equation solved by ``w = exp(-nu t) u``.
    """
    op1, op2 = ops
    w1, w2 = u10.with_boundary(), u20.with_boundary()
    out1, out2 = [w1.values], [w2.values]
    for k in range(n_steps):
        t = k * dt
        c1 = math.exp((p - 1) * nu * t)
        c2 = math.exp((q - 1) * nu * t)
        s1 = c1 * power_source(w2.values, p)
        s2 = c2 * power_source(w1.values, q)
        w1, w2 = _euler(w1, op1, dt, s1, nu), _euler(w2, op2, dt, s2, nu)
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            out1.append(w1.values)
            out2.append(w2.values)
    return np.array(out1), np.array(out2)


def exponential_rescale_check(traj, nu):
    """Max sup-gap between ``exp(-nu t) u_i(t)`` and the directly evolved ``w_i(t)``."""
    if traj.blown_up:
        raise InvalidState("trajectory blew up; the rescaled comparison is undefined")
    if not traj.meta.get("couple", True):
        raise InvalidArgument("rescale check needs a coupled trajectory")
    stride = traj.meta.get("stride", 1)
    n_steps = traj.meta.get("steps", len(traj.times) - 1)
    g = lambda v: GridField(traj.grid, v, traj.boundary)  # noqa: E731
    w1, w2 = rescaled_system(
        g(traj.u1[0]), g(traj.u2[0]), traj.ops, traj.p, traj.q, nu, traj.dt, n_steps, stride
    )
    scale = np.exp(-nu * traj.times).reshape((-1,) + (1,) * traj.grid.dim)
    gap1 = np.max(np.abs(scale * traj.u1 - w1))
    gap2 = np.max(np.abs(scale * traj.u2 - w2))
    return float(max(gap1, gap2))
