import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puccisys.errors import InvalidArgument, InvalidState, StepRejected
from puccisys.evolve import (
    StepControl,
    SystemState,
    cfl_limit,
    comparison_check,
    duhamel_fixed_point,
    evolve_semigroup,
    exponential_rescale_check,
    semigroup_nonexpansion_check,
    semigroup_step,
    solve_system,
    system_step,
)
from puccisys.grid import Grid
from puccisys.operators import laplacian, pucci

LAP = laplacian()
PP, PM = pucci("+", 1, 2), pucci("-", 1, 2)


def gauss(grid, amp=1.0, width=1.0, boundary="dirichlet-zero"):
    return grid.sample(lambda c: amp * np.exp(-np.sum(c**2, axis=0) / width**2), boundary)


@pytest.fixture
def g5():
    return Grid.from_spacing(1, 5.0, 0.1)


# -- semigroup -------------------------------------------------------------------


def test_cfl_limit():
    g = Grid(2, 1.0, 11)
    assert cfl_limit(g, 2.0) == pytest.approx(0.2**2 / 8)


def test_heat_kernel():
    g = Grid.from_spacing(1, 10.0, 0.05)
    k = lambda t: (lambda c: np.exp(-c[0] ** 2 / (4 * t)) / np.sqrt(4 * np.pi * t))  # noqa: E731
    u = evolve_semigroup(g.sample(k(0.5)), LAP, 0.5)
    assert np.max(np.abs(u.values - g.sample(k(1.0)).values)) <= 1e-3


@pytest.mark.parametrize("op", [LAP, PP, PM])
def test_constant_is_invariant(g5, op):
    c = g5.sample(lambda x: 0 * x[0] + 2.5, boundary="frozen")
    out = evolve_semigroup(c, op, 0.3)
    assert np.array_equal(out.values, c.values)


def test_zero_step_is_identity(g5):
    f = gauss(g5)
    assert semigroup_step(f, PP, 0.0) is f
    assert evolve_semigroup(f, PP, 0.0) is f


def test_cfl_violation_rejected(g5):
    with pytest.raises(StepRejected):
        semigroup_step(gauss(g5), PP, 1.01 * cfl_limit(g5, 2.0))
    semigroup_step(gauss(g5), PP, cfl_limit(g5, 2.0))


def test_negative_dt_rejected(g5):
    with pytest.raises(InvalidArgument):
        semigroup_step(gauss(g5), LAP, -1e-3)


def test_nonexpansion_examples(g5):
    phi = gauss(g5, boundary="frozen")
    assert semigroup_nonexpansion_check(phi, phi, PM, 0.5) == 0.0
    # a constant shift is transported unchanged
    assert semigroup_nonexpansion_check(phi, phi + 0.3, PM, 0.5) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 3))
def test_nonexpansion_random_pairs(a, b, w):
    g = Grid.from_spacing(1, 5.0, 0.1)
    x = g.coords[0]
    phi = g.sample(lambda _: np.exp(-x**2) * (1 + a * np.sin(3 * x)))
    psi = g.sample(lambda _: np.exp(-(x**2) / w) * (1 + b * np.cos(2 * x)))
    for op in (PP, PM):
        assert semigroup_nonexpansion_check(phi, psi, op, 0.3) <= 1 + 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5))
def test_constant_shift_equivariance(c):
    g = Grid.from_spacing(1, 5.0, 0.1)
    phi = gauss(g, boundary="frozen")
    a = evolve_semigroup(phi + c, PM, 0.2)
    b = evolve_semigroup(phi, PM, 0.2) + c
    assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_semigroup_order_preserving(g5):
    lo = gauss(g5, 1.0)
    hi = gauss(g5, 1.5, 1.2)
    assert np.all(lo.values <= hi.values)
    for op in (PP, PM, LAP):
        assert np.all(evolve_semigroup(lo, op, 0.5).values <= evolve_semigroup(hi, op, 0.5).values)


# -- coupled system --------------------------------------------------------------


def test_zero_data_stays_zero(g5):
    z = g5.sample(lambda c: 0 * c[0])
    s = system_step(SystemState(z, z), (LAP, LAP), 2, 2, StepControl(), dt=0.004)
    assert not s.u1.values.any() and not s.u2.values.any()
    assert s.t == pytest.approx(0.004)


def test_uncoupled_step_is_semigroup_step(g5):
    f = gauss(g5)
    s = system_step(SystemState(f, f), (PP, PM), 2, 3, StepControl(), dt=0.002, couple=False)
    assert np.array_equal(s.u1.values, semigroup_step(f, PP, 0.002).values)
    assert np.array_equal(s.u2.values, semigroup_step(f, PM, 0.002).values)


def test_source_increases_solution(g5):
    f = gauss(g5)
    s = system_step(SystemState(f, f), (LAP, LAP), 2, 2, StepControl(), dt=0.004)
    free = semigroup_step(f, LAP, 0.004)
    assert np.all(s.u1.values >= free.values)


def test_blowup_detected(g5):
    f = gauss(g5, 5.0)
    traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=2.0))
    assert traj.blown_up
    assert 0 < traj.blowup_time < 2.0
    assert traj.final.blown_up
    with pytest.raises(InvalidState):
        system_step(traj.final, (LAP, LAP), 2, 2, StepControl())


def test_small_data_global_for_supercritical(g5):
    f = gauss(g5, 0.05)
    traj = solve_system(f, f, (LAP, LAP), 4, 4, StepControl(t_end=2.0), stride=50)
    assert not traj.blown_up
    h1, h2 = traj.sup_history()
    assert np.all(np.diff(h1) <= 0)


def test_solve_system_mesh(g5):
    f = gauss(g5, 0.1)
    traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=0.1), dt=0.003, stride=5)
    n = int(np.ceil(0.1 / 0.003))
    assert traj.meta["steps"] == n
    assert traj.dt == pytest.approx(0.1 / n)
    assert traj.times[-1] == pytest.approx(0.1)
    assert len(traj) == n // 5 + 1 + (n % 5 != 0)


def test_positivity_preserved(g5):
    f = g5.sample(lambda c: np.exp(-c[0] ** 2) * (1 + 0.9 * np.cos(4 * c[0])))
    traj = solve_system(f, f, (PP, PM), 2, 3, StepControl(t_end=0.5))
    assert traj.u1.min() >= 0 and traj.u2.min() >= 0


def test_blowup_monotone_in_amplitude(g5):
    times = []
    for amp in (3.0, 5.0, 8.0):
        f = gauss(g5, amp)
        traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=2.0))
        assert traj.blown_up
        times.append(traj.blowup_time)
    assert times[0] >= times[1] >= times[2]


def test_on_snapshot_called(g5):
    seen = []
    f = gauss(g5, 0.1)
    traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=0.05), stride=3,
                        on_snapshot=seen.append)
    assert len(seen) == len(traj)


# -- Duhamel ---------------------------------------------------------------------


def test_duhamel_zero_data(g5):
    z = g5.sample(lambda c: 0 * c[0])
    res = duhamel_fixed_point(z, z, (LAP, LAP), 2, 2, 0.1)
    assert res.iterations == 1
    assert res.distances == [0.0]
    assert not res.trajectory.u1.any()


def test_duhamel_uncoupled_is_free_orbit(g5):
    f = gauss(g5)
    res = duhamel_fixed_point(f, f, (PP, LAP), 2, 2, 0.1, couple=False)
    dt = res.trajectory.dt
    n = len(res.trajectory) - 1
    assert np.array_equal(res.trajectory.u1[-1], evolve_semigroup(f, PP, n * dt, dt=dt).values)


def test_duhamel_contracts_and_matches_stepping(g5):
    f = gauss(g5, 0.5)
    res = duhamel_fixed_point(f, f, (LAP, LAP), 2, 2, 0.2, tol=1e-10)
    assert res.trajectory.meta["converged"]
    assert res.contraction_factor < 1
    traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=0.2), dt=res.trajectory.dt)
    assert np.max(np.abs(traj.u1[-1] - res.trajectory.u1[-1])) <= 10 * res.trajectory.dt


# -- comparison and rescaling ----------------------------------------------------


def test_comparison_same_run(g5):
    f = gauss(g5, 0.5)
    traj = solve_system(f, f, (LAP, PP), 2, 2, StepControl(t_end=0.2))
    rep = comparison_check(traj, traj)
    assert rep.max_violation == 0 and rep.component is None and rep.initially_ordered


def test_comparison_ordered_data(g5):
    ctl = StepControl(t_end=0.3)
    lo = solve_system(gauss(g5, 0.5), gauss(g5, 0.3), (PM, PP), 2, 3, ctl, dt=0.002, stride=5)
    hi = solve_system(gauss(g5, 0.7), gauss(g5, 0.6), (PM, PP), 2, 3, ctl, dt=0.002, stride=5)
    assert comparison_check(lo, hi).max_violation == 0
    rev = comparison_check(hi, lo)
    assert rev.max_violation > 0 and not rev.initially_ordered


def test_comparison_mesh_mismatch(g5):
    f = gauss(g5, 0.5)
    a = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=0.1), dt=0.004)
    b = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=0.1), dt=0.002)
    with pytest.raises(InvalidArgument):
        comparison_check(a, b)


def test_rescale_nu_zero_exact(g5):
    f = gauss(g5, 0.5)
    traj = solve_system(f, f, (LAP, PM), 2, 2, StepControl(t_end=0.2), stride=7)
    assert exponential_rescale_check(traj, 0.0) == 0.0


def test_rescale_zero_solution(g5):
    z = g5.sample(lambda c: 0 * c[0])
    traj = solve_system(z, z, (LAP, LAP), 2, 2, StepControl(t_end=0.1))
    assert exponential_rescale_check(traj, 0.7) == 0.0


def test_rescale_small_gap(g5):
    f = gauss(g5, 0.5)
    traj = solve_system(f, f, (LAP, PP), 2, 2, StepControl(t_end=0.3))
    assert exponential_rescale_check(traj, 0.5) <= 1e-2 * traj.u1.max()


def test_rescale_blown_up_rejected(g5):
    f = gauss(g5, 5.0)
    traj = solve_system(f, f, (LAP, LAP), 2, 2, StepControl(t_end=2.0))
    with pytest.raises(InvalidState):
        exponential_rescale_check(traj, 0.5)
