import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puccisys.barrier import (
    BarrierCertificate,
    BarrierField,
    barrier_residual,
    build_certificate,
    certify_global,
    check_admissibility,
    draft_certificate,
    eh_value,
    exponent_identities,
    exponents,
    ratio_envelope_bound,
    run_from_barrier,
    select_epsilon,
)
from puccisys.errors import CoverageError, InvalidArgument
from puccisys.evolve import StepControl, solve_system
from puccisys.grid import Grid
from puccisys.operators import pucci


def plain_cert(p, q, a, b, r1, r2):
    return BarrierCertificate(p, q, 0.0, 0.0, a, b, (r1, r2), {})


@pytest.fixture(scope="module")
def lap44(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    cert = build_certificate(4, 4, (op, op), (pair, pair))
    return cert, (op, op), (pair, pair)


# -- exponents -------------------------------------------------------------------


def test_exponents_example():
    a, b = exponents(0.5, 0.5, 4, 4)
    assert a == pytest.approx(0.5 - 5 / 15) and b == pytest.approx(0.5 - 5 / 15)


def test_exponents_need_pq_above_one():
    with pytest.raises(InvalidArgument):
        exponents(0.5, 0.5, 1, 1)


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 8), st.floats(1, 8), st.floats(0.1, 3), st.floats(0.1, 3))
def test_exponent_identities(p, q, a1, a2):
    if p * q < 1.01:
        return
    a, b = exponents(a1, a2, p, q)
    r = exponent_identities(a, b, a1, a2, p, q)
    assert max(map(abs, r)) <= 1e-12 * max(1.0, abs(a) * p, abs(b) * q)


def test_eh_value():
    assert eh_value(3, 3) == pytest.approx(0.5)
    assert eh_value(4, 2) == pytest.approx(5 / 7)


# -- admissibility ---------------------------------------------------------------


def test_laplacian_p4_admissible(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    adm = check_admissibility(4, 4, (op, op), (pair, pair))
    assert adm.admissible and adm.ellipticity and adm.thresholds


def test_p1_inadmissible(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    adm = check_admissibility(1, 1, (op, op), (pair, pair))
    assert not adm.pq_gt_1 and not adm.admissible


def test_pucci_ellipticity_fails(eigenpairs):
    op, pair = eigenpairs["pucci+"]
    adm = check_admissibility(1.5, 1.5, (op, op), (pair, pair))
    assert not adm.ellipticity and not adm.admissible


def test_alpha_margin_tightens(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    # p = q = 3 sits on the critical curve for the Laplacian in one dimension
    assert not check_admissibility(3, 3, (op, op), (pair, pair), alpha_margin=0.01).thresholds


# -- epsilon ---------------------------------------------------------------------


def test_epsilon_plug_in():
    assert select_epsilon(plain_cert(2, 2, 1, 1, 1, 1)) == pytest.approx(0.9)


def test_epsilon_arithmetic():
    cert = plain_cert(2, 2, 0.25, 1.0, 4.0, 1e-3)
    assert select_epsilon(cert) == pytest.approx(0.05625)


def test_epsilon_linear_branch():
    ok = plain_cert(1, 3, 2.0, 1.0, 1.5, 1.0)
    assert select_epsilon(ok) == pytest.approx(0.9)
    assert ok.branch_ok
    bad = plain_cert(1, 3, 1.0, 1.0, 1.5, 1.0)
    select_epsilon(bad)
    assert not bad.branch_ok and bad.verdict == "rejected"


@pytest.mark.parametrize("cert", [plain_cert(1, 1, 1, 1, 1, 1), plain_cert(2, 2, -0.1, 1, 1, 1)])
def test_epsilon_rejects(cert):
    with pytest.raises(InvalidArgument):
        select_epsilon(cert)


def test_epsilon_satisfies_nodewise_conditions(lap44):
    cert, _, (pair, _) = lap44
    psi = pair.psi.values
    eps = cert.epsilon
    assert np.all(eps * cert.a * psi >= (eps * psi) ** cert.p - 1e-15)


# -- residual --------------------------------------------------------------------


def test_laplacian_certificate_residual(lap44):
    cert = lap44[0]
    assert cert.verdict == "residual-ok"
    assert min(cert.residual_min) >= -1e-3


def test_residual_without_coupling(lap44):
    cert, ops, pairs = lap44
    big = BarrierCertificate(**{**cert.__dict__, "epsilon": 37.0, "notes": []})
    assert min(barrier_residual(big, pairs, ops, couple=False)) >= -1e-3


def test_inflated_epsilon_rejected(lap44):
    cert, ops, pairs = lap44
    big = BarrierCertificate(**{**cert.__dict__, "epsilon": 10 * cert.epsilon, "notes": []})
    assert min(barrier_residual(big, pairs, ops)) < -1e-3


def test_shrinking_epsilon_keeps_residual(lap44):
    cert, ops, pairs = lap44
    half = BarrierCertificate(**{**cert.__dict__, "epsilon": cert.epsilon / 2, "notes": []})
    assert min(barrier_residual(half, pairs, ops)) >= -1e-3


def test_residual_needs_epsilon(lap44):
    cert, ops, pairs = lap44
    draft = BarrierCertificate(**{**cert.__dict__, "epsilon": None, "notes": []})
    with pytest.raises(InvalidArgument):
        barrier_residual(draft, pairs, ops)


def test_residual_coverage(lap44):
    cert, ops, pairs = lap44
    with pytest.raises(CoverageError):
        barrier_residual(cert, pairs, ops, grid=Grid.from_spacing(1, 20.0, 0.05))


def test_pucci_certificate(eigenpairs):
    op, pair = eigenpairs["pucci+"]
    cert = build_certificate(4, 4, (op, op), (pair, pair))
    assert cert.verdict == "residual-ok"


def test_inadmissible_certificate(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    cert = build_certificate(2, 2, (op, op), (pair, pair))
    assert cert.verdict == "inadmissible" and cert.epsilon is None


# -- ratio bounds ----------------------------------------------------------------


@pytest.mark.parametrize("names,power", [(("laplacian", "laplacian"), 4), (("pucci+", "pucci-"), 3),
                                         (("pucci-", "pucci+"), 4)])
def test_ratio_bound_consistency(eigenpairs, names, power):
    num, den = eigenpairs[names[0]][1], eigenpairs[names[1]][1]
    g = num.grid
    disc = (g.r2 <= (0.8 * g.radius) ** 2) & ~g.boundary_mask
    measured = np.max(num.psi.values[disc] ** power / den.psi.values[disc])
    assert measured <= 1.1 * ratio_envelope_bound(num, den, power)


def test_draft_ratio_bounds(eigenpairs):
    op, pair = eigenpairs["laplacian"]
    cert = draft_certificate(4, 4, (op, op), (pair, pair))
    # psi^4/psi peaks at the origin where psi = 1
    assert cert.ratio_bounds == pytest.approx((1.0, 1.0))
    assert cert.epsilon is None


# -- global runs -----------------------------------------------------------------


def test_zero_data_global():
    g = Grid.from_spacing(1, 5.0, 0.1)
    z = g.sample(lambda c: 0 * c[0])
    op = pucci("+", 1, 2)
    traj = solve_system(z, z, (op, op), 4, 4, StepControl(t_end=5.0), stride=100)
    assert not traj.blown_up and not traj.u1.any()


def test_certified_run_short(lap44):
    cert, ops, pairs = lap44
    rep = certify_global(cert, pairs, ops, StepControl(t_end=5.0))
    assert rep.global_to_T and rep.ordered
    assert rep.max_violation <= 1e-3


def test_barrier_initial_data(lap44):
    cert, _, pairs = lap44
    u1, u2 = BarrierField(cert, pairs)(0.0)
    assert np.max(u1) == pytest.approx(cert.epsilon, rel=1e-12)


def test_large_data_leaves_certificate(lap44):
    cert, ops, pairs = lap44
    traj, _ = run_from_barrier(cert, pairs, ops, StepControl(t_end=5.0), scale=50.0)
    s1, _ = traj.sup_history()
    assert traj.blown_up or s1[-1] > s1[0]


def test_certificate_json(lap44):
    cert = lap44[0]
    d = json.loads(json.dumps(cert.to_json()))
    assert d["verdict"] == "residual-ok"
    assert max(map(abs, d["exponent_identities"])) <= 1e-12
    assert len(d["profiles"]) == 2 and len(d["profiles"][0]) == 64
