import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import make_basis
from mems_galerkin import (
    DomainNotAdmissible,
    InvalidSpec,
    MassAtTouchdown,
    NotSupercritical,
    PositivityFailure,
    RadialBall,
    SolveConfig,
    solve_parabolic,
)
from mems_galerkin.quench import (
    g_of_M,
    principal_eigenpair,
    quench_bound,
    quench_constants,
    touchdown_bound,
    touchdown_bound_second_order,
    verify_mass_inequality,
)


def test_phi1_interval(navier):
    pair = principal_eigenpair(navier)
    x = navier.grid.nodes
    # normalization uses the trapezoid rule, so agreement is O(h^2)
    assert np.max(np.abs(pair.phi1 - 0.5 * np.pi * np.sin(np.pi * x))) < 4 * navier.grid.h**2
    assert np.sum(navier.grid.weights * pair.phi1) == pytest.approx(1.0, abs=1e-14)
    assert pair.lambda1 == pytest.approx(np.pi**4, rel=1e-8)


def test_g_vanishes_at_threshold_minimizer():
    lam1 = Fraction(97)
    lam = 4 * lam1 / 27
    M = Fraction(1, 3)
    assert -lam1 * M + lam / (1 - M) ** 2 == 0
    assert abs(g_of_M(1 / 3, float(lam), float(lam1))) < 1e-13


def test_g_rejects_touchdown():
    with pytest.raises(MassAtTouchdown):
        g_of_M(1.0, 1.0, 1.0)


@pytest.mark.parametrize("factor", [0.5, 1.0, 2.0, 10.0])
def test_c0_matches_scan(factor):
    lam1 = np.pi**4
    lam = factor * 4 * lam1 / 27
    qc = quench_constants(lam, lam1)
    M = np.linspace(-3, 1 - 1e-3, 2_000_001)
    g = -lam1 * M + lam / (1 - M) ** 2
    assert qc.c0 == pytest.approx(g.min(), rel=1e-8, abs=1e-8 * lam1)
    assert qc.lambda_threshold == pytest.approx(4 * lam1 / 27)
    assert (qc.c0 > 0) == (factor > 1)


def test_c0_with_reference_mass():
    lam1 = 10.0
    lam = 2 * 4 * lam1 / 27
    qc = quench_constants(lam, lam1, m_ref=0.9)
    assert qc.c0 == pytest.approx(g_of_M(0.9, lam, lam1)) and qc.M_star == 0.9
    assert quench_constants(lam, lam1, m_ref=-5.0).c0 == quench_constants(lam, lam1).c0


def test_bounds():
    assert touchdown_bound(0.2, 4.0) == pytest.approx(0.2)
    t2 = touchdown_bound_second_order(0.2, 4.0, 0.5)
    assert 0.2 + 0.5 * t2 + 2.0 * t2**2 == pytest.approx(1.0)
    with pytest.raises(NotSupercritical):
        touchdown_bound(0.0, 0.0)
    with pytest.raises(InvalidSpec):
        touchdown_bound(1.0, 1.0)
    with pytest.raises(InvalidSpec):
        quench_constants(-1.0, 1.0)


def test_subcritical_bound_is_infinite(navier):
    qb = quench_bound(principal_eigenpair(navier), 0.5 * 4 * navier.eigenvalues[0] / 27)
    assert math.isinf(qb.T_bound) and qb.c0 <= 0


def test_dirichlet_general_domain_rejected():
    b = make_basis(bc="dirichlet", N=128, K=4)
    principal_eigenpair(b)  # the interval is the 1-d ball
    with pytest.raises(DomainNotAdmissible):
        principal_eigenpair(b, general_domain=True)


def test_clamped_disk_positive():
    b = make_basis(bc="dirichlet", domain=RadialBall(2), dim_n=2, N=128, K=4)
    pair = principal_eigenpair(b)
    assert np.all(pair.phi1[:-1] > 0)


def test_positivity_failure(navier):
    swapped = dataclasses.replace(navier, eigenfunctions=navier.eigenfunctions[[1, 0]])
    with pytest.raises(PositivityFailure):
        principal_eigenpair(swapped)


@pytest.mark.parametrize("factor", [2.0, 5.0, 10.0])
def test_mass_inequality_along_touchdown(navier, factor):
    pair = principal_eigenpair(navier)
    lam = factor * 4 * pair.lambda1 / 27
    qb = quench_bound(pair, lam)
    tr = solve_parabolic(SolveConfig(navier.spec.with_lambda(lam), navier, "zero", 1.5 * qb.T_bound, qb.T_bound / 2000))
    rep = verify_mass_inequality(tr, pair, lam, navier)
    assert rep.touched and rep.bound_holds and rep.inequality_holds and rep.mass_below_one
