
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_basis
from mems_galerkin import analyze, energy_inner_product, l2_inner_product, synthesize
from mems_galerkin.certificates import lipschitz_factor
from mems_galerkin.config import parse_override
from mems_galerkin.fixed_point import xt_terms
from mems_galerkin.quench import g_of_M, quench_constants, touchdown_bound_second_order
from mems_galerkin.storage import fmt

BASIS = make_basis(N=128, K=8)
K = BASIS.K
coeff = arrays(np.float64, K, elements=st.floats(-10, 10))
common = settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@common
@given(coeff)
def test_analyze_inverts_synthesize(c):
    assert np.allclose(analyze(BASIS, synthesize(BASIS, c)), c, atol=1e-12 * (1 + np.abs(c).max()))


@common
@given(coeff, coeff)
def test_inner_products_diagonal(a, b):
    u, v = synthesize(BASIS, a), synthesize(BASIS, b)
    scale = 1 + np.abs(a).max() * np.abs(b).max()
    assert l2_inner_product(u, v, BASIS.grid) == pytest.approx(a @ b, abs=1e-11 * scale)
    e = energy_inner_product(u, v, BASIS.spec, BASIS.grid)
    assert e == pytest.approx(np.sum(BASIS.eigenvalues * a * b), abs=1e-10 * scale * BASIS.eigenvalues[-1])
    assert e == pytest.approx(energy_inner_product(v, u, BASIS.spec, BASIS.grid), rel=1e-12, abs=1e-9)


@common
@given(st.integers(0, 2**32 - 1), st.sampled_from(["parabolic", "hyperbolic"]))
def test_xt_triangle_inequality(seed, kind):
    rng = np.random.default_rng(seed)
    t = np.sort(np.r_[0.0, rng.uniform(0, 1, 10), 1.0])
    t = np.unique(t)
    g1, v1, g2, v2 = rng.normal(size=(4, len(t), K))
    ev = BASIS.eigenvalues
    a = xt_terms(t, g1, v1, ev, kind).value
    b = xt_terms(t, g2, v2, ev, kind).value
    c = xt_terms(t, g1 + g2, v1 + v2, ev, kind).value
    assert c <= (a + b) * (1 + 1e-12)


@common
@given(st.floats(0.01, 50.0), st.floats(-20.0, 0.999))
def test_c0_is_a_lower_bound(factor, M):
    lam1 = 97.0
    lam = factor * 4 * lam1 / 27
    assert quench_constants(lam, lam1).c0 <= g_of_M(M, lam, lam1) + 1e-9 * lam1


@common
@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0))
def test_c0_monotone_in_lambda(a, b):
    lo, hi = sorted((a, b))
    assert quench_constants(lo, 10.0).c0 <= quench_constants(hi, 10.0).c0 + 1e-12


@common
@given(st.floats(0.0, 0.99), st.floats(1e-3, 1e3), st.floats(-10.0, 10.0))
def test_second_order_bound_solves_quadratic(M0, c0, dM0):
    t = touchdown_bound_second_order(M0, c0, dM0)
    assert t > 0
    assert M0 + dM0 * t + 0.5 * c0 * t * t == pytest.approx(1.0, abs=1e-8 * (1 + abs(dM0) * t + c0 * t * t))


@common
@given(st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_k_monotone(x, y):
    lo, hi = sorted((x, y))
    assert 1.0 <= lipschitz_factor(lo, 1.0) <= lipschitz_factor(hi, 1.0)


@common
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trip(x):
    assert float(fmt(x)) == x


@common
@given(st.one_of(st.integers(-10**6, 10**6), st.floats(-1e6, 1e6, allow_nan=False)))
def test_override_values_round_trip(v):
    key, value = parse_override(f"numerics.dt={v!r}")
    assert key == "numerics.dt" and value == v and type(value) is type(v)
