import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import make_basis
from mems_galerkin import (
    DimensionMismatch,
    DimensionNotSupported,
    Interval,
    LengthMismatch,
    OperatorSpec,
    RadialBall,
    ResolutionTooCoarse,
    TruncationTooLarge,
    analyze,
    assemble_operator,
    build_grid,
    compute_spectrum,
    embedding_constant,
    energy_inner_product,
    l2_inner_product,
    synthesize,
)
from mems_galerkin.spectrum import truncate_basis


def clamped_beam_mu1():
    # independent oracle: bracketed root of cos(mu) cosh(mu) = 1
    return brentq(lambda m: math.cos(m) * math.cosh(m) - 1.0, 4.0, 5.0, xtol=1e-15)


class TestGrid:
    def test_trapezoid_pattern(self):
        g = build_grid(Interval(1.0), 1, 16)
        h = 1 / 16
        assert np.allclose(np.diff(g.nodes), h)
        assert g.weights[0] == pytest.approx(h / 2) and g.weights[-1] == pytest.approx(h / 2)
        assert np.allclose(g.weights[1:-1], h)
        assert g.weights.sum() == pytest.approx(1.0, rel=1e-12)

    def test_radial_origin_weight_vanishes(self):
        g = build_grid(RadialBall(2), 2, 16)
        assert g.weights[0] == 0
        assert g.weights.sum() == pytest.approx(math.pi, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 5, 7])
    def test_radial_measure(self, n):
        g = build_grid(RadialBall(n), n, 64)
        assert g.weights.sum() == pytest.approx(math.pi ** (n / 2) / math.gamma(n / 2 + 1), rel=1e-12)
        assert np.all(g.weights >= 0)

    def test_too_coarse(self):
        with pytest.raises(ResolutionTooCoarse):
            build_grid(Interval(1.0), 1, 8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_grid(Interval(1.0), 2, 32)
        with pytest.raises(DimensionMismatch):
            OperatorSpec(1, 0, 0, RadialBall(3), "navier", 2)

    def test_dim8_rejected(self):
        with pytest.raises(DimensionNotSupported, match="n <= 7"):
            RadialBall(8)
        with pytest.raises(DimensionNotSupported):
            OperatorSpec(1, 0, 0, Interval(1.0), "navier", 8)


class TestAssembly:
    def test_symmetry_exact(self):
        for bc in ("dirichlet", "navier"):
            spec = OperatorSpec(1.0, 0.7, 0.0, Interval(1.0), bc, 1)
            A = assemble_operator(spec, build_grid(Interval(1.0), 1, 32)).stiffness
            assert np.max(np.abs(A - A.T)) == 0

    def test_navier_is_squared_second_difference(self):
        spec = OperatorSpec(1.0, 0.0, 0.0, Interval(1.0), "navier", 1)
        grid = build_grid(Interval(1.0), 1, 32)
        op = assemble_operator(spec, grid, order=2)
        N, h = 32, 1 / 32
        D = (np.diag(-2 * np.ones(N - 1)) + np.diag(np.ones(N - 2), 1) + np.diag(np.ones(N - 2), -1)) / h**2
        expected = h * D.T @ D  # mass-weighted, pinned rows
        assert np.allclose(op.stiffness, expected, rtol=1e-12, atol=1e-6)

    def test_linear_in_beta_tau(self):
        grid = build_grid(Interval(1.0), 1, 32)

        def A(beta, tau):
            spec = OperatorSpec(beta, tau, 0, Interval(1.0), "dirichlet", 1)
            return assemble_operator(spec, grid).stiffness

        lap = A(1.0, 1.0) - A(1.0, 0.0)  # the tension part
        scale = np.max(np.abs(A(1.0, 1.0)))
        assert np.allclose(A(1.0, 2.0) - A(1.0, 0.0), 2 * lap, atol=1e-12 * scale)
        assert np.allclose(A(3.0, 1.0), 3 * A(1.0, 0.0) + lap, atol=1e-12 * scale)


class TestSpectrum:
    def test_navier_eigenpairs(self, navier):
        k = np.arange(1, 9)
        assert np.allclose(navier.eigenvalues[:8], (k * np.pi) ** 4, rtol=1e-5)
        x = navier.grid.nodes
        assert np.allclose(navier.eigenfunctions[0], np.sqrt(2) * np.sin(np.pi * x), atol=1e-6)

    def test_navier_tension_shift(self):
        b = make_basis(tau=1.0)
        k = np.arange(1, 9) * np.pi
        assert np.allclose(b.eigenvalues[:8], k**4 + k**2, rtol=1e-5)

    def test_dirichlet_richardson(self):
        mu = clamped_beam_mu1()
        lam = {N: make_basis("dirichlet", N=N, K=4).eigenvalues[0] for N in (256, 512)}
        rich = (8 * lam[512] - lam[256]) / 7  # observed order 3
        assert abs(rich - mu**4) / mu**4 < 1e-7
        assert abs(lam[512] - mu**4) / mu**4 < 1e-6

    def test_ascending_positive(self, navier):
        assert navier.eigenvalues[0] > 0 and np.all(np.diff(navier.eigenvalues) >= 0)

    def test_sign_convention(self, navier):
        for phi in navier.eigenfunctions:
            nz = phi[np.abs(phi) > 1e-8 * np.max(np.abs(phi))]
            assert nz[0] > 0

    def test_truncation_guard(self):
        spec = OperatorSpec(1, 0, 0, Interval(1.0), "navier", 1)
        with pytest.raises(TruncationTooLarge):
            compute_spectrum(spec, build_grid(Interval(1.0), 1, 32), 9)

    def test_grid_convergence_factor(self):
        k = np.arange(1, 5) * np.pi
        errs = [np.abs(make_basis(N=N, K=8).eigenvalues[:4] / k**4 - 1) for N in (64, 128)]
        assert np.all(errs[0] / errs[1] >= 3)

    @pytest.mark.parametrize("bc", ["dirichlet", "navier"])
    @pytest.mark.parametrize("n", [2, 3, 7])
    def test_radial_basis_properties(self, bc, n):
        b = make_basis(bc, tau=0.5, N=128, K=12, domain=RadialBall(n), dim_n=n)
        assert b.orthonormality_defect() < 1e-8
        assert b.diagonality_defect() < 1e-6 * b.eigenvalues[-1]
        assert b.eigenfunctions[:, -1].max() == pytest.approx(0, abs=1e-12)

    def test_radial_navier_three_ball(self):
        b = make_basis("navier", tau=1.0, N=256, K=4, domain=RadialBall(3), dim_n=3)
        assert b.eigenvalues[0] == pytest.approx(np.pi**4 + np.pi**2, rel=1e-5)


class TestInnerProducts:
    def test_l2(self, navier):
        g = navier.grid
        w1, w2 = navier.eigenfunctions[:2]
        assert l2_inner_product(w1, w1, g) == pytest.approx(1, abs=1e-8)
        assert l2_inner_product(w1, w2, g) == pytest.approx(0, abs=1e-8)
        assert l2_inner_product(np.ones(g.N + 1), np.ones(g.N + 1), g) == pytest.approx(1.0)
        with pytest.raises(LengthMismatch):
            l2_inner_product(w1, w1[:-1], g)

    def test_energy(self, navier):
        s, g = navier.spec, navier.grid
        lamK = navier.eigenvalues[-1]
        for k in range(navier.K):
            wk = navier.eigenfunctions[k]
            assert abs(energy_inner_product(wk, wk, s, g) - navier.eigenvalues[k]) < 1e-6 * lamK
        w1, w2 = navier.eigenfunctions[:2]
        assert abs(energy_inner_product(w1, w2, s, g)) < 1e-6 * lamK
        assert energy_inner_product(np.zeros_like(w1), w2, s, g) == 0

    def test_round_trips(self, navier, rng):
        e3 = analyze(navier, navier.eigenfunctions[2])
        assert np.allclose(e3, np.eye(navier.K)[2], atol=1e-8)
        assert np.all(synthesize(navier, np.zeros(navier.K)) == 0)
        c = rng.normal(size=navier.K)
        assert np.linalg.norm(analyze(navier, synthesize(navier, c)) - c) < 1e-10
        with pytest.raises(LengthMismatch):
            synthesize(navier, np.zeros(navier.K + 1))


class TestEmbedding:
    def test_single_mode_closed_form(self, navier):
        # oracle: w_1 = sqrt2 sin(pi x), lambda_1 = pi^4, maximum at x = 1/2
        oracle = math.sqrt(2) / math.sqrt(1 + math.pi**8)
        assert embedding_constant(navier, K=1) == pytest.approx(oracle, rel=1e-5)

    def test_monotone_in_K(self, navier):
        vals = [embedding_constant(navier, K=k) for k in range(1, navier.K + 1)]
        assert np.all(np.diff(vals) >= 0)

    def test_invariant_under_sign_flip(self, navier):
        flipped = truncate_basis(navier, navier.K)
        object.__setattr__(flipped, "eigenfunctions", -navier.eigenfunctions)
        assert embedding_constant(flipped) == embedding_constant(navier)
