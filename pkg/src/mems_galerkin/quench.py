"""Eigenfunction (Kaplan-type) touchdown bound through the mass M(t) = <phi_1, u(t)>."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DomainNotAdmissible,
    InvalidSpec,
    MassAtTouchdown,
    NotSupercritical,
    PositivityFailure,
)
from .parabolic import admissible_part
from .spectrum import BoundaryCondition, Interval, RadialBall, SpectralBasis, synthesize
from .trajectory import Trajectory

POSITIVITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PrincipalEigenpair:
    lambda1: float
    phi1: np.ndarray  # nonnegative, unit L1 norm
    weights: np.ndarray  # quadrature weights of the grid

    def mass(self, u: np.ndarray) -> np.ndarray:
        """M = <phi_1, u> for one or several grid functions."""
        return np.asarray(u) @ (self.weights * self.phi1)


def principal_eigenpair(basis: SpectralBasis, general_domain: bool = False) -> PrincipalEigenpair:
    """First eigenpair with phi_1 >= 0 and |phi_1|_1 = 1.

    Clamped plates are admitted only on balls (the interval counts as the
    one-dimensional ball); ``general_domain=True`` marks a clamped problem on
    a domain without that symmetry, which is rejected.
    """
    spec = basis.spec
    if spec.bc is BoundaryCondition.DIRICHLET and (general_domain or not isinstance(spec.domain, (Interval, RadialBall))):
        raise DomainNotAdmissible(
            "clamped conditions need the ball: without a maximum principle the first "
            "eigenfunction of a general clamped domain may change sign"
        )
    w = basis.grid.weights
    phi = np.array(basis.eigenfunctions[0], dtype=float)
    if np.sum(w * phi) < 0:
        phi = -phi
    interior = phi[1:-1] if not basis.grid.radial else phi[:-1]
    if np.min(interior) < -POSITIVITY_TOL * np.max(np.abs(phi)):
        raise PositivityFailure(f"first eigenfunction changes sign (min {np.min(interior):.3g})")
    phi /= np.sum(w * np.abs(phi))
    phi.setflags(write=False)
    return PrincipalEigenpair(float(basis.eigenvalues[0]), phi, basis.grid.weights)


def g_of_M(M: float, lam: float, lambda1: float) -> float:
    """g(M) = -lambda_1 M + lam / (1 - M)^2."""
    if not M < 1:
        raise MassAtTouchdown(f"M = {M} must be < 1")
    return -lambda1 * M + lam / (1.0 - M) ** 2


@dataclass(frozen=True)
class QuenchConstants:
    lambda_threshold: float
    c0: float
    M_star: float  # where the minimum of g is attained


def quench_constants(lam: float, lambda1: float, m_ref: Optional[float] = None) -> QuenchConstants:
    """Threshold 4 lambda_1 / 27 and c0 = inf g over (-inf, 1), or over [m_ref, 1).

    With s = 1 - M the minimum sits at s* = (2 lam / lambda_1)^{1/3}, where
    g = 1.5 lambda_1 s* - lambda_1.
    """
    if not lambda1 > 0:
        raise InvalidSpec(f"lambda1 must be positive, got {lambda1}")
    if lam < 0:
        raise InvalidSpec(f"lambda must be nonnegative, got {lam}")
    thr = 4.0 * lambda1 / 27.0
    s = (2.0 * lam / lambda1) ** (1.0 / 3.0)
    if m_ref is not None and s > 1.0 - m_ref:
        return QuenchConstants(thr, g_of_M(m_ref, lam, lambda1), float(m_ref))
    return QuenchConstants(thr, 1.5 * lambda1 * s - lambda1, 1.0 - s)


def touchdown_bound(M0: float, c0: float) -> float:
    """(1 - M0) / c0, from M' >= c0."""
    if not c0 > 0:
        raise NotSupercritical(f"c0 = {c0:.6g} is not positive")
    if not 0 <= M0 < 1:
        raise InvalidSpec(f"M0 must lie in [0, 1), got {M0}")
    return (1.0 - M0) / c0


def touchdown_bound_second_order(M0: float, c0: float, dM0: float = 0.0) -> float:
    """Root of M0 + dM0 t + c0 t^2 / 2 = 1, from M'' >= c0."""
    if not c0 > 0:
        raise NotSupercritical(f"c0 = {c0:.6g} is not positive")
    if not 0 <= M0 < 1:
        raise InvalidSpec(f"M0 must lie in [0, 1), got {M0}")
    return (-dM0 + math.sqrt(dM0**2 + 2.0 * c0 * (1.0 - M0))) / c0


@dataclass(frozen=True)
class QuenchBound:
    lambda_threshold: float
    c0: float
    M0: float
    T_bound: float  # inf when not supercritical
    applicable: bool
    T_bound_second_order: float = math.inf


def quench_bound(
    pair: PrincipalEigenpair, lam: float, M0: float = 0.0, dM0: float = 0.0, applicable: bool = True
) -> QuenchBound:
    qc = quench_constants(lam, pair.lambda1)
    if qc.c0 > 0:
        T = touchdown_bound(M0, qc.c0)
        T2 = touchdown_bound_second_order(M0, qc.c0, dM0)
    else:
        T = T2 = math.inf
    return QuenchBound(qc.lambda_threshold, qc.c0, M0, T, applicable, T2)


@dataclass
class MassReport:
    times: np.ndarray
    mass: np.ndarray
    residual: Optional[np.ndarray]  # dM/dt - g(M) at interior samples (parabolic)
    min_residual: Optional[float]
    tolerance: float
    inequality_holds: Optional[bool]
    mass_below_one: bool
    touched: bool
    touch_time: Optional[float]
    bound: QuenchBound
    bound_holds: Optional[bool]
    second_order_bound_holds: Optional[bool]

    def summary(self) -> dict:
        return {
            "min_residual": self.min_residual,
            "tolerance": self.tolerance,
            "inequality_holds": self.inequality_holds,
            "mass_below_one": self.mass_below_one,
            "touched": self.touched,
            "touch_time": self.touch_time,
            "T_bound": self.bound.T_bound,
            "T_bound_second_order": self.bound.T_bound_second_order,
            "c0": self.bound.c0,
            "bound_holds": self.bound_holds,
            "second_order_bound_holds": self.second_order_bound_holds,
        }


def verify_mass_inequality(
    traj: Trajectory,
    pair: PrincipalEigenpair,
    lam: float,
    basis: SpectralBasis,
    rtol: float = 1e-3,
    bound_slack: float = 1e-2,
) -> MassReport:
    """Check M' >= g(M) along a parabolic run and touch_time against the bound.

    For hyperbolic runs only the end result is compared: touch_time against
    (1 - M0)/c0 and against the second-order bound that M'' >= c0 gives.
    """
    t = traj.times
    M = pair.mass(synthesize(basis, traj.coeffs))
    sl = admissible_part(traj)
    tol = rtol * lam
    residual = min_res = holds = None
    if traj.kind == "parabolic" and len(t) >= 3:
        dM = np.gradient(M, t)
        gM = np.array([g_of_M(m, lam, pair.lambda1) if m < 1 else np.inf for m in M])
        residual = (dM - gM)[1:-1]
        min_res = float(np.min(residual))
        holds = min_res >= -tol
    dM0 = 0.0
    if traj.kind == "hyperbolic":
        dM0 = float(pair.mass(synthesize(basis, traj.dcoeffs[0])))
    bound = quench_bound(pair, lam, max(float(M[0]), 0.0), dM0)
    bound_holds = second = None
    if traj.touched and bound.c0 > 0:
        bound_holds = traj.touch_time <= bound.T_bound * (1 + bound_slack)
        second = traj.touch_time <= bound.T_bound_second_order * (1 + bound_slack)
    return MassReport(
        times=t,
        mass=M,
        residual=residual,
        min_residual=min_res,
        tolerance=tol,
        inequality_holds=holds,
        mass_below_one=bool(np.all(M[sl] < 1)),
        touched=traj.touched,
        touch_time=traj.touch_time,
        bound=bound,
        bound_holds=bound_holds,
        second_order_bound_holds=second,
    )
