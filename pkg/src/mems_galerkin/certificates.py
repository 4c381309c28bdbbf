"""Constructive well-posedness thresholds with empirically instantiated constants.

Every certificate here is an *empirical-constant certificate*: the linear
solve constant C_lin is a probe maximum (a lower estimate of the true
constant) and the embedding constant is its K-mode approximation.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BallTooLarge, InvalidSpec, RhoTooLarge
from .fixed_point import _check_kind, xt_terms
from .hyperbolic import solve_linear_hyperbolic
from .parabolic import solve_linear_parabolic
from .spectrum import OperatorSpec, SpectralBasis, embedding_constant
from .trajectory import SolveConfig

LABEL = "empirical-constant certificate"

FORMULAS = {
    "k_r": "(1 - C_emb*r)^-3",
    "lambda_global": "1 / (4*C_lin*(k_r + r))",
    "T_local": "(1 / (2*C_lin*lambda*(k_r + r)))^2",
    "lambda_T": "1 / (4*sqrt(T)*C_lin*(k_r + r)*r)",
    "rho_admissible": "C_lin*rho + r/2 < r",
    "R": "(r + 1/C_emb) / 2",
}


class Regime(str, enum.Enum):
    GLOBAL = "global"
    GLOBAL_ON_T = "global-on-[0,T]"
    LOCAL = "local"
    UNCERTIFIED = "uncertified"


# --------------------------------------------------------------------------
# linear solve constant


def _probe_coefficients(seed: int, index: int, K: int, n_modes: int, n_freq: int = 3):
    rng = np.random.default_rng([seed, index])
    m = min(n_modes, K)
    c = rng.normal(size=(m, n_freq)) / (1.0 + np.arange(m))[:, None]
    return c


def probe_ratio(
    spec: OperatorSpec,
    basis: SpectralBasis,
    kind: str,
    a: Callable[[float], np.ndarray],
    da: Callable[[float], np.ndarray],
    T: float,
    dt: float,
) -> float:
    """|v|_{X_T} / |f|_{W^{1,2}(0,T;L2)} for the linear response v to f = sum_k a_k(t) w_k.

    Initial data are zero.  Returns 0 for a vanishing source.
    """
    _check_kind(kind)
    cfg = SolveConfig(spec.with_lambda(0.0), basis, "zero", T, dt, u1="zero" if kind == "hyperbolic" else None)
    solve = solve_linear_parabolic if kind == "parabolic" else solve_linear_hyperbolic
    traj = solve(cfg, forcing=lambda g, t: np.asarray(a(t), dtype=float))
    t = traj.times
    A = np.array([a(s) for s in t])
    dA = np.array([da(s) for s in t])
    fnorm = math.sqrt(float(np.trapezoid(np.sum(A**2, axis=1) + np.sum(dA**2, axis=1), t)))
    if fnorm == 0:
        return 0.0
    return xt_terms(t, traj.coeffs, traj.dcoeffs, basis.eigenvalues, kind).value / fnorm


def probe_ratios(
    spec: OperatorSpec,
    basis: SpectralBasis,
    kind: str = "parabolic",
    n_probes: int = 8,
    T: float = 1.0,
    dt: Optional[float] = None,
    seed: int = 0,
    n_modes: int = 8,
    workers: int = 1,
) -> list:
    """Response ratios for random smooth sources a_k(t) = sum_m c_km cos(m pi t / T)."""
    if n_probes < 5:
        raise InvalidSpec(f"n_probes must be >= 5, got {n_probes}")
    dt = dt if dt is not None else T / 400
    K = basis.K
    freqs = np.arange(3) * np.pi / T

    def one(i):
        c = _probe_coefficients(seed, i, K, n_modes)
        m = c.shape[0]

        def a(t):
            out = np.zeros(K)
            out[:m] = c @ np.cos(freqs * t)
            return out

        def da(t):
            out = np.zeros(K)
            out[:m] = c @ (-freqs * np.sin(freqs * t))
            return out

        return probe_ratio(spec, basis, kind, a, da, T, dt)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(one, range(n_probes)))
    return [one(i) for i in range(n_probes)]


def estimate_linear_constant(
    spec: OperatorSpec,
    basis: SpectralBasis,
    kind: str = "parabolic",
    n_probes: int = 8,
    T: float = 1.0,
    dt: Optional[float] = None,
    seed: int = 0,
    workers: int = 1,
) -> float:
    """Empirical C_lin: the largest probe ratio (a lower estimate of the true constant)."""
    ratios = [r for r in probe_ratios(spec, basis, kind, n_probes, T, dt, seed, workers=workers) if r > 0]
    return max(ratios) if ratios else 0.0


# --------------------------------------------------------------------------
# thresholds


def lipschitz_factor(r: float, C_emb: float) -> float:
    """k(r) = (1 - C_emb r)^{-3}."""
    if r < 0 or C_emb < 0:
        raise InvalidSpec("r and C_emb must be nonnegative")
    x = C_emb * r
    if not x < 1:
        raise BallTooLarge(f"C_emb*r = {x:.6g} must be < 1")
    return (1.0 - x) ** -3


@dataclass
class Certificate:
    C_emb: float
    C_lin: float
    r: float
    R: float
    rho: float
    rho_max: float
    k_r: float
    lambda_global: float
    T_local: float
    lambda_T: float
    regime: Regime
    lam: float
    kind: str = "parabolic"
    T: Optional[float] = None
    lambda_global_with_r: float = 0.0  # the parabolic threshold with the extra r factor of the hyperbolic one
    predicted_factor: float = 0.0  # 2 lam C_lin (k_r + r)
    predicted_factor_T: Optional[float] = None  # 2 lam sqrt(T) C_lin (k_r + r) r
    label: str = LABEL
    formulas: dict = field(default_factory=lambda: dict(FORMULAS))

    def thresholds(self) -> dict:
        return {
            "lambda_global": self.lambda_global,
            "T_local": self.T_local,
            "lambda_T": self.lambda_T,
            "regime": self.regime.value,
        }

    def admits(self, lam: float, kind: str, T: float) -> bool:
        if self.regime is Regime.GLOBAL:
            return kind == "parabolic" and lam <= self.lambda_global
        if self.regime is Regime.LOCAL:
            return kind == "parabolic" and lam <= self.lam and T <= self.T_local
        if self.regime is Regime.GLOBAL_ON_T:
            return kind == "hyperbolic" and lam <= self.lambda_T and T <= self.T
        return False

    def recompute(self) -> dict:
        """Thresholds recomputed from the stored fields."""
        k = lipschitz_factor(self.r, self.C_emb)
        lam_g = 1.0 / (4.0 * self.C_lin * (k + self.r))
        T_loc = _t_local(self.C_lin, self.lam, k, self.r)
        lam_T = _lambda_T(self.C_lin, k, self.r, self.T) if self.T else math.inf
        return {"k_r": k, "lambda_global": lam_g, "T_local": T_loc, "lambda_T": lam_T}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        for key, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[key] = "inf" if v > 0 else str(v)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _t_local(C_lin, lam, k, r):
    if lam == 0:
        return math.inf
    return (1.0 / (2.0 * C_lin * lam * (k + r))) ** 2


def _lambda_T(C_lin, k, r, T):
    return 1.0 / (4.0 * math.sqrt(T) * C_lin * (k + r) * r)


def _base(spec, basis, rho, r, C_lin, C_emb, kind, T):
    if C_emb is None:
        C_emb = embedding_constant(basis)
    if C_lin is None:
        C_lin = estimate_linear_constant(spec, basis, kind, T=T if T else 1.0)
    if not C_lin > 0:
        raise InvalidSpec(f"C_lin must be positive, got {C_lin}")
    if not r > 0:
        raise InvalidSpec(f"r must be positive, got {r}")
    if rho < 0:
        raise InvalidSpec(f"rho must be nonnegative, got {rho}")
    k = lipschitz_factor(r, C_emb)
    if not C_lin * rho + 0.5 * r < r:
        raise RhoTooLarge(f"C_lin*rho + r/2 = {C_lin * rho + 0.5 * r:.6g} is not < r = {r:.6g}")
    R = 0.5 * (r + 1.0 / C_emb) if C_emb > 0 else math.inf
    lam = spec.lam
    return dict(
        C_emb=C_emb,
        C_lin=C_lin,
        r=r,
        R=R,
        rho=rho,
        rho_max=r / (2.0 * C_lin),
        k_r=k,
        lambda_global=1.0 / (4.0 * C_lin * (k + r)),
        T_local=_t_local(C_lin, lam, k, r),
        lambda_T=_lambda_T(C_lin, k, r, T) if T else math.inf,
        lam=lam,
        T=T,
        lambda_global_with_r=1.0 / (4.0 * C_lin * (k + r) * r),
        predicted_factor=2.0 * lam * C_lin * (k + r),
        predicted_factor_T=2.0 * lam * math.sqrt(T) * C_lin * (k + r) * r if T else None,
    )


def certify_global(
    spec: OperatorSpec,
    basis: SpectralBasis,
    rho: float,
    r: float,
    C_lin: Optional[float] = None,
    C_emb: Optional[float] = None,
) -> Certificate:
    """Small-lambda certificate for the parabolic problem on any horizon."""
    d = _base(spec, basis, rho, r, C_lin, C_emb, "parabolic", None)
    regime = Regime.GLOBAL if spec.lam <= d["lambda_global"] else Regime.UNCERTIFIED
    return Certificate(regime=regime, kind="parabolic", **d)


def certify_local(
    spec: OperatorSpec,
    basis: SpectralBasis,
    rho: float,
    r: float,
    C_lin: Optional[float] = None,
    C_emb: Optional[float] = None,
) -> Certificate:
    """Short-time parabolic certificate on [0, T_local] for any lambda."""
    d = _base(spec, basis, rho, r, C_lin, C_emb, "parabolic", None)
    return Certificate(regime=Regime.LOCAL, kind="parabolic", **d)


def certify_hyperbolic(
    spec: OperatorSpec,
    basis: SpectralBasis,
    rho: float,
    r: float,
    T: float,
    C_lin: Optional[float] = None,
    C_emb: Optional[float] = None,
) -> Certificate:
    """Hyperbolic certificate on [0, T]."""
    if not T > 0:
        raise InvalidSpec(f"T must be positive, got {T}")
    d = _base(spec, basis, rho, r, C_lin, C_emb, "hyperbolic", T)
    regime = Regime.GLOBAL_ON_T if spec.lam <= d["lambda_T"] else Regime.UNCERTIFIED
    return Certificate(regime=regime, kind="hyperbolic", **d)
