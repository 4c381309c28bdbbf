"""The solution map F and its Picard iteration, measured in the discrete X_T norm."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InsufficientSamples, InvalidSpec, NoContraction, TouchdownImminent
from .hyperbolic import solve_hyperbolic, solve_linear_hyperbolic
from .parabolic import solve_linear_parabolic, solve_parabolic
from .spectrum import SpectralBasis, analyze, synthesize
from .trajectory import SolveConfig, Trajectory, _series

KINDS = ("parabolic", "hyperbolic")


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise InvalidSpec(f"kind must be one of {KINDS}, got {kind!r}")
    return kind


@dataclass
class XTNorm:
    value: float
    breakdown: dict

    def __float__(self):
        return self.value


def _trapz(y, t):
    return float(np.trapezoid(y, t))


def _ddt(y, t):
    return np.gradient(y, t, axis=0, edge_order=2 if len(t) > 2 else 1)


def xt_terms(times, coeffs, velocity, eigenvalues, kind: str) -> XTNorm:
    """X_T norm of a sampled coefficient history.

    W^{2,2} and W^{4,2} norms are taken diagonally with weights (1 + lambda_k)
    and (1 + lambda_k^2).  Parabolic derivatives come from centered
    differences of ``coeffs``; the hyperbolic norm uses the sampled
    ``velocity`` and its centered differences.
    """
    _check_kind(kind)
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        raise InsufficientSamples(f"X_T norm needs >= 2 samples, got {len(t)}")
    g = np.asarray(coeffs, dtype=float)
    w2 = 1.0 + eigenvalues
    w4 = 1.0 + eigenvalues**2
    v4 = np.sum(w4 * g**2, axis=1)
    if kind == "parabolic":
        gt = _ddt(g, t)
        vt2 = np.sum(gt**2, axis=1)
        sup = v4 + vt2
        i = int(np.argmax(sup))
        breakdown = {
            "int_vt_W22": _trapz(np.sum(w2 * gt**2, axis=1), t),
            "int_v_W22": _trapz(np.sum(w2 * g**2, axis=1), t),
            "max_v_W42": float(v4[i]),
            "max_vt_L2": float(vt2[i]),
        }
    else:
        gt = np.asarray(velocity, dtype=float)
        gtt = _ddt(gt, t)
        vt = np.sum(w2 * gt**2, axis=1)
        vtt = np.sum(gtt**2, axis=1)
        sup = v4 + vt + vtt
        i = int(np.argmax(sup))
        breakdown = {
            "sup_v_W42": float(v4[i]),
            "sup_vt_W22": float(vt[i]),
            "sup_vtt_L2": float(vtt[i]),
        }
    breakdown["argmax_time"] = float(t[i])
    value = float(np.sqrt(sum(v for k, v in breakdown.items() if k != "argmax_time")))
    return XTNorm(value, breakdown)


def xt_norm(traj: Trajectory, basis: SpectralBasis, kind: Optional[str] = None) -> XTNorm:
    kind = kind or traj.kind
    return xt_terms(traj.times, traj.coeffs, traj.dcoeffs, basis.eigenvalues, kind)


def xt_distance(a: Trajectory, b: Trajectory, basis: SpectralBasis, kind: Optional[str] = None) -> float:
    """X_T norm of a - b; both must be sampled at the same times."""
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise InvalidSpec("trajectories are sampled at different times")
    kind = kind or a.kind
    return xt_terms(a.times, a.coeffs - b.coeffs, a.dcoeffs - b.dcoeffs, basis.eigenvalues, kind).value


def make_trajectory(kind, basis, times, coeffs, dcoeffs, lam=0.0, config=None) -> Trajectory:
    """Wrap sampled coefficients (e.g. a synthetic source) as a Trajectory."""
    times = np.asarray(times, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    dcoeffs = np.asarray(dcoeffs, dtype=float)
    supnorm, l2, energy, mass = _series(kind, basis, coeffs, dcoeffs)
    return Trajectory(
        kind=kind,
        times=times,
        coeffs=coeffs,
        dcoeffs=dcoeffs,
        ddcoeffs=_ddt(dcoeffs, times) if kind == "hyperbolic" else None,
        supnorm=supnorm,
        l2norm=l2,
        energy=energy,
        mass=mass,
        velnorm=np.sqrt(np.sum(dcoeffs**2, axis=1)) if kind == "hyperbolic" else None,
        lam=lam,
        config=dict(config or {}),
    )


# --------------------------------------------------------------------------
# the map F


def interpolated_source(source_traj: Trajectory, basis: SpectralBasis, lam: float, touch_eps: float):
    """Coefficient forcing t -> <lam / (1 - u_i(t))^2, w_j>, u_i linear in t between samples."""
    t = source_traj.times
    g = source_traj.coeffs
    u = synthesize(basis, g)
    umax = float(np.max(u))
    if not umax < 1.0 - touch_eps:
        raise TouchdownImminent(f"source trajectory reaches max u = {umax:.6g}", max_u=umax)

    def forcing(_g, s):
        j = int(np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2))
        a = (s - t[j]) / (t[j + 1] - t[j])
        a = min(max(a, 0.0), 1.0)
        ui = (1 - a) * u[j] + a * u[j + 1]
        return analyze(basis, lam / (1.0 - ui) ** 2)

    return forcing


def apply_F(source_traj: Trajectory, config: SolveConfig, kind: str = "parabolic") -> Trajectory:
    """Solve the linear problem driven by lam / (1 - u_i)^2 with u_i = source_traj."""
    _check_kind(kind)
    lam = config.spec.lam
    if len(source_traj) < 2:
        raise InsufficientSamples("source trajectory needs >= 2 samples")
    if lam == 0:
        forcing = None
    else:
        forcing = interpolated_source(source_traj, config.basis, lam, config.touch_eps)
    solve = solve_linear_parabolic if kind == "parabolic" else solve_linear_hyperbolic
    out = solve(config, forcing=forcing)
    out.lam = lam
    return out


def homogeneous_solution(config: SolveConfig, kind: str = "parabolic") -> Trajectory:
    """w: the linear solution with the configured data and no source."""
    _check_kind(kind)
    solve = solve_linear_parabolic if kind == "parabolic" else solve_linear_hyperbolic
    return solve(config)


def random_admissible_source(
    w: Trajectory,
    basis: SpectralBasis,
    radius: float,
    rng: np.random.Generator,
    kind: Optional[str] = None,
    n_modes: int = 6,
) -> Trajectory:
    """A smooth random trajectory u = w + d with d(0) = 0 and |d|_{X_T} = radius."""
    kind = kind or w.kind
    t = w.times
    T = float(t[-1])
    m = min(n_modes, basis.K)
    lam = basis.eigenvalues[:m]
    amp = rng.normal(size=(m, 3)) / (1.0 + lam)[:, None]
    freq = np.array([0.5, 1.0, 1.5]) * np.pi / T
    s = np.sin(np.outer(t, freq))  # (S, 3)
    ds = np.cos(np.outer(t, freq)) * freq
    d = np.zeros((len(t), basis.K))
    dd = np.zeros_like(d)
    d[:, :m] = s @ amp.T
    dd[:, :m] = ds @ amp.T
    size = xt_terms(t, d, dd, basis.eigenvalues, kind).value
    scale = radius / size if size > 0 else 0.0
    return make_trajectory(kind, basis, t, w.coeffs + scale * d, w.dcoeffs + scale * dd, w.lam)


def contraction_ratio(u1: Trajectory, u2: Trajectory, config: SolveConfig, kind: str = "parabolic") -> float:
    """|F(u1) - F(u2)|_{X_T} / |u1 - u2|_{X_T}."""
    basis = config.basis
    den = xt_distance(u1, u2, basis, kind)
    if den == 0:
        return 0.0
    return xt_distance(apply_F(u1, config, kind), apply_F(u2, config, kind), basis, kind) / den


# --------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardReport:
    iterates: int
    distances: list
    ratios: list
    converged: bool
    fixed_point: Trajectory
    ball_radii: list = field(default_factory=list)  # |u^m - w|_{X_T}
    diagnostic: Optional[str] = None
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iterates": self.iterates,
            "converged": self.converged,
            "distances": list(map(float, self.distances)),
            "ratios": list(map(float, self.ratios)),
            "ball_radii": list(map(float, self.ball_radii)),
            "diagnostic": self.diagnostic,
            "thresholds": dict(self.thresholds),
        }


def picard_solve(
    config: SolveConfig,
    kind: str = "parabolic",
    max_iter: int = 50,
    tol: float = 1e-8,
    certificate=None,
    force: bool = False,
    strict: bool = False,
) -> PicardReport:
    """Iterate u^{m+1} = F(u^m) from the homogeneous solution w.

    Runs only when ``certificate`` admits the configuration or ``force`` is
    set.  Three consecutive ratios above 1 stop the iteration with the
    NoContraction diagnostic (raised instead when ``strict``).
    """
    _check_kind(kind)
    if max_iter < 1 or not tol > 0:
        raise InvalidSpec("max_iter must be >= 1 and tol > 0")
    thresholds = {}
    if certificate is not None:
        thresholds = certificate.thresholds()
    if not force:
        if certificate is None:
            raise InvalidSpec("picard_solve needs a certificate admitting the run (or force=True)")
        if not certificate.admits(config.spec.lam, kind, config.T_final):
            raise InvalidSpec(f"certificate does not admit lambda = {config.spec.lam} ({certificate.regime})")
    basis = config.basis
    w = homogeneous_solution(config, kind)
    u = w
    distances, ratios, radii = [], [], [0.0]
    converged, diagnostic = False, None
    above = 0
    for m in range(max_iter):
        nxt = apply_F(u, config, kind)
        d = xt_distance(nxt, u, basis, kind)
        distances.append(d)
        if len(distances) > 1:
            r = d / distances[-2] if distances[-2] > 0 else 0.0
            ratios.append(r)
            above = above + 1 if r > 1 else 0
        u = nxt
        radii.append(xt_distance(u, w, basis, kind))
        if d < tol:
            converged = True
            break
        if above >= 3:
            diagnostic = "NoContraction"
            if strict:
                raise NoContraction(f"ratios exceeded 1 for 3 consecutive iterations: {ratios[-3:]}")
            break
    return PicardReport(
        iterates=len(distances),
        distances=distances,
        ratios=ratios,
        converged=converged,
        fixed_point=u,
        ball_radii=radii,
        diagnostic=diagnostic,
        thresholds=thresholds,
    )


def direct_solve(config: SolveConfig, kind: str = "parabolic") -> Trajectory:
    return solve_parabolic(config) if kind == "parabolic" else solve_hyperbolic(config)
