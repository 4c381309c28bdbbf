"""Galerkin states, solve configuration, trajectories and the shared time loop."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InvalidSpec, LengthMismatch, NonFinite, TouchdownImminent
from .spectrum import Interval, OperatorSpec, SpectralBasis, analyze, synthesize

DEFAULT_TOUCH_EPS = 1e-4

Source = Callable[[np.ndarray, float], np.ndarray]


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    TOUCHDOWN = "touchdown"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class GalerkinState:
    t: float
    coeffs: np.ndarray
    velocity: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.t < 0:
            raise InvalidSpec(f"state time must be >= 0, got {self.t}")
        if self.velocity is not None and len(self.velocity) != len(self.coeffs):
            raise LengthMismatch("velocity and coefficient vectors differ in length")


# --------------------------------------------------------------------------
# initial data

_MODE = re.compile(r"^mode:(\d+)(?::([-+0-9.eE]+))?$")
_BUMP = re.compile(r"^bump(?::([-+0-9.eE]+))?$")


def initial_datum(basis: SpectralBasis, datum) -> np.ndarray:
    """Grid values for an initial datum given as an array or a closed-form id.

    Recognized ids: ``zero``, ``mode:k[:amp]`` (amp times the k-th basis
    function) and ``bump[:amp]`` (a smooth profile vanishing to second order
    on the boundary, scaled to sup-norm ``amp``).
    """
    grid = basis.grid
    if datum is None:
        return np.zeros(grid.N + 1)
    if isinstance(datum, str):
        key = datum.strip().lower()
        if key == "zero":
            return np.zeros(grid.N + 1)
        m = _MODE.match(key)
        if m:
            k = int(m.group(1))
            if not 1 <= k <= basis.K:
                raise InvalidSpec(f"mode index {k} outside 1..{basis.K}")
            amp = float(m.group(2)) if m.group(2) else 1.0
            return amp * np.array(basis.eigenfunctions[k - 1])
        m = _BUMP.match(key)
        if m:
            amp = float(m.group(1)) if m.group(1) else 1.0
            x = grid.nodes
            if isinstance(grid.domain, Interval):
                L = grid.domain.length
                prof = 16.0 * x**2 * (L - x) ** 2 / L**4
            else:
                prof = (1.0 - x**2) ** 2
            return amp * prof
        raise InvalidSpec(f"unknown initial datum id {datum!r}")
    u = np.asarray(datum, dtype=float)
    if u.shape != (grid.N + 1,):
        raise LengthMismatch(f"initial datum has shape {u.shape}, expected ({grid.N + 1},)")
    scale = max(1.0, float(np.max(np.abs(u))))
    if abs(u[-1]) > 1e-10 * scale or (not grid.radial and abs(u[0]) > 1e-10 * scale):
        raise InvalidSpec("initial datum does not vanish on the boundary")
    return u


@dataclass(frozen=True, eq=False)
class SolveConfig:
    spec: OperatorSpec
    basis: SpectralBasis
    u0: Union[np.ndarray, str, None]
    T_final: float
    dt: float
    u1: Union[np.ndarray, str, None] = None
    touch_eps: float = DEFAULT_TOUCH_EPS
    sample_every: int = 1

    def __post_init__(self):
        b = self.basis.spec
        s = self.spec
        if (s.beta, s.tau, s.domain, s.bc, s.dim_n) != (b.beta, b.tau, b.domain, b.bc, b.dim_n):
            raise InvalidSpec("solve spec does not match the basis operator")
        if not (self.T_final > 0 and self.dt > 0):
            raise InvalidSpec("T_final and dt must be positive")
        if not self.dt < self.T_final:
            raise InvalidSpec(f"dt = {self.dt} must be < T_final = {self.T_final}")
        if not 0 < self.touch_eps < 0.1:
            raise InvalidSpec(f"touch_eps must lie in (0, 0.1), got {self.touch_eps}")
        if int(self.sample_every) < 1:
            raise InvalidSpec("sample_every must be >= 1")
        initial_datum(self.basis, self.u0)
        initial_datum(self.basis, self.u1)

    def initial_coeffs(self) -> np.ndarray:
        return analyze(self.basis, initial_datum(self.basis, self.u0))

    def initial_velocity(self) -> np.ndarray:
        return analyze(self.basis, initial_datum(self.basis, self.u1))

    def echo(self) -> dict:
        def datum(d):
            if d is None or isinstance(d, str):
                return d
            return "array"

        s = self.spec
        return {
            "beta": s.beta,
            "tau": s.tau,
            "lambda": s.lam,
            "domain": s.domain.describe(),
            "bc": s.bc.value,
            "dim_n": s.dim_n,
            "N": self.basis.grid.N,
            "K": self.basis.K,
            "u0": datum(self.u0),
            "u1": datum(self.u1),
            "T_final": self.T_final,
            "dt": self.dt,
            "touch_eps": self.touch_eps,
            "sample_every": int(self.sample_every),
        }


@dataclass(eq=False)
class Trajectory:
    """Sampled Galerkin solution.

    ``dcoeffs`` is the time derivative of ``coeffs`` at every sample (the
    ODE right-hand side for parabolic runs, the velocity for hyperbolic
    runs); ``ddcoeffs`` is the acceleration and only present for hyperbolic
    runs.
    """

    kind: str
    times: np.ndarray
    coeffs: np.ndarray
    dcoeffs: np.ndarray
    supnorm: np.ndarray
    l2norm: np.ndarray
    energy: np.ndarray
    mass: np.ndarray
    termination: Termination = Termination.COMPLETED
    touched: bool = False
    touch_time: Optional[float] = None
    ddcoeffs: Optional[np.ndarray] = None
    velnorm: Optional[np.ndarray] = None
    lam: float = 0.0
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def states(self):
        vel = self.dcoeffs if self.kind == "hyperbolic" else None
        return [
            GalerkinState(float(t), self.coeffs[i], None if vel is None else vel[i])
            for i, t in enumerate(self.times)
        ]

    def grid_values(self, basis: SpectralBasis) -> np.ndarray:
        return synthesize(basis, self.coeffs)


# --------------------------------------------------------------------------
# shared time loop


def principal_mass_weights(basis: SpectralBasis) -> np.ndarray:
    """Quadrature weights times the L1-normalized first eigenfunction."""
    phi = np.array(basis.eigenfunctions[0])
    if np.sum(basis.grid.weights * phi) < 0:
        phi = -phi
    phi /= np.sum(basis.grid.weights * np.abs(phi))
    return basis.grid.weights * phi


def _series(kind, basis, coeffs, dcoeffs):
    u = synthesize(basis, coeffs)
    supnorm = np.max(np.abs(u), axis=-1)
    l2 = np.sqrt(np.sum(coeffs**2, axis=-1))
    pot = np.sum(basis.eigenvalues * coeffs**2, axis=-1)
    if kind == "hyperbolic":
        energy = pot + np.sum(dcoeffs**2, axis=-1)
    else:
        energy = pot
    mass = u @ principal_mass_weights(basis)
    return supnorm, l2, energy, mass


def max_deflection(basis: SpectralBasis, coeffs) -> float:
    return float(np.max(synthesize(basis, coeffs)))


def integrate(
    kind: str,
    config: SolveConfig,
    step: Callable,
    rates: Callable,
    state: GalerkinState,
    detect_touchdown: bool = True,
) -> Trajectory:
    """Advance ``state`` to ``config.T_final`` with fixed steps.

    ``step(state, h)`` returns the next state; ``rates(state)`` returns the
    (first, second) time derivatives of the coefficients recorded with each
    sample.  A step whose result reaches ``1 - touch_eps`` (or whose stages
    raise TouchdownImminent) is bisected on its length to locate the touch
    time.  Linear runs pass ``detect_touchdown=False``.
    """
    basis = config.basis
    eps = config.touch_eps
    T, dt = float(config.T_final), float(config.dt)
    every = int(config.sample_every)
    samples = [state]
    termination = Termination.COMPLETED
    touch_time = None

    def crossed(h):
        try:
            new = step(state, h)
        except TouchdownImminent as exc:
            return True, None, exc
        if not (np.all(np.isfinite(new.coeffs))):
            raise NonFinite("non-finite coefficients")
        hit = detect_touchdown and max_deflection(basis, new.coeffs) >= 1.0 - eps
        return hit, new, None

    n = 0
    slack = 1e-9 * dt  # absorbs rounding in the accumulated time
    while T - state.t > slack:
        h = T - state.t if T - state.t <= dt + slack else dt
        try:
            hit, new, exc = crossed(h)
        except NonFinite:
            termination = Termination.DIVERGED
            break
        if hit:
            lo, hi = 0.0, h
            hit_state, hit_exc = new, exc
            for _ in range(200):
                if hi - lo <= 1e-12 * max(h, 1e-300) + 1e-15 * state.t:
                    break
                mid = 0.5 * (lo + hi)
                try:
                    m_hit, m_new, m_exc = crossed(mid)
                except NonFinite:
                    m_hit, m_new, m_exc = True, None, None
                if m_hit:
                    hi, hit_state, hit_exc = mid, m_new, m_exc
                else:
                    lo = mid
            touch_time = state.t + hi
            if hit_state is None and hit_exc is not None and hit_exc.coeffs is not None:
                hit_state = GalerkinState(touch_time, hit_exc.coeffs, state.velocity)
            if hit_state is None:
                hit_state = step(state, lo)
            samples.append(GalerkinState(touch_time, hit_state.coeffs, hit_state.velocity))
            termination = Termination.TOUCHDOWN
            break
        state = new
        n += 1
        done = T - state.t <= slack
        if done:
            state = GalerkinState(T, state.coeffs, state.velocity)
        if n % every == 0 or done:
            samples.append(state)

    times = np.array([s.t for s in samples])
    coeffs = np.array([s.coeffs for s in samples])
    first, second = [], []
    for s in samples:
        d1, d2 = rates(s)
        first.append(d1)
        second.append(d2)
    dcoeffs = np.array(first)
    ddcoeffs = None if kind == "parabolic" else np.array(second)
    supnorm, l2, energy, mass = _series(kind, basis, coeffs, dcoeffs)
    return Trajectory(
        kind=kind,
        times=times,
        coeffs=coeffs,
        dcoeffs=dcoeffs,
        ddcoeffs=ddcoeffs,
        supnorm=supnorm,
        l2norm=l2,
        energy=energy,
        mass=mass,
        velnorm=np.sqrt(np.sum(dcoeffs**2, axis=1)) if kind == "hyperbolic" else None,
        termination=termination,
        touched=termination is Termination.TOUCHDOWN,
        touch_time=touch_time,
        lam=config.spec.lam,
        config=config.echo(),
    )


def phi_functions(z: np.ndarray):
    """exp(z), (e^z - 1)/z and (e^z - 1 - z)/z^2 without cancellation."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(z)
    phi1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24 + z**4 / 120, em1 / zs)
    phi2 = np.where(
        small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120 + z**4 / 720, (em1 - z) / zs**2
    )
    return e, phi1, phi2


def trig_functions(omega: np.ndarray, h: float):
    """cos(w h), sin(w h)/w and (1 - cos(w h))/w^2, with series for small w h."""
    x = omega * h
    small = np.abs(x) < 1e-4
    ws = np.where(small, 1.0, omega)
    c = np.cos(x)
    s = np.where(small, h * (1 - x**2 / 6 + x**4 / 120), np.sin(x) / ws)
    one_minus_c = np.where(
        small, h**2 * (0.5 - x**2 / 24 + x**4 / 720), 2.0 * np.sin(0.5 * x) ** 2 / ws**2
    )
    return c, s, one_minus_c


def check_finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"non-finite {what}")
    return v


def project_source(basis: SpectralBasis, f: Callable[[np.ndarray, float], np.ndarray]) -> Source:
    """Wrap a grid callable f(x, t) as a coefficient-space forcing."""
    x = basis.grid.nodes

    def forcing(_g, t):
        return analyze(basis, np.broadcast_to(f(x, t), x.shape))

    return forcing


__all__ = [
    "DEFAULT_TOUCH_EPS",
    "GalerkinState",
    "SolveConfig",
    "Termination",
    "Trajectory",
    "initial_datum",
    "integrate",
]
