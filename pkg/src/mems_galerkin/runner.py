"""Dispatch a RunConfig to the solver modules and write deterministic outputs."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .certificates import (
    certify_global,
    certify_hyperbolic,
    certify_local,
    embedding_constant,
    probe_ratios,
)
from .config import RunConfig
from .errors import DomainNotAdmissible, InsufficientSamples, IoFailure, PositivityFailure
from .fixed_point import direct_solve, picard_solve, xt_distance, xt_norm
from .hyperbolic import hyperbolic_energy_report, solve_hyperbolic
from .parabolic import parabolic_energy_report, solve_parabolic
from .quench import principal_eigenpair, quench_bound, verify_mass_inequality
from .spectrum import BoundaryCondition, Interval, truncate_basis
from .storage import basis_for, dump_json, fmt, write_csv, write_trajectory
from .trajectory import SolveConfig, initial_datum


@dataclass
class RunManifest:
    config: dict
    version: str
    basis_fingerprint: str
    cache_hit: bool
    wall_clock: float
    outputs: list = field(default_factory=list)
    cache_recovered: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "artifact_version": self.version,
            "basis_fingerprint": self.basis_fingerprint,
            "cache_hit": self.cache_hit,
            "cache_recovered": self.cache_recovered,
            "wall_clock_seconds": self.wall_clock,
            "outputs": list(self.outputs),
        }


class _Outputs:
    """Single writer for one output directory; remembers what it wrote."""

    def __init__(self, root: Path):
        self.root = root
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create output directory {root}: {exc}") from exc
        self.files: list = []

    def path(self, name: str) -> Path:
        return self.root / name

    def json(self, name: str, obj) -> None:
        dump_json(obj, self.path(name))
        self.files.append(name)

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.path(name), header, rows)
        self.files.append(name)

    def trajectory(self, name: str, traj) -> None:
        paths = write_trajectory(traj, self.path(name))
        self.files.extend(p.name for p in paths.values())


def _clean(obj):
    """Make report dicts JSON-safe: numpy scalars to Python, inf/nan to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if hasattr(obj, "value") and not isinstance(obj, (int, str)):
        return obj.value
    return obj


def _solve_config(rc: RunConfig, basis, spec=None, T=None, dt=None, kind="parabolic") -> SolveConfig:
    num = rc.numerics
    return SolveConfig(
        spec or rc.spec,
        basis,
        rc.initial["u0"],
        T if T is not None else num["T_final"],
        dt if dt is not None else num["dt"],
        u1=rc.initial["u1"] if kind == "hyperbolic" else None,
        touch_eps=num["touch_eps"],
        sample_every=num["sample_every"],
    )


def _certificate(rc: RunConfig, basis, kind: str):
    c = rc.certificate
    C_emb = embedding_constant(basis)
    T = rc.numerics["T_final"]
    ratios = probe_ratios(rc.spec, basis, kind, c["n_probes"], T=c["probe_T"], seed=rc.seed)
    C_lin = max([r for r in ratios if r > 0], default=0.0)
    r = c["r_fraction"] / C_emb
    if kind == "hyperbolic":
        cert = certify_hyperbolic(rc.spec, basis, c["rho"], r, T, C_lin=C_lin, C_emb=C_emb)
    elif c["regime"] == "local":
        cert = certify_local(rc.spec, basis, c["rho"], r, C_lin=C_lin, C_emb=C_emb)
    else:
        cert = certify_global(rc.spec, basis, c["rho"], r, C_lin=C_lin, C_emb=C_emb)
    return cert, ratios


# --------------------------------------------------------------------------
# commands


def _spectrum(rc, basis, out):
    spec = rc.spec
    ref = None
    if isinstance(spec.domain, Interval) and spec.bc is BoundaryCondition.NAVIER:
        mu = np.arange(1, basis.K + 1) * np.pi / spec.domain.length
        ref = spec.beta * mu**4 + spec.tau * mu**2
    rows = []
    for k, lam in enumerate(basis.eigenvalues, start=1):
        rows.append([str(k), lam, "" if ref is None else fmt(ref[k - 1])])
    out.csv("eigenvalues.csv", ["k", "eigenvalue", "reference"], rows)
    x = basis.grid.nodes
    out.csv(
        "eigenfunctions.csv",
        ["x", "weight"] + [f"w{k}" for k in range(1, basis.K + 1)],
        np.column_stack([x, basis.grid.weights, basis.eigenfunctions.T]),
    )
    out.json(
        "spectrum.json",
        _clean(
            {
                "K": basis.K,
                "N": basis.grid.N,
                "order": basis.order,
                "orthonormality_defect": basis.orthonormality_defect(),
                "diagonality_defect_rel": basis.diagonality_defect() / basis.eigenvalues[-1],
                "embedding_constant": embedding_constant(basis),
                "embedding_constant_note": "K-mode lower approximation",
            }
        ),
    )


def _mass_summary(traj, basis, lam):
    try:
        pair = principal_eigenpair(basis)
    except (DomainNotAdmissible, PositivityFailure) as exc:
        return {"skipped": str(exc)}
    return verify_mass_inequality(traj, pair, lam, basis).summary()


def _solve(rc, basis, out, kind):
    cfg = _solve_config(rc, basis, kind=kind)
    if kind == "parabolic":
        traj = solve_parabolic(cfg)
        report_fn = parabolic_energy_report
    else:
        traj = solve_hyperbolic(cfg)
        report_fn = hyperbolic_energy_report
    out.trajectory("trajectory", traj)
    try:
        energy = report_fn(traj, rc.spec, basis).summary()
    except InsufficientSamples as exc:
        energy = {"skipped": str(exc)}
    summary = {"energy": energy}
    if rc.spec.lam > 0:
        summary["mass"] = _mass_summary(traj, basis, rc.spec.lam)
    out.json("report.json", _clean(summary))


def _certify(rc, basis, out):
    kind = rc.certificate["kind"]
    cert, ratios = _certificate(rc, basis, kind)
    out.csv("probes.csv", ["probe", "ratio"], [[str(i), r] for i, r in enumerate(ratios)])
    out.json("certificate.json", _clean(cert.to_dict()))
    return cert


def _picard(rc, basis, out):
    kind = rc.certificate["kind"]
    cert = _certify(rc, basis, out)
    cfg = _solve_config(rc, basis, kind=kind)
    admitted = cert.admits(rc.spec.lam, kind, cfg.T_final)
    rep = picard_solve(
        cfg, kind, rc.numerics["max_iter"], rc.numerics["tol"], certificate=cert, force=True
    )
    direct = direct_solve(cfg, kind)
    info = rep.to_dict()
    info["certificate_admits"] = admitted
    if not direct.touched:
        info["direct_distance"] = xt_distance(rep.fixed_point, direct, basis, kind)
        info["fixed_point_norm"] = xt_norm(rep.fixed_point, basis, kind).value
    out.trajectory("fixed_point", rep.fixed_point)
    out.json("picard.json", _clean(info))


def _quench_sweep(rc, basis, out):
    pair = principal_eigenpair(basis)
    kind = rc.sweep["kind"]
    num = rc.numerics
    u0 = initial_datum(basis, rc.initial["u0"])
    M0 = float(u0 @ (basis.grid.weights * pair.phi1))
    dM0 = 0.0
    if kind == "hyperbolic":
        dM0 = float(initial_datum(basis, rc.initial["u1"]) @ (basis.grid.weights * pair.phi1))
    rows = []
    for factor in rc.sweep["lambda_factors"]:
        lam = factor * 4.0 * pair.lambda1 / 27.0
        qb = quench_bound(pair, lam, max(M0, 0.0), dM0)
        super_ = qb.c0 > 0
        if super_:
            horizon = 1.5 * (qb.T_bound if kind == "parabolic" else qb.T_bound_second_order)
        else:
            horizon = num["T_final"]
        dt = min(num["dt"], horizon / 100)
        cfg = _solve_config(rc, basis, spec=rc.spec.with_lambda(lam), T=horizon, dt=dt, kind=kind)
        traj = solve_parabolic(cfg) if kind == "parabolic" else solve_hyperbolic(cfg)
        if super_:
            ok = traj.touched and traj.touch_time <= qb.T_bound * 1.01
            ok2 = traj.touched and traj.touch_time <= qb.T_bound_second_order * 1.01
            sat, sat2 = str(ok).lower(), str(ok2).lower()
        else:
            sat = sat2 = "na"
        rows.append(
            [
                lam,
                factor,
                qb.c0,
                qb.T_bound,
                qb.T_bound_second_order,
                "" if traj.touch_time is None else fmt(traj.touch_time),
                sat,
                sat2,
            ]
        )
    out.csv(
        "quench_sweep.csv",
        ["lambda", "lambda_factor", "c0", "T_bound", "T_bound_second_order", "touch_time", "bound_satisfied", "second_order_bound_satisfied"],
        rows,
    )


def _convergence(rc, big, out):
    rows = []
    for K in rc.sweep["K_values"]:
        trajs = []
        for k in (K, 2 * K):
            b = truncate_basis(big, k)
            trajs.append(solve_parabolic(_solve_config(rc, b)))
        a, b2 = trajs
        g_a = np.zeros(2 * K)
        g_a[:K] = a.coeffs[-1]
        diff = float(np.sqrt(np.sum((g_a - b2.coeffs[-1]) ** 2)))
        rows.append([str(K), diff, a.supnorm[-1], str(a.touched or b2.touched).lower()])
    out.csv("convergence.csv", ["K", "l2_diff_K_2K", "supnorm_T", "touched"], rows)


def run(rc: RunConfig, cache_dir: Optional[str] = None) -> RunManifest:
    """Execute the configured command; returns the manifest (also written as manifest.json)."""
    t0 = time.perf_counter()
    out = _Outputs(Path(rc.output_dir))
    num = rc.numerics
    K = num["K"]
    if rc.command == "convergence":
        K = 2 * max(rc.sweep["K_values"])
    basis, event = basis_for(rc.spec, num["N"], K, cache_dir, num["order"])
    cmd = rc.command
    if cmd == "spectrum":
        _spectrum(rc, basis, out)
    elif cmd == "solve-parabolic":
        _solve(rc, basis, out, "parabolic")
    elif cmd == "solve-hyperbolic":
        _solve(rc, basis, out, "hyperbolic")
    elif cmd == "certify":
        _certify(rc, basis, out)
    elif cmd == "picard":
        _picard(rc, basis, out)
    elif cmd == "quench-sweep":
        _quench_sweep(rc, basis, out)
    elif cmd == "convergence":
        _convergence(rc, basis, out)
    manifest = RunManifest(
        config=_clean(rc.echo()),
        version=__version__,
        basis_fingerprint=event.fingerprint,
        cache_hit=event.hit,
        wall_clock=time.perf_counter() - t0,
        outputs=sorted(out.files),
        cache_recovered=event.recovered_from,
    )
    dump_json(manifest.to_dict(), out.path("manifest.json"))
    return manifest
