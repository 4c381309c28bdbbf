"""Trajectory files and the basis cache.

All floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import CacheCorrupt, FormatVersionMismatch, InsufficientSamples, IoFailure
from .spectrum import (
    BASIS_VERSION,
    DEFAULT_ORDER,
    Grid,
    OperatorSpec,
    SpectralBasis,
    build_grid,
    compute_spectrum,
)
from .trajectory import Termination, Trajectory

TRAJECTORY_FORMAT = 1
CACHE_FORMAT = 1
CACHE_ENV = "MEMS_GALERKIN_CACHE"
ORTHO_TOL = 1e-8

PathLike = Union[str, os.PathLike]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def dump_json(obj, path: PathLike) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    _write_text(path, text)


def _write_text(path: PathLike, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def write_csv(path: PathLike, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _read_csv(path: PathLike):
    lines = _read_text(path).splitlines()
    if not lines:
        raise IoFailure(f"{path} is empty")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    return header, data.reshape(-1, len(header))


# --------------------------------------------------------------------------
# trajectories


def trajectory_paths(path: PathLike) -> dict:
    """The three files of a trajectory: series CSV, coefficient CSV, JSON summary."""
    p = Path(path)
    stem = p.with_suffix("") if p.suffix == ".csv" else p
    return {
        "series": stem.with_name(stem.name + ".csv"),
        "coeffs": stem.with_name(stem.name + ".coeffs.csv"),
        "summary": stem.with_name(stem.name + ".json"),
    }


def write_trajectory(traj: Trajectory, path: PathLike) -> dict:
    if len(traj) == 0:
        raise InsufficientSamples("cannot write an empty trajectory")
    paths = trajectory_paths(path)
    hyper = traj.kind == "hyperbolic"
    header = ["t", "supnorm", "l2norm", "energy", "mass"] + (["velnorm"] if hyper else [])
    cols = [traj.times, traj.supnorm, traj.l2norm, traj.energy, traj.mass]
    if hyper:
        cols.append(traj.velnorm)
    write_csv(paths["series"], header, zip(*cols))

    K = traj.coeffs.shape[1]
    cheader = ["t"] + [f"g{k}" for k in range(1, K + 1)] + [f"dg{k}" for k in range(1, K + 1)]
    blocks = [traj.times[:, None], traj.coeffs, traj.dcoeffs]
    if hyper:
        cheader += [f"ddg{k}" for k in range(1, K + 1)]
        blocks.append(traj.ddcoeffs)
    write_csv(paths["coeffs"], cheader, np.hstack(blocks))

    summary = {
        "format_version": TRAJECTORY_FORMAT,
        "kind": traj.kind,
        "termination": traj.termination.value,
        "touched": traj.touched,
        "touch_time": _json_float(traj.touch_time),
        "lambda": _json_float(traj.lam),
        "n_samples": len(traj),
        "K": K,
        "t_final": _json_float(traj.times[-1]),
        "max_supnorm": _json_float(np.max(traj.supnorm)),
        "config": traj.config,
        "files": {k: v.name for k, v in paths.items() if k != "summary"},
    }
    dump_json(summary, paths["summary"])
    return paths


def read_trajectory(path: PathLike) -> Trajectory:
    paths = trajectory_paths(path)
    summary = json.loads(_read_text(paths["summary"]))
    version = summary.get("format_version")
    if version != TRAJECTORY_FORMAT:
        raise FormatVersionMismatch(f"trajectory format {version!r}, this reader handles {TRAJECTORY_FORMAT}")
    header, series = _read_csv(paths["series"])
    _, cdata = _read_csv(paths["coeffs"])
    K = int(summary["K"])
    hyper = summary["kind"] == "hyperbolic"
    col = {name: series[:, i] for i, name in enumerate(header)}
    touch = summary["touch_time"]
    return Trajectory(
        kind=summary["kind"],
        times=cdata[:, 0].copy(),
        coeffs=cdata[:, 1 : 1 + K].copy(),
        dcoeffs=cdata[:, 1 + K : 1 + 2 * K].copy(),
        ddcoeffs=cdata[:, 1 + 2 * K : 1 + 3 * K].copy() if hyper else None,
        supnorm=col["supnorm"],
        l2norm=col["l2norm"],
        energy=col["energy"],
        mass=col["mass"],
        velnorm=col.get("velnorm") if hyper else None,
        termination=Termination(summary["termination"]),
        touched=bool(summary["touched"]),
        touch_time=None if touch is None else float(touch),
        lam=float(summary["lambda"]),
        config=summary["config"],
    )


# --------------------------------------------------------------------------
# basis cache


def cache_header(spec: OperatorSpec, N: int, K: int, order: int = DEFAULT_ORDER) -> dict:
    return {
        "format": str(CACHE_FORMAT),
        "basis_version": BASIS_VERSION,
        "domain": spec.domain.describe(),
        "bc": spec.bc.value,
        "beta": fmt(spec.beta),
        "tau": fmt(spec.tau),
        "dim_n": str(spec.dim_n),
        "N": str(N),
        "K": str(K),
        "order": str(order),
    }


def fingerprint(header: dict) -> str:
    text = "\n".join(f"{k}={header[k]}" for k in sorted(header))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def default_cache_dir() -> Optional[Path]:
    d = os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def save_basis(basis: SpectralBasis, path: PathLike) -> None:
    header = cache_header(basis.spec, basis.grid.N, basis.K, basis.order)
    lines = [f"# {k} = {v}" for k, v in header.items()]
    lines.append(",".join(fmt(x) for x in basis.eigenvalues))
    lines.extend(",".join(fmt(x) for x in row) for row in basis.eigenfunctions)
    _write_text(path, "\n".join(lines) + "\n")


def load_basis(path: PathLike, spec: OperatorSpec, grid: Grid, K: int, order: int = DEFAULT_ORDER) -> SpectralBasis:
    """Read a cached basis; raises CacheCorrupt on any header or content problem."""
    expected = cache_header(spec, grid.N, K, order)
    lines = _read_text(path).splitlines()
    header, body = {}, []
    for ln in lines:
        if ln.startswith("# "):
            key, _, value = ln[2:].partition(" = ")
            header[key] = value
        elif ln:
            body.append(ln)
    if header != expected:
        diff = sorted(k for k in set(header) | set(expected) if header.get(k) != expected.get(k))
        raise CacheCorrupt(f"cache header mismatch in {', '.join(diff)}")
    try:
        vals = np.array([float(x) for x in body[0].split(",")])
        funcs = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]])
    except (ValueError, IndexError) as exc:
        raise CacheCorrupt(f"unparsable cache body: {exc}") from exc
    if vals.shape != (K,) or funcs.shape != (K, grid.N + 1) or not np.all(np.isfinite(funcs)):
        raise CacheCorrupt("cache body has the wrong shape")
    vals.setflags(write=False)
    funcs.setflags(write=False)
    basis = SpectralBasis(spec.with_lambda(0.0), grid, K, vals, funcs, order, BASIS_VERSION)
    defect = basis.orthonormality_defect()
    if not defect < ORTHO_TOL:
        raise CacheCorrupt(f"orthonormality re-check failed (defect {defect:.3g})")
    if not (vals[0] > 0 and np.all(np.diff(vals) >= 0)):
        raise CacheCorrupt("cached eigenvalues are not positive and ascending")
    return basis


@dataclass
class CacheEvent:
    fingerprint: str
    path: Optional[str]
    hit: bool
    recovered_from: Optional[str] = None  # message of the CacheCorrupt that forced a recompute


def load_or_compute(
    spec: OperatorSpec,
    grid: Grid,
    K: int,
    cache_dir: Optional[PathLike] = None,
    order: int = DEFAULT_ORDER,
):
    """Return (basis, CacheEvent); computes and stores on a miss or corrupt entry."""
    header = cache_header(spec, grid.N, K, order)
    fp = fingerprint(header)
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    if cache_dir is None:
        return compute_spectrum(spec, grid, K, order), CacheEvent(fp, None, False)
    if not cache_dir.is_dir():
        raise IoFailure(f"cache directory {cache_dir} does not exist")
    path = cache_dir / f"basis-{fp}.txt"
    recovered = None
    if path.exists():
        try:
            return load_basis(path, spec, grid, K, order), CacheEvent(fp, str(path), True)
        except CacheCorrupt as exc:
            recovered = str(exc)
    basis = compute_spectrum(spec, grid, K, order)
    save_basis(basis, path)
    return basis, CacheEvent(fp, str(path), False, recovered)


def basis_cache(spec: OperatorSpec, grid: Grid, K: int, cache_dir: PathLike, order: int = DEFAULT_ORDER) -> SpectralBasis:
    return load_or_compute(spec, grid, K, cache_dir, order)[0]


def basis_for(spec: OperatorSpec, N: int, K: int, cache_dir: Optional[PathLike] = None, order: int = DEFAULT_ORDER):
    grid = build_grid(spec.domain, spec.dim_n, N)
    return load_or_compute(spec, grid, K, cache_dir, order)
