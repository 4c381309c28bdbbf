"""Run configuration: one TOML file fully determines a run.

Schema (every key optional; defaults in ``DEFAULTS``)::

    command = "spectrum"        # see COMMANDS
    seed = 0
    output_dir = "out"

    [operator]   beta, tau, lambda, domain ("interval" | "ball"), length, dim_n, bc
    [numerics]   N, K, order, dt, T_final, touch_eps, tol, max_iter, sample_every
    [initial]    u0, u1          # "zero", "mode:k[:amp]", "bump[:amp]"
    [certificate] kind, regime, rho, r_fraction, n_probes, probe_T
    [sweep]      kind, lambda_factors, K_values
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from .errors import ConfigInvalid, IoFailure, MemsError
from .spectrum import MAX_DIM, MIN_RESOLUTION, BoundaryCondition, Interval, OperatorSpec, RadialBall

COMMANDS = (
    "spectrum",
    "solve-parabolic",
    "solve-hyperbolic",
    "picard",
    "certify",
    "quench-sweep",
    "convergence",
)

DEFAULTS: dict = {
    "command": "spectrum",
    "seed": 0,
    "output_dir": "out",
    "operator": {
        "beta": 1.0,
        "tau": 0.0,
        "lambda": 0.0,
        "domain": "interval",
        "length": 1.0,
        "dim_n": 1,
        "bc": "navier",
    },
    "numerics": {
        "N": 256,
        "K": 16,
        "order": 4,
        "dt": 1e-4,
        "T_final": 0.1,
        "touch_eps": 1e-4,
        "tol": 1e-8,
        "max_iter": 50,
        "sample_every": 1,
    },
    "initial": {"u0": "zero", "u1": "zero"},
    "certificate": {
        "kind": "parabolic",
        "regime": "global",
        "rho": 0.0,
        "r_fraction": 0.5,  # r = r_fraction / C_emb
        "n_probes": 8,
        "probe_T": 0.5,
    },
    "sweep": {
        "kind": "parabolic",
        "lambda_factors": [0.5, 1.0, 2.0, 4.0],  # multiples of 4 lambda_1 / 27
        "K_values": [4, 8, 16],
    },
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: OperatorSpec
    numerics: dict
    initial: dict
    certificate: dict
    sweep: dict
    seed: int
    output_dir: Path

    def echo(self) -> dict:
        """Flattened, JSON-ready view of every effective setting."""
        s = self.spec
        return {
            "command": self.command,
            "seed": self.seed,
            "operator": {
                "beta": s.beta,
                "tau": s.tau,
                "lambda": s.lam,
                "domain": s.domain.describe(),
                "dim_n": s.dim_n,
                "bc": s.bc.value,
            },
            "numerics": dict(self.numerics),
            "initial": dict(self.initial),
            "certificate": dict(self.certificate),
            "sweep": {k: list(v) if isinstance(v, (list, tuple)) else v for k, v in self.sweep.items()},
        }


def _merge(base: dict, over: dict, errors: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        name = f"{prefix}{key}"
        if key not in base:
            errors[name] = "unknown key"
        elif isinstance(base[key], dict):
            if not isinstance(value, dict):
                errors[name] = "expected a table"
            else:
                out[key] = _merge(base[key], value, errors, name + ".")
        else:
            out[key] = value
    return out


def parse_override(text: str) -> tuple:
    """'section.key=value' with a TOML-typed value (bare words become strings)."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigInvalid({text: "override must look like section.key=value"})
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key.strip(), value


def _set_path(d: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
        if not isinstance(d, dict):
            raise ConfigInvalid({dotted: "not a table"})
    d[parts[-1]] = value


def load_config(path: Optional[str] = None, overrides: Optional[list] = None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as exc:
            raise IoFailure(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigInvalid({"file": f"TOML syntax error: {exc}"}) from exc
    for key, value in overrides or []:
        _set_path(raw, key, value)
    return build_config(raw)


def _number(errors, name, value, *, integer=False, lo=None, lo_strict=False, hi=None):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or (not integer and not math.isfinite(value)):
        errors[name] = f"expected {'an integer' if integer else 'a finite number'}, got {value!r}"
        return False
    if lo is not None and (value <= lo if lo_strict else value < lo):
        errors[name] = f"must be {'>' if lo_strict else '>='} {lo}, got {value}"
        return False
    if hi is not None and value > hi:
        errors[name] = f"must be <= {hi}, got {value}"
        return False
    return True


def build_config(raw: dict) -> RunConfig:
    errors: dict = {}
    cfg = _merge(DEFAULTS, raw, errors)
    if cfg["command"] not in COMMANDS:
        errors["command"] = f"must be one of {', '.join(COMMANDS)}"
    _number(errors, "seed", cfg["seed"], integer=True, lo=0)

    op = cfg["operator"]
    _number(errors, "operator.beta", op["beta"], lo=0, lo_strict=True)
    _number(errors, "operator.tau", op["tau"], lo=0)
    _number(errors, "operator.lambda", op["lambda"], lo=0)
    _number(errors, "operator.dim_n", op["dim_n"], integer=True, lo=1, hi=MAX_DIM)
    if op["bc"] not in [b.value for b in BoundaryCondition]:
        errors["operator.bc"] = "must be 'dirichlet' or 'navier'"
    if op["domain"] == "interval":
        _number(errors, "operator.length", op["length"], lo=0, lo_strict=True)
        if op["dim_n"] != 1:
            errors["operator.dim_n"] = "interval domain requires dim_n = 1"
    elif op["domain"] == "ball":
        if isinstance(op["dim_n"], int) and op["dim_n"] < 2:
            errors["operator.dim_n"] = "ball domain requires 2 <= dim_n <= 7 (use 'interval' for n = 1)"
    else:
        errors["operator.domain"] = "must be 'interval' or 'ball'"

    num = cfg["numerics"]
    _number(errors, "numerics.N", num["N"], integer=True, lo=MIN_RESOLUTION)
    if _number(errors, "numerics.K", num["K"], integer=True, lo=1) and isinstance(num["N"], int):
        if num["K"] > num["N"] // 4:
            errors["numerics.K"] = f"K = {num['K']} exceeds N/4 = {num['N'] // 4}"
    if num["order"] not in (2, 4):
        errors["numerics.order"] = "must be 2 or 4"
    ok_dt = _number(errors, "numerics.dt", num["dt"], lo=0, lo_strict=True)
    ok_T = _number(errors, "numerics.T_final", num["T_final"], lo=0, lo_strict=True)
    if ok_dt and ok_T and not num["dt"] < num["T_final"]:
        errors["numerics.dt"] = "dt must be < T_final"
    if _number(errors, "numerics.touch_eps", num["touch_eps"], lo=0, lo_strict=True) and not num["touch_eps"] < 0.1:
        errors["numerics.touch_eps"] = "must lie in (0, 0.1)"
    _number(errors, "numerics.tol", num["tol"], lo=0, lo_strict=True)
    _number(errors, "numerics.max_iter", num["max_iter"], integer=True, lo=1)
    _number(errors, "numerics.sample_every", num["sample_every"], integer=True, lo=1)

    for key in ("u0", "u1"):
        if not isinstance(cfg["initial"][key], str):
            errors[f"initial.{key}"] = "must be a datum id such as 'zero', 'mode:1:0.1' or 'bump:0.2'"

    cert = cfg["certificate"]
    if cert["kind"] not in ("parabolic", "hyperbolic"):
        errors["certificate.kind"] = "must be 'parabolic' or 'hyperbolic'"
    if cert["regime"] not in ("global", "local"):
        errors["certificate.regime"] = "must be 'global' or 'local'"
    _number(errors, "certificate.rho", cert["rho"], lo=0)
    if _number(errors, "certificate.r_fraction", cert["r_fraction"], lo=0, lo_strict=True) and not cert["r_fraction"] < 1:
        errors["certificate.r_fraction"] = "must lie in (0, 1) so that C_emb * r < 1"
    _number(errors, "certificate.n_probes", cert["n_probes"], integer=True, lo=5)
    _number(errors, "certificate.probe_T", cert["probe_T"], lo=0, lo_strict=True)

    sw = cfg["sweep"]
    if sw["kind"] not in ("parabolic", "hyperbolic"):
        errors["sweep.kind"] = "must be 'parabolic' or 'hyperbolic'"
    if not isinstance(sw["lambda_factors"], list) or not sw["lambda_factors"]:
        errors["sweep.lambda_factors"] = "must be a nonempty list"
    else:
        for i, v in enumerate(sw["lambda_factors"]):
            _number(errors, f"sweep.lambda_factors[{i}]", v, lo=0)
    if not isinstance(sw["K_values"], list) or not sw["K_values"]:
        errors["sweep.K_values"] = "must be a nonempty list"
    else:
        for i, v in enumerate(sw["K_values"]):
            ok = _number(errors, f"sweep.K_values[{i}]", v, integer=True, lo=1)
            if ok and cfg["command"] == "convergence" and isinstance(num["N"], int):
                if 2 * v > num["N"] // 4:
                    errors[f"sweep.K_values[{i}]"] = f"2K = {2 * v} exceeds N/4 = {num['N'] // 4}"

    if not isinstance(cfg["output_dir"], str):
        errors["output_dir"] = "must be a path string"

    if errors:
        raise ConfigInvalid(errors)
    try:
        domain = Interval(float(op["length"])) if op["domain"] == "interval" else RadialBall(op["dim_n"])
        spec = OperatorSpec(float(op["beta"]), float(op["tau"]), float(op["lambda"]), domain, op["bc"], op["dim_n"])
    except MemsError as exc:
        raise ConfigInvalid({"operator": str(exc)}) from exc
    num = dict(num, dt=float(num["dt"]), T_final=float(num["T_final"]), tol=float(num["tol"]))
    num["touch_eps"] = float(num["touch_eps"])
    return RunConfig(
        command=cfg["command"],
        spec=spec,
        numerics=num,
        initial=dict(cfg["initial"]),
        certificate=dict(cert, rho=float(cert["rho"]), r_fraction=float(cert["r_fraction"]), probe_T=float(cert["probe_T"])),
        sweep=dict(sw, lambda_factors=[float(v) for v in sw["lambda_factors"]], K_values=list(sw["K_values"])),
        seed=int(cfg["seed"]),
        output_dir=Path(cfg["output_dir"]),
    )
