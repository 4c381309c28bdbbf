"""Command-line entry point: ``mems-galerkin <command> [--config FILE] [--set key=value ...]``."""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from .config import COMMANDS, load_config, parse_override
from .errors import ConfigInvalid, MemsError
from .runner import run
from .storage import CACHE_ENV

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# convenience flags and the config field each one overrides
FLAGS = {
    "lam": "operator.lambda",
    "beta": "operator.beta",
    "tau": "operator.tau",
    "bc": "operator.bc",
    "N": "numerics.N",
    "K": "numerics.K",
    "dt": "numerics.dt",
    "T_final": "numerics.T_final",
    "seed": "seed",
    "output_dir": "output_dir",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mems-galerkin", description="Spectral Galerkin MEMS simulator")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", "-c", help="TOML run configuration")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field, e.g. numerics.K=8")
    p.add_argument("--cache-dir", help=f"basis cache directory (default: ${CACHE_ENV})")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--bc", choices=("dirichlet", "navier"))
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T-final", dest="T_final", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", "-o", dest="output_dir")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = [parse_override(s) for s in args.set]
        overrides += [(field, getattr(args, name)) for name, field in FLAGS.items() if getattr(args, name) is not None]
        overrides.append(("command", args.command))
        rc = load_config(args.config, overrides)
        cache = args.cache_dir or os.environ.get(CACHE_ENV)
        manifest = run(rc, cache_dir=cache)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MemsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{rc.command}: wrote {len(manifest.outputs)} files to {rc.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
