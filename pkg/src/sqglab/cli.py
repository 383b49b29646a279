"""Command-line driver.

One flat JSON config per run is the source of truth; any top-level scalar
key can be overridden by a flag of the same name. Exit codes: 0 success,
1 usage or configuration error, 2 smallness-gate refusal, 3 iteration cap
without convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

from .experiments import (
    run_continuity,
    run_inequality_scan,
    run_nonuniform,
    run_norms,
    run_rlcheck,
    run_solve,
)
from .solver import ConfigError, ConvergenceError, SmallnessError

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems by raising instead of exiting with 2."""

    def error(self, message: str):
        raise ConfigError(message)


def _length(text: str) -> float:
    """Parse a length; accepts plain numbers and pi multiples like '16pi'."""
    s = str(text).strip().lower()
    if s.endswith("pi"):
        head = s[:-2]
        return (float(head) if head else 1.0) * math.pi
    return float(s)


_SOLVER_KEYS = {
    "alpha": float,
    "inner_tol": float,
    "outer_tol": float,
    "max_inner": int,
    "max_outer": int,
    "smallness_threshold": float,
}

_SOLVER_DEFAULTS = {
    "inner_tol": 1e-10,
    "outer_tol": 1e-7,
    "max_inner": 400,
    "max_outer": 60,
    "smallness_threshold": 0.1,
}

_GRID_KEYS = {"K": int, "L": _length, "dealias_fraction": float}

_EXPERIMENTS = {
    "solve": {
        "run": run_solve,
        "keys": {
            **_GRID_KEYS,
            **_SOLVER_KEYS,
            "force": str,
            "force_file": str,
            "amplitude": float,
            "outdir": str,
        },
        "defaults": {
            **_SOLVER_DEFAULTS,
            "K": 128,
            "L": math.pi,
            "alpha": 0.4,
            "force": "single_mode",
            "amplitude": 1e-2,
            "outdir": "out_solve",
        },
    },
    "continuity": {
        "run": run_continuity,
        "keys": {
            **_GRID_KEYS,
            **_SOLVER_KEYS,
            "force": str,
            "amplitude": float,
            "perturbation": str,
            "perturbation_amplitude": float,
            "j_min": int,
            "j_max": int,
            "outdir": str,
        },
        "defaults": {
            **_SOLVER_DEFAULTS,
            "K": 128,
            "L": math.pi,
            "alpha": 0.4,
            "force": "two_mode",
            "amplitude": 1e-2,
            "perturbation": "single_mode",
            "perturbation_amplitude": 1e-2,
            "j_min": 1,
            "j_max": 6,
            "outdir": "out_continuity",
        },
    },
    "nonuniform": {
        "run": run_nonuniform,
        "keys": {
            **_GRID_KEYS,
            **_SOLVER_KEYS,
            "delta": float,
            "n_min": int,
            "n_max": int,
            "h_xi": float,
            "torus": bool,
            "outdir": str,
        },
        "defaults": {
            **_SOLVER_DEFAULTS,
            "K": 1024,
            "L": 16.0 * math.pi,
            "alpha": 0.4,
            "delta": 0.02,
            "n_min": 3,
            "n_max": 10,
            "h_xi": 1.0 / 32.0,
            "torus": False,
            "outdir": "out_nonuniform",
        },
    },
    "rlcheck": {
        "run": run_rlcheck,
        "keys": {"alpha": float, "n_min": int, "n_max": int, "h_xi": float, "outdir": str},
        "defaults": {
            "alpha": 0.4,
            "n_min": 1,
            "n_max": 12,
            "h_xi": 1.0 / 32.0,
            "outdir": "out_rlcheck",
        },
    },
    "ineq-scan": {
        "run": run_inequality_scan,
        "keys": {
            **_GRID_KEYS,
            "alpha": float,
            "seed": int,
            "samples": int,
            "interp_samples": int,
            "cancel_samples": int,
            "outdir": str,
        },
        "defaults": {
            "K": 128,
            "L": math.pi,
            "alpha": 0.4,
            "seed": 42,
            "samples": 200,
            "interp_samples": 100,
            "cancel_samples": 50,
            "outdir": "out_ineq",
        },
    },
}

# list-valued keys settable only through the JSON config, never by flag
_JSON_ONLY_KEYS = {
    "ineq-scan": ("product_exponents", "commutator_exponents"),
}


def build_parser() -> _Parser:
    parser = _Parser(prog="sqg-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    for name, meta in _EXPERIMENTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its scalar keys")
        for key, typ in meta["keys"].items():
            if typ is bool:
                p.add_argument(f"--{key}", type=_parse_bool, default=None, metavar="BOOL")
            else:
                p.add_argument(f"--{key}", type=typ, default=None)

    p = sub.add_parser("norms")
    p.add_argument("file", help="SQGF1 field file")
    p.add_argument("--s", default="0", help="comma-separated Sobolev indices")
    p.add_argument("--dealias_fraction", type=float, default=2.0 / 3.0)
    return parser


def _parse_bool(text: str) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _resolve_config(name: str, args: argparse.Namespace) -> dict:
    meta = _EXPERIMENTS[name]
    config = dict(meta["defaults"])
    allowed = set(meta["keys"]) | set(_JSON_ONLY_KEYS.get(name, ()))
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in loaded.items():
            if key == "experiment":
                if val != name:
                    raise ConfigError(f"config names experiment {val!r} but {name!r} was requested")
                continue
            if key not in allowed:
                raise ConfigError(f"unknown config field {key!r} for experiment {name!r}")
            typ = meta["keys"].get(key)
            config[key] = typ(val) if typ is not None and not isinstance(val, bool) else val
    for key in meta["keys"]:
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    return config


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a subcommand is required (solve, continuity, nonuniform, rlcheck, ineq-scan, norms)")
        if args.command == "norms":
            s_values = tuple(float(s) for s in str(args.s).split(","))
            return run_norms(args.file, s_values, dealias_fraction=args.dealias_fraction)
        meta = _EXPERIMENTS[args.command]
        config = _resolve_config(args.command, args)
        return meta["run"](config)
    except SmallnessError as exc:
        print(f"smallness gate: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
