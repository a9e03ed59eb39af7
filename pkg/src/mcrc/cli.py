"""Command-line entry point.

Exit codes: 0 success, 2 configuration or validation error, 3 resource cap
hit, 4 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import _backend
from .errors import McrcError, ResourceCapError, ValidationError
from .experiment import load_bundled, load_config, run, with_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERIC = 4

SUBCOMMANDS = {
    "evaluate": "evaluate",
    "optimize": "optimize",
    "crisscross": "crisscross",
    "stochastic-compare": "stochastic_compare",
    "filter-sweep": "filter_sweep",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcrc",
        description="Molecular-communication channel reservoir computing experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} study")
        p.add_argument("--config", required=True,
                       help="JSON config path, or bundled:<name> for a shipped example")
        p.add_argument("--out", required=True, help="output directory for run artifacts")
        p.add_argument("--seed", type=int, default=None, help="override rng_seed")
    return parser


def _resolve(path):
    if path.startswith("bundled:"):
        return load_bundled(path.split(":", 1)[1])
    return path


def exit_code_for(exc):
    if isinstance(exc, ValidationError):
        return EXIT_CONFIG
    if isinstance(exc, ResourceCapError):
        return EXIT_RESOURCE
    if isinstance(exc, McrcError):
        return exc.exit_code
    if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    raise exc


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    mode = SUBCOMMANDS[args.command]
    try:
        if args.seed is not None and args.seed < 0:
            raise ValidationError("--seed must be non-negative")
        config = with_seed(load_config(_resolve(args.config), mode=mode), args.seed)
        logging.getLogger("mcrc").debug("kernel backend: %s", _backend.name)
        result = run(config, args.out)
    except (McrcError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = exit_code_for(exc)
        print(f"mcrc {args.command}: error: {exc}", file=sys.stderr)
        return code
    parts = [f"{k}={getattr(result, k):.6g}"
             for k in ("nrmse_det", "nrmse_stoch_raw", "nrmse_stoch_filtered")
             if getattr(result, k) is not None]
    print(f"mcrc {args.command}: wrote {args.out}" + (": " + ", ".join(parts) if parts else ""))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
