"""Command-line entry point for genedup.

This module builds the argument parser, resolves the run configuration
and dispatches to one handler per command. It is intentionally thin: all
numerics live in the model modules and all file output in
`report_builder`, so the handlers can be imported and called directly.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from .commands_analysis import cmd_coeffs, cmd_curve, cmd_exit_time, cmd_green, cmd_linearize
from .commands_sim import cmd_psub_scan, cmd_sde, cmd_simulate, cmd_theorem1
from .config import load_config_file, resolve_config
from .errors import ConfigError, GenedupError
from .report_builder import json_safe
from .schemas import COMMANDS, SUITES, ExperimentConfig
from .verify import cmd_verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

HANDLERS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    "curve": cmd_curve,
    "coeffs": cmd_coeffs,
    "green": cmd_green,
    "exit-time": cmd_exit_time,
    "linearize": cmd_linearize,
    "simulate": cmd_simulate,
    "sde": cmd_sde,
    "theorem1": cmd_theorem1,
    "psub-scan": cmd_psub_scan,
    "verify": cmd_verify,
}


def _configure_logging(level: int) -> None:
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def _int_list(text: str) -> List[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genedup", description="Diffusion models of duplicate gene fates.")
    parser.add_argument("--version", action="version", version=f"genedup {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON config or manifest.json of an earlier run")
    parser.add_argument("--model", choices=("watterson", "subfunc"))
    parser.add_argument("--mu", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--pop-size", dest="pop_size", type=int)
    parser.add_argument("--n-list", dest="n_list", type=_int_list, help="ascending population sizes, comma-separated")
    parser.add_argument("--reps", type=int)
    parser.add_argument("--paths", type=int)
    parser.add_argument("--dt", type=float)
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--grid", type=int)
    parser.add_argument("--nodes", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--n-steps", dest="n_steps", type=int)
    parser.add_argument("--start", type=_float_list, help="start state, comma-separated")
    parser.add_argument("--time-cap", dest="time_cap", type=float)
    parser.add_argument("--variance-mode", dest="variance_mode", choices=("published", "exact"))
    parser.add_argument("--flow-lines", dest="flow_lines", type=int)
    parser.add_argument("--suite", choices=SUITES)
    parser.add_argument("--out")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser


_NON_CONFIG = ("command", "config", "verbose", "quiet")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)
    flags = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    try:
        file_values = load_config_file(args.config) if args.config else None
        config = resolve_config(args.command, file_values, flags)
        logger.info("%s: seed %d, output %s", config.command, config.seed, config.out)
        summary = HANDLERS[config.command](config)
    except ConfigError as exc:
        logger.error("%s", exc, exc_info=args.verbose)
        return EXIT_CONFIG
    except GenedupError as exc:
        logger.error("%s", exc, exc_info=args.verbose)
        return EXIT_FAILURE
    if config.command == "verify":
        return EXIT_OK if summary["passed"] else EXIT_FAILURE
    print(json.dumps(json_safe(summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
