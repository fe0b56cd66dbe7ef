"""Command-line entry point: ``thinvessel <command> [--config PATH] [--out DIR]``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import RunConfig
from .errors import ConfigError, GeometryValidationError, VesselError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinvessel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("solve-1d", "solve the 1D integro-differential pressure equation"),
        ("solve-3d1d", "solve the coupled boundary-element problem and compare with 1D"),
        ("sweep", "epsilon sweep with log-log slope fits"),
        ("validate", "run the property suite"),
        ("sample-fields", "sample pressure and velocity on a box and on the wall"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweep entries")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled checks")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    from . import harness  # deferred so --help stays fast

    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = RunConfig.from_dict({**cfg.data, "seed": args.seed})
        if args.command == "sweep":
            report = harness.cmd_sweep(cfg, args.out, threads=args.threads)
        else:
            report = harness.COMMANDS[args.command](cfg, args.out)
    except (ConfigError, GeometryValidationError) as exc:
        print(f"config error [{_tag(exc)}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VesselError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure [{_tag(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for c in report.checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag} {c.name} = {c.value} ({c.tolerance})")
    print(f"report: {os.path.join(str(args.out), 'report.json')}")
    return EXIT_OK if report.acceptance_passed else EXIT_ACCEPTANCE


def _tag(exc: BaseException) -> str:
    tb = exc.__traceback__
    mod = "thinvessel"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("thinvessel."):
            mod = name
        tb = tb.tb_next
    return f"{mod}:{type(exc).__name__}"


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
