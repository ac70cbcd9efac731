"""Command-line entry point: ``phasekit {run,scan,converge,validate-config}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError, dump_config, load_config
from .experiments import (
    convergence_study,
    run_simulation,
    scan_min_constant,
    write_convergence_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3

log = logging.getLogger("phasekit")


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("PHASEKIT_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasekit", description="Stabilized Allen-Cahn experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "single simulation with energy ledger"),
        ("scan", "minimum stabilization constant scan"),
        ("converge", "temporal convergence study"),
        ("validate-config", "check a config file without running"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        if name != "validate-config":
            sp.add_argument("--output-dir", default=None, help="overrides output_dir")
        if name == "scan":
            sp.add_argument("--jobs", type=int, default=_default_jobs(),
                            help="parallel workers (default $PHASEKIT_JOBS or 1)")
    return p


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate-config":
        print(f"{args.config}: ok")
        return EXIT_OK

    out = Path(args.output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.resolved.json")

    if args.command == "run":
        res = run_simulation(cfg, output_dir=out)
        last = res.ledger[-1]
        if res.blowup_step is not None:
            print(f"blow-up at step {res.blowup_step}", file=sys.stderr)
            return EXIT_BLOWUP
        status = "certified" if not res.violations else f"{len(res.violations)} violations"
        print(f"steps={last.step} E_eps={last.E_eps:.10g} E_mod={last.E_mod:.10g} dissipation: {status}")
        return EXIT_OK

    if args.command == "scan":
        res = scan_min_constant(cfg, jobs=max(1, args.jobs))
        path = out / f"scan_{cfg.scheme}_{cfg.scan_constant}.csv"
        with open(path, "w", newline="") as fh:
            res.to_csv(fh)
        print(path)
        return EXIT_OK

    if args.command == "converge":
        try:
            rows = convergence_study(cfg)
        except ValueError as exc:
            print(f"error: {args.config}:1: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        path = out / f"convergence_{cfg.scheme}.csv"
        with open(path, "w", newline="") as fh:
            write_convergence_csv(rows, fh)
        print(path)
        return EXIT_OK
    return EXIT_CONFIG  # unreachable: argparse enforces the subcommand


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
