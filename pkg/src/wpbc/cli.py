"""
Command-line entry point.

Exit codes: 0 success, 1 only infeasible results (or failed checks),
2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError
from .harness import PAPER_DEFAULT, emit_csv, format_csv, load_scenario, run_sweep
from .montecarlo import SCHEMES

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wpbc", description="Backscatter energy beamforming experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run a scenario file and write CSV")
    sw.add_argument("--config", required=True, help="scenario INI file")
    sw.add_argument("--seed", type=int, help="override run.master_seed")
    sw.add_argument("--trials", type=int, help="override run.mc_trials (0 = analytic rates)")
    sw.add_argument("--out", help="CSV path; '-' or unset (with no run.output) writes to stdout")
    sw.add_argument("--scheme", choices=SCHEMES, help="run only this scheme")
    sw.add_argument("--threads", type=int, help="Monte Carlo worker threads")

    va = sub.add_parser("validate", help="run the oracle and invariant checks")
    va.add_argument("--only", nargs="+", metavar="CHECK", help="subset of checks to run")
    va.add_argument("--list", action="store_true", help="list check names and exit")

    pr = sub.add_parser("preset", help="emit the default scenario file")
    pr.add_argument("--out", help="write to this path instead of stdout")
    return ap


def _sweep(args) -> int:
    spec = load_scenario(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.trials is not None:
        changes["mc_trials"] = args.trials
    if args.scheme is not None:
        changes["schemes"] = (args.scheme,)
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.out is not None:
        changes["output"] = args.out
    spec = dataclasses.replace(spec, **changes)
    rows = run_sweep(spec)
    if spec.output in (None, "", "-"):
        sys.stdout.write(format_csv(rows))
    else:
        emit_csv(rows, spec.output)
    return EXIT_OK if any(r.feasible for r in rows) else EXIT_INFEASIBLE


def _validate(args) -> int:
    from .validation import CHECKS

    if args.list:
        print("\n".join(CHECKS))
        return EXIT_OK
    names = args.only or list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; choose from {list(CHECKS)}")
    ok = True
    for name in names:
        res = CHECKS[name]()
        print(res.line(), flush=True)
        ok &= res.ok
    return EXIT_OK if ok else EXIT_INFEASIBLE


def _preset(args) -> int:
    if args.out:
        Path(args.out).write_text(PAPER_DEFAULT)
    else:
        sys.stdout.write(PAPER_DEFAULT)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"sweep": _sweep, "validate": _validate, "preset": _preset}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
