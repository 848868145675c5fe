"""Command line entry point.

    bohmlab run <config> [--workers N] [--output DIR]
    bohmlab list-scenarios
    bohmlab validate <config>
    bohmlab report <dir>

Exit codes: 0 success, 1 config error, 2 numerical failure (a check failed
or a fit was rejected), 3 internal error. The worker count defaults to the
``BOHMLAB_WORKERS`` environment variable.
"""
from __future__ import annotations

import argparse
import sys
import traceback

from .config import load_config
from .errors import BohmlabError, ConfigError, ConvergenceError, DomainEscapeError, InstabilityError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INTERNAL = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bohmlab", description="Semiclassical Bohmian/Wigner experiment runner")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--output", default=None, help="override the output directory")
    sub.add_parser("list-scenarios", help="list the scenario catalog")
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    rep = sub.add_parser("report", help="render a run directory as tables")
    rep.add_argument("dir")
    return p


def _run(args) -> int:
    from .runner import run_experiment

    cfg = load_config(args.config)
    res = run_experiment(cfg, workers=args.workers, output=args.output or "config")
    bad = res.failed
    for r in res.reports:
        status = "-" if r.passed is None else ("pass" if r.passed else "FAIL")
        print(f"{status:4s}  {r.quantity:24s} limit={r.limit:.6g} rate={r.rate:.4g} flag={int(r.flag)}")
    print(f"wrote {res.output}")
    return EXIT_NUMERICAL if bad else EXIT_OK


def _list() -> int:
    from .scenarios import CATALOG

    for sid, sc in CATALOG.items():
        d = sc.defaults
        print(f"{sid:18s} {sc.summary}  [n={d.n}, eps={len(d.eps)} values, T={d.T:g}]")
    return EXIT_OK


def _validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok: {cfg.scenario}, n={cfg.n}, {len(cfg.eps)} eps values, {cfg.n_steps} steps")
    return EXIT_OK


def _report(args) -> int:
    from .runner import load_run, render_tables

    try:
        doc = load_run(args.dir)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(render_tables(doc))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "run":
            return _run(args)
        if args.verb == "list-scenarios":
            return _list()
        if args.verb == "validate":
            return _validate(args)
        return _report(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DomainEscapeError, InstabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BohmlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # noqa: BLE001 - last-resort guard for the exit-code contract
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
