"""Command line entry point: ``ndsim run | check | search | oracle``.

Exit codes: 0 success / all properties hold, 2 a violation or attack was found,
1 error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from .engine import SimulationError
from .report import FORMATS, emit_report
from .scenario import ScenarioError, load_scenario, run_scenario, save_scenario
from .search import (
    SearchError,
    exhaustive_scan,
    find_attack,
    load_space,
    min_safe_relay_delay,
    search_report,
)

log = logging.getLogger("ndsim")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


def _format_for(dest: str, fmt: str | None) -> str:
    if fmt:
        return fmt
    if dest.endswith(".csv"):
        return "csv"
    if dest.endswith(".jsonl"):
        return "jsonl"
    return "human"


@contextmanager
def _sink(dest: str):
    if dest == "-":
        yield sys.stdout
    else:
        with open(dest, "w", newline="") as fh:
            yield fh


def _emit(report, dest: str, fmt: str | None) -> None:
    with _sink(dest) as fh:
        emit_report(report, _format_for(dest, fmt), fh)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    trace, report = run_scenario(scenario)
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl())
    _emit(report, args.report, args.format)
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    _, report = run_scenario(scenario)
    _emit(report, args.report, args.format)
    return EXIT_OK if report.all_hold else EXIT_VIOLATION


def _space(args):
    space = load_space(args.space, args.protocol)
    if os.environ.get("ND_SEED"):
        from dataclasses import replace

        space = replace(space, seed=int(os.environ["ND_SEED"]))
    return space


def cmd_search(args) -> int:
    space = _space(args)
    if args.bisect:
        result = min_safe_relay_delay(space, args.tol_ps)
        log.info("threshold %d ps after %d probes (strategy %s)", result.threshold_ps,
                 len(result.probes), result.strategy or "-")
        _emit(search_report(space, thresholds=[result]), args.report, args.format)
        if args.witness and result.witness is not None:
            save_scenario(result.witness.scenario, args.witness)
        return EXIT_OK
    w = find_attack(space, args.budget, args.seed)
    _emit(search_report(space, [w] if w else []), args.report, args.format)
    if w is None:
        return EXIT_OK
    if args.witness:
        save_scenario(w.scenario, args.witness)
    return EXIT_VIOLATION


def cmd_oracle(args) -> int:
    space = _space(args)
    witnesses = exhaustive_scan(space)
    _emit(search_report(space, witnesses), args.report, args.format)
    return EXIT_VIOLATION if witnesses else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ndsim", description="Secure neighbor discovery simulator and verifier")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add_report_opts(sp, default="-"):
        sp.add_argument("--report", default=default, help="report destination, '-' for stdout")
        sp.add_argument("--format", choices=FORMATS, help="report format (default: from --report extension)")

    r = sub.add_parser("run", help="simulate a scenario and report")
    r.add_argument("scenario")
    r.add_argument("--trace", help="write the trace as JSONL")
    add_report_opts(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="run checkers only; exit 2 on any violation")
    c.add_argument("scenario")
    add_report_opts(c)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("search", help="search for an attack, or bisect the minimal safe relay delay")
    s.add_argument("--space", required=True)
    s.add_argument("--protocol", choices=["BT", "BTL", "CRT", "CRTL"])
    s.add_argument("--bisect", action="store_true")
    s.add_argument("--tol-ps", type=int, default=100)
    s.add_argument("--budget", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--witness", help="write the witness scenario (TOML) here")
    add_report_opts(s)
    s.set_defaults(func=cmd_search)

    o = sub.add_parser("oracle", help="exhaustive scan of a discretized space")
    o.add_argument("--space", required=True)
    o.add_argument("--protocol", choices=["BT", "BTL", "CRT", "CRTL"])
    add_report_opts(o)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, SearchError, SimulationError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
