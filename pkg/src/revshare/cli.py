"""Command line entry point: ``revshare attribute | verify | simulate``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input
(log, rule, window or model), 3 I/O error, 4 too many players for the
exhaustive oracle.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
from typing import Sequence

from .domain import SessionLogError, TimeWindow, read_session_log, total_revenue, window_filter
from .oracle import MAX_PLAYERS, PlayerCapError, axiom_suite, oracle_agreement
from .rules import RuleSpec, attribute_window
from .simulator import ModelError, length_sweep, load_model, paper_model

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_IO, EXIT_CAP = 0, 1, 2, 3, 4
THREADS_ENV = "REVSHARE_THREADS"
DEFAULT_SIM_RULES = "shapley-dd12,exp:0,exp:0.25,exp:0.5,exp:0.75,exp:1"

RULE_HELP = (
    "attribution rule: shapley-dd12, shapley-dd13, event-shapley, exp:<theta> "
    "or alpha:<file>. An alpha file lists a nonincreasing table alpha(0)=1, "
    "alpha(1), ...; distances past the end reuse the last value. "
    "Repeat the flag for several rules."
)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    return f"{x:.9f}"


def _default_threads() -> int:
    try:
        return int(os.environ.get(THREADS_ENV, "1"))
    except ValueError:
        return 1


def _window(text: str) -> TimeWindow:
    try:
        return TimeWindow.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


@contextlib.contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}", EXIT_IO) from None
    with fh:
        yield fh


def _load_log(path):
    try:
        return read_session_log(path)
    except SessionLogError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None
    except UnicodeDecodeError as exc:
        raise CliError(f"{path}: not UTF-8 text ({exc.reason})", EXIT_INPUT) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None


def _rules(names: Sequence[str]) -> list[RuleSpec]:
    rules = []
    for name in names:
        try:
            rules.append(RuleSpec.parse(name))
        except OSError as exc:
            raise CliError(f"cannot read attenuation table: {exc}", EXIT_IO) from None
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
    return rules


def _json_bound(t: float):
    return None if math.isinf(t) else t


def cmd_attribute(args) -> int:
    log = _load_log(args.log)
    rules = _rules(args.rule or ["shapley-dd12"])
    sessions = window_filter(log, args.window)
    total = total_revenue(sessions)
    blocks = []
    for rule in rules:
        try:
            alloc = attribute_window(log, args.window, rule, engine=args.engine, n_jobs=args.threads)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_INPUT) from None
        rows = []
        if sessions:
            rows = [(str(p), v) for p, v in alloc.amounts.items()] + [("W", alloc.platform_side)]
        blocks.append((rule.name, rows))
    with _output(args.out) as fh:
        if args.format == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rule", "player", "amount", "share"])
            for name, rows in blocks:
                for player, amount in rows:
                    writer.writerow([name, player, _fmt(amount), _fmt(amount / total if total else 0.0)])
        else:
            doc = {
                "window": {"t1": _json_bound(args.window.t1), "t2": _json_bound(args.window.t2)},
                "sessions": len(sessions),
                "total_revenue": total,
                "allocations": [
                    {
                        "rule": name,
                        "amounts": dict(rows),
                        "shares": {p: (a / total if total else 0.0) for p, a in rows},
                    }
                    for name, rows in blocks
                ],
            }
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    log = _load_log(args.log)
    (rule,) = _rules([args.rule])
    players = log.players()
    if len(players) > MAX_PLAYERS:
        raise CliError(
            f"{len(players)} players exceed the exhaustive oracle cap of {MAX_PLAYERS}", EXIT_CAP
        )
    try:
        report = axiom_suite(log, args.window, rule, seed=args.seed)
        gaps = oracle_agreement(log, args.window)
    except PlayerCapError as exc:
        raise CliError(str(exc), EXIT_CAP) from None
    oracle = {
        kind: {"status": "pass" if gap <= 1e-9 else "fail", "max_gap": gap} for kind, gap in gaps.items()
    }
    ok = report.ok and all(v["status"] == "pass" for v in oracle.values())
    doc = {
        "rule": rule.name,
        "window": {"t1": _json_bound(args.window.t1), "t2": _json_bound(args.window.t2)},
        "allocation": report.allocation.by_name(),
        "axioms": {k: {"status": r.status, "detail": r.detail} for k, r in report.results.items()},
        "oracle": oracle,
        "ok": ok,
    }
    with _output(args.out) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("lengths must be nonnegative integers")
    return values


def cmd_simulate(args) -> int:
    overrides = {}
    for key, attr in (("seed", "seed"), ("replications", "replications"), ("sessions_per_window", "sessions")):
        if getattr(args, attr) is not None:
            overrides[key] = getattr(args, attr)
    try:
        if args.model:
            model = load_model(args.model)
            if overrides:
                from dataclasses import replace

                model = replace(model, **overrides)
        else:
            model = paper_model(**overrides)
    except ModelError as exc:
        raise CliError(f"invalid model: {exc}", EXIT_INPUT) from None
    except OSError as exc:
        raise CliError(f"cannot read {args.model}: {exc.strerror}", EXIT_IO) from None
    rules = _rules(args.rules.split(","))
    lengths = args.lengths or [model.session_length]
    try:
        tables = length_sweep(model, lengths, rules, engine=args.engine, n_jobs=args.threads)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    labels = [str(p) for p in tables[0].rules[rules[0].name].players] + ["W"]
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["length", "rule", "stat", *labels])
        for table in tables:
            for name, shares in table.rules.items():
                writer.writerow([table.session_length, name, "mean", *(_fmt(shares.mean[l]) for l in labels)])
                writer.writerow([table.session_length, name, "sd", *(_fmt(shares.sd[l]) for l in labels)])
    if args.long:
        with _output(args.long) as fh:
            writer = csv.DictWriter(fh, ["rule", "length", "player", "mean", "sd"], lineterminator="\n")
            writer.writeheader()
            for table in tables:
                for row in table.long_rows():
                    row["mean"], row["sd"] = _fmt(row["mean"]), _fmt(row["sd"])
                    writer.writerow(row)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revshare", description="Revenue attribution for video platform sessions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, window=True):
        p.add_argument("--log", required=True, help="JSON Lines session log")
        if window:
            p.add_argument("--window", type=_window, default=TimeWindow(0.0, math.inf),
                           help="half-open window a..b (inf allowed), default 0..inf")
        p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("attribute", help="allocate window revenue under one or more rules")
    common(p)
    p.add_argument("--rule", action="append", help=RULE_HELP)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--engine", choices=("rules", "matrix", "incremental"), default="rules")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help=f"worker count (default ${THREADS_ENV} or 1)")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("verify", help="check fairness properties and oracle agreement")
    common(p)
    p.add_argument("--rule", default="shapley-dd12", help=RULE_HELP.replace(" Repeat the flag for several rules.", ""))
    p.add_argument("--seed", type=int, default=0, help="seed for sampled checks (MON, NM)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run the Markov session experiment")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=("paper",), help="built-in behaviour model")
    src.add_argument("--model", help="TOML behaviour model")
    p.add_argument("--lengths", type=_int_list, help="comma-separated session lengths")
    p.add_argument("--rules", default=DEFAULT_SIM_RULES, help="comma-separated rule names")
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--sessions", type=int, help="sessions per window")
    p.add_argument("--engine", choices=("rules", "matrix", "incremental"), default="rules")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", help="wide table CSV (default stdout)")
    p.add_argument("--long", help="also write long-format CSV (rule, length, player, mean, sd)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"revshare: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
