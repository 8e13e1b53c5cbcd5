"""Command-line interface: ``daumc <command> ...``.

Exit codes: 0 when the verdict holds (or everything matched), 1 when it
fails, 2 on any error (bad input, inadmissible query, ...).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import casestudy
from .automaton import AutomatonError, from_dict, reroot, validate
from .checker import CheckerError, Verdict, check_mission, check_query
from .formula import FormulaError, parse_formula, to_text
from .oracle import (
    PATTERNS, Index, OracleError, check_pattern, eval3, model_from_dict, search_pattern, validate_model,
)
from .temporal import Lasso
from .utility import UtilityError

EXIT_HOLDS, EXIT_FAILS, EXIT_ERROR = 0, 1, 2

ALIASES = {
    "toy": "toy.json", "toy-min": "toy_min.json",
    "a": "highway_a.json", "fixturea": "highway_a.json", "highway-a": "highway_a.json",
    "b": "highway_b.json", "fixtureb": "highway_b.json", "highway-b": "highway_b.json",
    "b-red": "highway_b_red.json", "fixtureb-red": "highway_b_red.json", "highway-b-red": "highway_b_red.json",
    "fig2": "fig2.json", "cex-next": "cex_next.json", "cex-big": "cex_big.json", "cex-back": "cex_back.json",
}

# bundled explicit models that exhibit each invalid pattern
PATTERN_FIXTURES = {"P1": "cex_next.json", "P2": "cex_big.json", "P3": "cex_back.json",
                    "P4": "cex_next.json", "P5": "cex_back.json"}


class CliError(Exception):
    pass


def _load_document(name: str) -> tuple[str, dict]:
    """Read a JSON model from a path, falling back to bundled fixture names."""
    path = Path(name)
    if path.is_file():
        text, label = path.read_text(encoding="utf-8"), str(path)
    else:
        key = name.lower().replace("_", "-")
        key = key[:-5] if key.endswith(".json") else key
        bundled = ALIASES.get(key, name if name.endswith(".json") else name + ".json")
        res = casestudy.fixture_path(bundled)
        if not res.is_file():
            raise CliError(f"no such model file or bundled fixture: {name}")
        text, label = res.read_text(encoding="utf-8"), f"<fixture {bundled}>"
    try:
        return label, json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{label}: invalid JSON: {exc}") from exc


def _load_automaton(name: str, start: Optional[str]):
    label, doc = _load_document(name)
    T = from_dict(doc)
    if start is not None:
        if start not in T.states:
            raise CliError(f"--from: unknown state {start!r}")
        T = reroot(T, start)
    return label, T


def _lasso(l: Optional[Lasso]) -> Optional[str]:
    return None if l is None else str(l)


def _emit(report: dict, fmt: str, text_lines: list[str]) -> None:
    if fmt == "json":
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print("\n".join(text_lines))


def _verdict_text(v: Verdict, explain: bool) -> list[str]:
    lines = [f"verdict: {'SAT' if v.holds else 'UNSAT'}"]
    if v.optimal_actions:
        lines.append(f"optimal actions: {', '.join(sorted(v.optimal_actions))}")
    if v.failing_action:
        lines.append(f"failing action: {v.failing_action}")
    if explain:
        for i in v.intervals:
            lines.append(f"  interval {i.action}: [{i.lower:.6g}, {i.upper:.6g}] (error {i.certified_error:.2g})")
        if v.counterexample is not None:
            lines.append(f"counterexample: {v.counterexample}")
        for k, n in sorted(v.stats.items()):
            lines.append(f"  {k}: {n}")
    for n in v.notes:
        lines.append(f"note: {n}")
    return lines


def _verdict_report(v: Verdict, explain: bool) -> dict:
    d = v.to_dict()
    d["counterexample"] = _lasso(v.counterexample)
    if not explain:
        d.pop("intervals")
        d.pop("stats")
    return d


# --------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    label, doc = _load_document(args.model)
    if "moments" in doc:
        kind, diags = "explicit model", validate_model(model_from_dict(doc))
    else:
        kind, diags = "automaton", validate(from_dict(doc))
    _emit({"model": label, "kind": kind, "valid": not diags, "diagnostics": diags}, args.format,
          [f"{label} ({kind}): {'valid' if not diags else 'invalid'}"] + [f"  {d}" for d in diags])
    return EXIT_HOLDS if not diags else EXIT_FAILS


def _run_check(args, mission: bool) -> int:
    label, T = _load_automaton(args.model, args.start)
    f = parse_formula(args.formula)
    t0 = time.perf_counter()
    v = check_mission(T, f) if mission else check_query(T, f, args.tau)
    elapsed = time.perf_counter() - t0
    report = {"model": label, "query": to_text(f), "from": T.initial, **_verdict_report(v, args.explain)}
    lines = [f"query: {to_text(f)} from {T.initial}"] + _verdict_text(v, args.explain)
    if args.timing:
        report["timing_s"] = round(elapsed, 6)
        lines.append(f"time: {elapsed:.3f}s")
    _emit(report, args.format, lines)
    return EXIT_HOLDS if v.holds else EXIT_FAILS


def cmd_check(args) -> int:
    return _run_check(args, mission=False)


def cmd_mission(args) -> int:
    return _run_check(args, mission=True)


def cmd_oracle(args) -> int:
    label, doc = _load_document(args.model)
    M = model_from_dict(doc)
    diags = validate_model(M)
    if diags:
        raise CliError("invalid explicit model: " + "; ".join(diags))
    i = Index.parse(args.index)
    f = parse_formula(args.formula)
    v = eval3(M, i, f)
    if v is None:
        raise CliError(f"{to_text(f)} is undetermined at {i}: the tree is too shallow")
    _emit({"model": label, "index": str(i), "query": to_text(f), "holds": v}, args.format,
          [f"{label} {i} |= {to_text(f)}: {'true' if v else 'false'}"])
    return EXIT_HOLDS if v else EXIT_FAILS


def cmd_patterns(args) -> int:
    pids = list(PATTERNS) if args.pattern == "all" else [args.pattern]
    for pid in pids:
        if pid not in PATTERNS:
            raise CliError(f"unknown pattern {pid!r}; known: {', '.join(PATTERNS)}, all")
    rows, lines, all_ok = [], [], True
    for pid in pids:
        pat = PATTERNS[pid]
        row: dict = {"pattern": pid, "formula": pat.text.format(phi="phi", psi="psi"),
                     "expected_valid": pat.expected_valid}
        fixture_cex = None
        if pid in PATTERN_FIXTURES:
            _, doc = _load_document(PATTERN_FIXTURES[pid])
            res = check_pattern(model_from_dict(doc), pid)
            fixture_cex = None if res.counterexample is None else str(res.counterexample)
            row["fixture"] = PATTERN_FIXTURES[pid]
            row["fixture_counterexample"] = fixture_cex
        search = search_pattern(pid, range(args.seeds), stop_at_first=pat.expected_valid is False)
        row["seeds_searched"] = search.seeds
        row["constraint_passing"] = search.constraint_passing
        row["search_counterexample"] = None if search.counterexample is None else {
            "seed": search.counterexample_seed, "index": str(search.counterexample)}
        found = fixture_cex is not None or search.counterexample is not None
        ok = found != pat.expected_valid
        all_ok &= ok
        row["matches_expectation"] = ok
        rows.append(row)
        where = []
        if fixture_cex:
            where.append(f"{PATTERN_FIXTURES[pid]} at {fixture_cex}")
        if search.counterexample is not None:
            where.append(f"seed {search.counterexample_seed} at {search.counterexample}")
        status = ("counterexample: " + "; ".join(where)) if found else \
            f"no counterexample in {search.seeds} seeds"
        if pid == "L1":
            status += f" ({search.constraint_passing} models satisfy the constraint)"
        lines.append(f"{'ok  ' if ok else 'FAIL'} {pid} [{'valid' if pat.expected_valid else 'invalid'}]: {status}")
    _emit({"patterns": rows, "all_match": all_ok}, args.format, lines)
    return EXIT_HOLDS if all_ok else EXIT_FAILS


def cmd_casestudy(args) -> int:
    fixtures = [args.fixture] if args.fixture else None
    if args.fixture and args.fixture not in casestudy.FIXTURES:
        raise CliError(f"unknown fixture {args.fixture!r}; known: {', '.join(casestudy.FIXTURES)}")
    results = casestudy.run_casestudy(fixtures)
    rows = [{
        "fixture": r.row.fixture, "state": r.row.state, "name": r.row.name, "query": r.row.query,
        "expected": r.row.expected, "holds": r.verdict.holds, "match": r.ok,
        "optimal_actions": sorted(r.verdict.optimal_actions), "notes": list(r.verdict.notes),
    } for r in results]
    all_ok = all(r.ok for r in results)
    lines = [f"{'ok  ' if r.ok else 'FAIL'} {r.row.key:<48} {r.row.query:<42} "
             f"{'SAT' if r.verdict.holds else 'UNSAT'} (expected {'SAT' if r.row.expected else 'UNSAT'})"
             for r in results]
    lines.append(f"{sum(r.ok for r in results)}/{len(results)} rows match")
    _emit({"rows": rows, "all_match": all_ok}, args.format, lines)
    return EXIT_HOLDS if all_ok else EXIT_FAILS


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="daumc", description="DAU obligation model checking on stit automata.")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt(sp):
        sp.add_argument("--format", choices=["text", "json"], default="text")

    sp = sub.add_parser("validate", help="check a stit automaton or explicit model for well-formedness")
    sp.add_argument("model")
    fmt(sp)
    sp.set_defaults(func=cmd_validate)

    for name, func, hlp in [("check", cmd_check, "decide an Ob/Perm query (or a state formula)"),
                            ("mission", cmd_mission, "decide a deontic-free CTL* state formula")]:
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("model", help="automaton JSON file or bundled fixture name")
        sp.add_argument("formula")
        sp.add_argument("--from", dest="start", metavar="STATE", help="check from this state instead")
        if name == "check":
            sp.add_argument("--tau", type=int, help="fragment length for finite-horizon conditions")
        else:
            sp.set_defaults(tau=None)
        sp.add_argument("--explain", action="store_true", help="include intervals, counterexamples, statistics")
        sp.add_argument("--timing", action="store_true", help="report wall-clock time")
        fmt(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("oracle-eval", help="evaluate a formula at m/h on an explicit stit model")
    sp.add_argument("model")
    sp.add_argument("index", help="moment/history, e.g. m/h5")
    sp.add_argument("formula")
    fmt(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("patterns", help="search for counterexamples to obligation propagation patterns")
    sp.add_argument("pattern", nargs="?", default="all", help=f"one of {', '.join(PATTERNS)} or all")
    sp.add_argument("--seeds", type=int, default=1000)
    fmt(sp)
    sp.set_defaults(func=cmd_patterns)

    sp = sub.add_parser("casestudy", help="run the highway case-study verdict table")
    sp.add_argument("--fixture", help=f"one of {', '.join(casestudy.FIXTURES)}")
    fmt(sp)
    sp.set_defaults(func=cmd_casestudy)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CheckerError, FormulaError, AutomatonError, OracleError, UtilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
