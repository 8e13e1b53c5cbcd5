"""Highway-driving case study: missions, obligations and permissions on bundled fixtures.

Each row pairs a query with the verdict the scenario calls for.  The
fixtures are reconstructions certified against these rows; their weight
rationale is recorded in the fixture files themselves.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .automaton import StitAutomaton, from_dict, reroot
from .checker import Verdict, check_query
from .formula import parse_formula

import json

MISSIONS = {
    "mu1": "E F onHighway",
    "mu2": "E F<=4 reachExit",
    "mu3": "E G !collision",
}
NO_COLLISION = "Ob[alpha](G !collision)"
NO_COLLISION_COND = "Ob[alpha](G !collision | G !collision)"
NO_NEXT_COLLISION = "Ob[alpha](X !collision)"
PI1 = "Perm[alpha](F<=4 reachExit)"
PI2 = "Perm[alpha](!dstit[alpha](g R !p))"
PI3 = "Perm[alpha](dstit[alpha](!(g R !p)))"
EXIT_WITHIN_N = 1
PI_EXIT_N = f"Perm[alpha](F<={EXIT_WITHIN_N} reachExit)"

FIXTURES = {"A": "highway_a.json", "B": "highway_b.json", "B-red": "highway_b_red.json"}


def fixture_path(name: str):
    return resources.files("daumc") / "fixtures" / name


def load_fixture(key: str) -> StitAutomaton:
    with fixture_path(FIXTURES.get(key, key)).open(encoding="utf-8") as fh:
        return from_dict(json.load(fh))


def collision_free(T: StitAutomaton) -> set[str]:
    """States from which no collision state is reachable."""
    bad = {q for q in T.states if "collision" in T.label(q)}
    return {q for q in T.states if not (T.reachable(q) & bad)}


@dataclass(frozen=True)
class Row:
    fixture: str
    state: str
    name: str
    query: str
    expected: bool
    expect_note: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.fixture}:{self.state}:{self.name}"


@dataclass(frozen=True)
class RowResult:
    row: Row
    verdict: Verdict

    @property
    def ok(self) -> bool:
        if self.verdict.holds != self.row.expected:
            return False
        if self.row.expect_note is not None:
            return any(self.row.expect_note in n for n in self.verdict.notes)
        return True


def rows_for(fixture: str) -> list[Row]:
    T = load_fixture(fixture)
    rows: list[Row] = []
    if fixture in ("A", "B"):
        for name, f in MISSIONS.items():
            rows.append(Row(fixture, T.initial, name, f, True))
    if fixture == "A":
        # the designated collision-free set of the scenario
        cf = {"doNotEnter"}
        assert collision_free(T) == cf
        sink = {q for q in T.states if "collision" in T.label(q)}
        for q in sorted(T.states - cf):
            rows.append(Row(fixture, q, "no-collision", NO_COLLISION, False))
            rows.append(Row(fixture, q, "no-next-collision", NO_NEXT_COLLISION, False))
            if q in sink:
                # every history through the sink violates the condition: vacuous
                rows.append(Row(fixture, q, "no-collision-given-no-collision", NO_COLLISION_COND, True,
                                "condition unsatisfiable"))
            else:
                rows.append(Row(fixture, q, "no-collision-given-no-collision", NO_COLLISION_COND, False))
        rows.append(Row(fixture, "start", "pi1", PI1, True))
        rows.append(Row(fixture, "passEntry", "pi2", PI2, True, "trivial"))
        rows.append(Row(fixture, "passEntry", "pi3", PI3, False))
    elif fixture == "B":
        rows.append(Row(fixture, "start", "no-collision", NO_COLLISION, False))
        for q in sorted(collision_free(T)):
            rows.append(Row(fixture, q, "no-collision", NO_COLLISION, True))
        rows.append(Row(fixture, "passEntry", "no-next-collision", NO_NEXT_COLLISION, True))
        rows.append(Row(fixture, "onHighwayC", f"exit-within-{EXIT_WITHIN_N}", PI_EXIT_N, False))
        rows.append(Row(fixture, "passEntry", "pi2", PI2, False))
        rows.append(Row(fixture, "passEntry", "pi3", PI3, False))
    elif fixture == "B-red":
        rows.append(Row(fixture, "passEntry", "pi2", PI2, True))
        rows.append(Row(fixture, "passEntry", "pi3", PI3, True))
        rows.append(Row(fixture, "passEntry", "no-next-collision", NO_NEXT_COLLISION, False))
    return rows


def run_row(row: Row) -> RowResult:
    T = reroot(load_fixture(row.fixture), row.state)
    return RowResult(row, check_query(T, parse_formula(row.query)))


def run_casestudy(fixtures: Optional[list[str]] = None) -> list[RowResult]:
    keys = fixtures or list(FIXTURES)
    return [run_row(r) for k in keys for r in rows_for(k)]
