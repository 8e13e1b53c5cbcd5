import pytest

from daumc.automaton import validate
from daumc.casestudy import FIXTURES, collision_free, load_fixture, rows_for, run_row

ROWS = [r for k in FIXTURES for r in rows_for(k)]


@pytest.mark.parametrize("row", ROWS, ids=[r.key for r in ROWS])
def test_row(row):
    res = run_row(row)
    assert res.verdict.holds == row.expected, res.verdict.notes
    assert res.ok


def test_enough_rows():
    assert len(ROWS) >= 20


@pytest.mark.parametrize("key", list(FIXTURES))
def test_fixture_is_valid(key):
    assert validate(load_fixture(key)) == []


def test_collision_free_sets():
    assert collision_free(load_fixture("A")) == {"doNotEnter"}
    # in the modified scenario collision is only reachable through passEntry's doNotYield branch
    assert collision_free(load_fixture("B")) == {"doNotEnter", "onHighwayC", "onHighwayU", "reachExit"}


def test_fixture_a_structure():
    T = load_fixture("A")
    for q in ("doNotEnter", "start", "passEntry", "onHighway", "wantExit", "reachExit", "collision"):
        assert q in T.states
    assert "collision" in T.label("collision")
