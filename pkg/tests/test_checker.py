import random

import pytest

from daumc.automaton import Discounted, Min, kripke_view, make_automaton
from daumc.checker import (
    CheckerError, check_conditional_ought, check_mission, check_ought, check_permission, check_query,
    negate_body,
)
from daumc.formula import And, ForAll, Not, Or, parse_formula
from daumc.temporal import Lasso, check_state
from oracles import random_automaton, random_ltl

f = parse_formula


def approx_interval(v, action, lo, hi):
    (i,) = [i for i in v.intervals if i.action == action]
    return abs(i.lower - lo) <= 1e-8 and abs(i.upper - hi) <= 1e-8


# -- unconditional -------------------------------------------------------------

def test_ought_next_q(toy):
    v = check_ought(toy, f("X q"))
    assert v.holds and v.optimal_actions == {"K2"}
    assert approx_interval(v, "K1", 2, 3.5) and approx_interval(v, "K2", 5, 5)


def test_ought_always_p_fails_with_counterexample(toy):
    v = check_ought(toy, f("G p"))
    assert not v.holds and v.failing_action == "K2"
    assert v.counterexample == Lasso(("a",), ("b",))


def test_ought_true_and_false(toy):
    assert check_ought(toy, f("true")).holds
    v = check_ought(toy, f("false"))
    assert not v.holds and v.failing_action in v.optimal_actions


def test_ought_dstit(toy):
    v = check_ought(toy, f("dstit[a](X q)"))
    assert v.holds and not v.notes


def test_ought_dstit_of_necessary_formula_is_trivially_false(toy):
    v = check_ought(toy, f("dstit[a](G (p | q))"))
    assert not v.holds and any(n.startswith("trivial") for n in v.notes)


def test_ought_neg_dstit(toy):
    # K2 deliberately guarantees X q, so it cannot be obliged not to
    assert not check_ought(toy, f("!dstit[a](X q)")).holds
    v = check_ought(toy, f("!dstit[a](G (p | q))"))
    assert v.holds and any("trivial" in n for n in v.notes)
    assert check_ought(toy, f("!dstit[a](G p)")).holds


def test_state_subformulas_in_body(toy):
    # from b nothing but q is ever seen: "eventually A G q" is guaranteed by K2
    assert check_ought(toy, f("F A G q")).holds
    assert not check_ought(toy, f("G E F p")).holds


def test_inadmissible_body(toy):
    with pytest.raises(CheckerError, match="oracle-eval"):
        check_ought(toy, f("Ob[a](p)"))
    with pytest.raises(CheckerError, match="oracle-eval"):
        check_ought(toy, f("cstit[a](p)"))


def test_min_accumulation(toy_min):
    # K1 spans [0, 1], K2 is stuck at 0: the tie u2 = l1 makes K2 dominated
    v = check_ought(toy_min, f("X p"))
    assert v.optimal_actions == {"K1"} and v.holds
    v = check_ought(toy_min, f("G p"))
    assert not v.holds and v.counterexample == Lasso(("a", "a"), ("b",))


# -- conditional ---------------------------------------------------------------

def test_conditional_examples(toy):
    v = check_conditional_ought(toy, f("X p"), f("X p"))
    assert v.holds and v.optimal_actions == {"K1"}
    v = check_conditional_ought(toy, f("G p"), f("X p"))
    assert not v.holds and v.optimal_actions == {"K1"}
    assert v.counterexample == Lasso(("a", "a"), ("b",))
    v = check_conditional_ought(toy, f("X q"), f("X q"))
    assert v.holds and v.optimal_actions == {"K2"}


def test_conditional_unsatisfiable_condition_is_vacuous(toy):
    v = check_conditional_ought(toy, f("false"), f("X false"))
    assert v.holds and not v.optimal_actions
    assert any("condition unsatisfiable" in n for n in v.notes)


def test_conditional_tau(toy):
    assert check_conditional_ought(toy, f("X p"), f("X p"), tau=3).holds
    with pytest.raises(CheckerError):
        check_conditional_ought(toy, f("X p"), f("X X p"), tau=1)
    with pytest.raises(CheckerError):
        check_conditional_ought(toy, f("X p"), f("X p"), tau=9)
    with pytest.raises(CheckerError):
        check_conditional_ought(toy, f("X p"), f("G p"), tau=2)


def test_conditional_lower_value_uses_minimum():
    # K1 has fragments worth exactly 0 and 10, K2 is worth 6: with the minimum
    # K1 spans [0, 10] and nothing is dominated; the maximum would make K1
    # [10, 10] and knock K2 out.
    T = make_automaton(
        {"s": (), "m": (), "lo": ("c",), "hi": ("c",), "x": ("c",)}, "s",
        [("s", "K1", "m", 0), ("m", "L", "lo", 0), ("m", "H", "hi", 0), ("s", "K2", "x", 0),
         ("lo", "Z", "lo", 0), ("hi", "T", "hi", 1), ("x", "S", "x", 0.6)],
        Discounted(0.9),
    )
    v = check_conditional_ought(T, f("X X c"), f("X X c"))
    assert v.optimal_actions == {"K1", "K2"}
    assert any("maximum of fragment minima" in n for n in v.notes)


def test_conditional_unbounded_condition(toy):
    v = check_conditional_ought(toy, f("X p"), f("G p"))
    assert v.holds and v.optimal_actions == {"K1"}
    assert any("no finite horizon" in n for n in v.notes)
    # the whole optimal action must guarantee the body, not only its condition-satisfying part
    assert not check_conditional_ought(toy, f("G p"), f("G p")).holds


def test_conditional_rejects_deontic_condition(toy):
    with pytest.raises(CheckerError):
        check_conditional_ought(toy, f("p"), f("Ob[a](p)"))


# -- permission, missions, dispatch ---------------------------------------------------

def test_permission_examples(toy):
    assert not check_permission(toy, f("G p")).holds
    assert check_permission(toy, f("X q")).holds
    assert check_permission(toy, f("true")).holds


def test_negate_body_stays_admissible():
    assert negate_body(f("!dstit[a](p)")) == f("dstit[a](p)")
    assert negate_body(f("dstit[a](p)")) == f("!dstit[a](p)")
    assert negate_body(f("G p")) == Not(f("G p"))


def test_missions(toy):
    assert check_mission(toy, f("E F q")).holds
    assert not check_mission(toy, f("A G p")).holds
    with pytest.raises(CheckerError):
        check_mission(toy, f("F q"))


def test_query_dispatch(toy):
    assert check_query(toy, f("Ob[alpha](X q)")).holds
    assert check_query(toy, f("E F q")).holds
    assert check_query(toy, f("Perm[alpha](X p | X p)")).holds
    v = check_query(toy, f("Ob[beta](X q)"))
    assert any("agent 'beta'" in n for n in v.notes)
    with pytest.raises(CheckerError, match="oracle-eval"):
        check_query(toy, f("XX Ob[alpha](p)"))
    with pytest.raises(CheckerError):
        check_query(toy, f("F q"))


def test_verdict_is_reproducible(toy):
    assert check_ought(toy, f("G p")).to_dict() == check_ought(toy, f("G p")).to_dict()


# -- properties on random automata ----------------------------------------------------

def test_random_properties():
    for seed in range(80):
        rng = random.Random(seed)
        acc = Discounted(0.7) if rng.random() < 0.5 else Min()
        T = random_automaton(rng, rng.randint(1, 5), acc, float_weights=isinstance(acc, Discounted))
        A, B = random_ltl(rng, 2), random_ltl(rng, 2)
        # duality
        assert check_permission(T, A).holds == (not check_ought(T, Not(A)).holds)
        # optimal sets are never empty: Ought(true) holds, Ought(false) fails
        assert check_ought(T, f("true")).holds and not check_ought(T, f("false")).holds
        # every available history violates A => Ought(A or B) reduces to Ought(B)
        if T.initial in check_state(kripke_view(T), ForAll(Not(A))) and check_ought(T, Or(A, B)).holds:
            assert check_ought(T, B).holds
        v = check_ought(T, And(A, B))
        assert v.optimal_actions and v.optimal_actions <= set(T.available_actions())
        if not v.holds:
            assert v.failing_action is not None or v.notes
