import random

import pytest

from daumc.automaton import kripke_view
from daumc.formula import (
    Always, And, Atom, Eventually, Exists, ForAll, FormulaError, Next, Not, TrueF, Until, parse_formula,
)
from daumc.temporal import (
    Lasso, TransitionSystem, check_existential_path, check_state, check_universal_path, eval_finite_trace,
    eval_lasso, translate,
)
from oracles import exists_path_bruteforce, lassos_from, ltl_on_lasso, random_ltl

f = parse_formula


def random_ts(rng, n_max=4, atoms="pq"):
    n = rng.randint(1, n_max)
    states = [f"s{i}" for i in range(n)]
    succ = {s: sorted(rng.sample(states, rng.randint(1, min(2, n)))) for s in states}
    labels = {s: frozenset(a for a in atoms if rng.random() < 0.5) for s in states}
    ts = TransitionSystem(frozenset(states), "s0", frozenset((s, r) for s in states for r in succ[s]), labels)
    return ts, succ, labels


# -- examples on TOY -------------------------------------------------------------

def test_check_state_examples(toy):
    ts = kripke_view(toy)
    assert check_state(ts, f("E F q")) == {"a", "b"}
    assert check_state(ts, f("A G p")) == set()
    assert check_state(ts, f("E G p")) == {"a"}
    assert check_state(ts, f("A G true")) == {"a", "b"}


def test_check_state_rejects_path_formula(toy):
    with pytest.raises(FormulaError):
        check_state(kripke_view(toy), f("F q"))


def test_universal_examples(toy):
    ts = kripke_view(toy)
    assert check_universal_path(ts, "a", f("G (p | q)")).holds
    res = check_universal_path(ts, "a", f("F q"))
    assert not res.holds and res.lasso == Lasso((), ("a",)) and str(res.lasso) == "| a"
    assert check_universal_path(ts, "b", f("G q")).holds


def test_existential_examples(toy):
    ts = kripke_view(toy)
    res = check_existential_path(ts, "a", f("X q"))
    assert res.holds and res.lasso == Lasso(("a",), ("b",))
    assert not check_existential_path(ts, "b", f("F p")).holds
    assert check_existential_path(ts, "a", f("p U q")).holds


def test_lasso_normalisation():
    assert Lasso(("a", "b"), ("b",)).normalized() == Lasso(("a",), ("b",))
    assert Lasso((), ("a", "b", "a", "b")).normalized() == Lasso((), ("a", "b"))
    assert Lasso(("x", "b"), ("a", "b")).normalized() == Lasso(("x",), ("b", "a"))
    assert Lasso((), ("a",)).states(3) == ["a", "a", "a"]


# -- finite traces and lassos ----------------------------------------------------

def test_eval_finite_trace_examples():
    assert eval_finite_trace(f("X p"), [{"p"}, {"p"}])
    assert eval_finite_trace(f("F<=2 q"), [{"p"}, {"p"}, {"q"}])
    assert not eval_finite_trace(f("G<=1 p"), [{"p"}, {"q"}])


def test_eval_finite_trace_errors():
    with pytest.raises(FormulaError):
        eval_finite_trace(f("G p"), [{"p"}] * 5)
    with pytest.raises(FormulaError):
        eval_finite_trace(f("X X p"), [{"p"}, {"p"}])


def test_eval_lasso_matches_reference():
    for seed in range(300):
        rng = random.Random(seed)
        psi = random_ltl(rng, 3)
        n = rng.randint(1, 4)
        word = [frozenset(a for a in "pq" if rng.random() < 0.5) for _ in range(n)]
        loop = rng.randrange(n)
        assert eval_lasso(psi, word[:loop], word[loop:]) == ltl_on_lasso(psi, word, loop)


# -- cross-checks ----------------------------------------------------------------

def test_path_checks_against_lasso_enumeration():
    for seed in range(150):
        rng = random.Random(1000 + seed)
        ts, succ, labels = random_ts(rng)
        psi = random_ltl(rng, 3)
        for q in sorted(ts.states):
            e = check_existential_path(ts, q, psi)
            u = check_universal_path(ts, q, Not(psi))
            assert e.holds == (not u.holds)
            if e.holds:
                seq = list(e.lasso.prefix) + list(e.lasso.cycle)
                assert seq[0] == q
                assert all(b in succ[a] for a, b in zip(seq, seq[1:]))
                assert e.lasso.cycle[0] in succ[seq[-1]]
                assert ltl_on_lasso(psi, [labels[s] for s in seq], len(e.lasso.prefix))
            else:
                assert not exists_path_bruteforce(succ, labels, q, psi, 8)


def _ctl_star_reference(succ, labels, g, q):
    """Recursive CTL* semantics with quantifiers decided by lasso enumeration."""
    lab = {s: frozenset(v) for s, v in labels.items()}
    counter = iter(range(10**6))

    def flatten(h):
        if isinstance(h, (Exists, ForAll)):
            body = flatten(h.arg)
            target = body if isinstance(h, Exists) else Not(body)
            name = f"$ref{next(counter)}"
            sat = set()
            for s in succ:
                found = any(ltl_on_lasso(target, [lab[x] for x in states], loop)
                            for states, loop in lassos_from(succ, s, 6))
                if found == isinstance(h, Exists):
                    sat.add(s)
            for s in sat:
                lab[s] = lab[s] | {name}
            return Atom(name)
        kids = [flatten(c) for c in h.children]
        if not kids:
            return h
        if hasattr(h, "bound"):
            return type(h)(h.bound, kids[0])
        return type(h)(*kids)

    flat = flatten(g)
    return ltl_on_lasso(flat, [lab[q]], 0)


def test_nested_ctl_star_against_reference():
    for seed in range(120):
        rng = random.Random(5000 + seed)
        ts, succ, labels = random_ts(rng, n_max=3)
        inner, outer = random_ltl(rng, 2), random_ltl(rng, 1)
        g = rng.choice([
            Exists(Until(outer, ForAll(inner))),
            ForAll(Always(Exists(inner))),
            And(Exists(inner), Not(ForAll(Next(outer)))),
        ])
        sat = check_state(ts, g)
        for q in sorted(ts.states):
            assert (q in sat) == _ctl_star_reference(succ, labels, g, q)


def test_ef_is_backward_reachability():
    for seed in range(100):
        rng = random.Random(seed)
        ts, succ, labels = random_ts(rng, n_max=5)
        target = {s for s in succ if "p" in labels[s]}
        reach = set(target)
        changed = True
        while changed:
            new = {s for s in succ if any(r in reach for r in succ[s])} - reach
            changed = bool(new)
            reach |= new
        assert check_state(ts, Exists(Eventually(Atom("p")))) == reach
        assert check_state(ts, ForAll(Always(TrueF()))) == set(succ)


def test_translation_is_cached():
    g = parse_formula("p U q")
    assert translate(g) is translate(g)
