import json
import random

import pytest

from daumc.automaton import (
    AutomatonError, Discounted, Execution, Min, Transition, enumerate_prefixes, from_dict, kripke_view,
    load_automaton, make_automaton, prefix_trace, prime, reroot, restrict_first_action, save_automaton, spine,
    to_dict, validate,
)
from daumc.casestudy import fixture_path
from oracles import random_automaton


def traces(T, length, root=None):
    """Set of (labels, actions) sequences of all length-``length`` prefixes."""
    out = set()
    for pi in enumerate_prefixes(T, length, root):
        out.add((tuple(map(frozenset, prefix_trace(T, pi, root))), tuple(t.action for t in pi)))
    return out


# -- validation ----------------------------------------------------------------

def test_toy_is_valid(toy):
    assert validate(toy) == []


def test_toy_fixture_file_matches_reference(toy):
    T = load_automaton(fixture_path("toy.json"))
    assert T.transitions == toy.transitions and T.labels == toy.labels
    assert T.accumulation == Discounted(0.5, 1e-9)


def test_duplicate_action_for_pair(toy):
    bad = make_automaton({"a": {"p"}, "b": {"q"}}, "a",
                         [(t.source, t.action, t.target, t.weight) for t in toy.transitions] + [("a", "K9", "b", 2)],
                         toy.accumulation)
    (diag,) = validate(bad)
    assert diag.startswith("duplicate action for pair (a,b)")


def test_missing_successor(toy):
    bad = make_automaton({"a": {"p"}, "b": {"q"}}, "a", [("a", "K1", "a", 1), ("a", "K2", "b", 0)], Min())
    assert validate(bad) == ["state b has no outgoing transition"]


def test_unknown_initial_and_endpoints():
    bad = make_automaton({"a": ()}, "z", [("a", "K", "c", 0)], Min())
    diags = validate(bad)
    assert any("initial" in d for d in diags) and any("c" in d for d in diags)


def test_discount_factor_range():
    with pytest.raises(ValueError):
        Discounted(1.0)
    with pytest.raises(ValueError):
        Discounted(0.5, tolerance=0)


# -- surgeries -----------------------------------------------------------------

def test_restrict_first_action(toy):
    T2 = restrict_first_action(toy, "K2")
    assert {t.action for t in T2.outgoing("a")} == {"K2"}
    T1 = restrict_first_action(toy, "K1")
    assert {t.action for t in T1.outgoing("a")} == {"K1"}
    with pytest.raises(AutomatonError):
        restrict_first_action(toy, "K3")


def test_prime_toy_k1_keeps_only_k1_first(toy):
    P = prime(toy, "K1")
    assert validate(P) == []
    for d in range(1, 5):
        assert traces(P, d) == {tr for tr in traces(toy, d) if tr[1][0] == "K1"}


def test_prime_toy_k2(toy):
    P = prime(toy, "K2")
    (first,) = P.outgoing(P.initial)
    assert (first.action, P.original(first.target)) == ("K2", "b")
    assert traces(P, 3) == {tr for tr in traces(toy, 3) if tr[1][0] == "K2"}


def test_prime_origin_maps_back(toy):
    P = prime(toy, "K1")
    assert P.original(P.initial) == "a"
    assert P.label(P.initial) == toy.label("a")


def test_prime_language_on_random_automata():
    for seed in range(60):
        rng = random.Random(seed)
        T = random_automaton(rng, rng.randint(1, 5), Min())
        for K in T.available_actions():
            P = prime(T, K)
            assert validate(P) == []
            for d in range(1, 5):
                assert traces(P, d) == {tr for tr in traces(T, d) if tr[1][0] == K}


def test_prime_without_reentry_matches_restriction():
    T = make_automaton({"a": (), "b": ("p",), "c": ()}, "a",
                       [("a", "K1", "b", 1), ("a", "K2", "c", 2), ("b", "K3", "b", 0), ("c", "K4", "b", 0)], Min())
    for K in ("K1", "K2"):
        assert traces(prime(T, K), 4) == traces(restrict_first_action(T, K), 4)


def test_spine(toy):
    (step,) = [t for t in toy.transitions if t.action == "K1"]
    S = spine(toy, [step])
    assert {pi[0].action for pi in enumerate_prefixes(S, 2)} == {"K1"}
    assert traces(S, 3) == {tr for tr in traces(toy, 3) if tr[1][0] == "K1"}
    (to_b,) = [t for t in toy.transitions if t.action == "K2"]
    S2 = spine(toy, [to_b])
    assert traces(S2, 3) == {tr for tr in traces(toy, 3) if tr[1][0] == "K2"}
    assert spine(toy, []) == toy


def test_spine_has_single_forced_prefix():
    for seed in range(40):
        rng = random.Random(seed)
        T = random_automaton(rng, rng.randint(1, 5), Min())
        for pi in list(enumerate_prefixes(T, 3))[:5]:
            S = spine(T, pi)
            assert validate(S) == []
            prefixes = list(enumerate_prefixes(S, 3))
            assert len(prefixes) == 1
            assert prefix_trace(S, prefixes[0]) == prefix_trace(T, pi)
            assert [t.action for t in prefixes[0]] == [t.action for t in pi]


def test_spine_rejects_unchained(toy):
    a1 = Transition("a", "K1", "a", 1.0)
    b3 = Transition("b", "K3", "b", 5.0)
    with pytest.raises(AutomatonError):
        spine(toy, [a1, b3])
    with pytest.raises(AutomatonError):
        spine(toy, [b3])


def test_reroot(toy):
    assert reroot(toy, "b").initial == "b"
    assert reroot(toy, "a") == toy
    with pytest.raises(AutomatonError):
        reroot(toy, "z")


def test_kripke_view(toy):
    ts = kripke_view(toy)
    assert ts.edges == {("a", "a"), ("a", "b"), ("b", "b")}
    single = make_automaton({"c": ()}, "c", [("c", "K", "c", 7)], Min())
    assert kripke_view(single).edges == {("c", "c")}


# -- executions and serialisation ---------------------------------------------------

def test_execution_weights():
    t1, t2 = Transition("a", "K2", "b", 0.0), Transition("b", "K3", "b", 5.0)
    ex = Execution((t1, t2), lasso=(1, 1))
    assert ex.weights(4) == [0.0, 5.0, 5.0, 5.0]
    assert ex.states() == ["a", "b", "b"]
    with pytest.raises(AutomatonError):
        Execution((t2, t1))


def test_enumerate_prefixes_counts(toy):
    assert len(list(enumerate_prefixes(toy, 1))) == 2
    assert len(list(enumerate_prefixes(toy, 3))) == 4  # a^3, a^2 b, a b b, ... one switch point or none


def test_json_roundtrip(toy, tmp_path):
    path = tmp_path / "t.json"
    save_automaton(toy, path)
    back = load_automaton(path)
    assert (back.transitions, back.labels, back.accumulation, back.initial) == \
        (toy.transitions, toy.labels, toy.accumulation, toy.initial)
    assert from_dict(json.loads(json.dumps(to_dict(toy)))).transitions == toy.transitions


def test_malformed_document():
    with pytest.raises(AutomatonError):
        from_dict({"states": []})


@pytest.mark.parametrize("name", ["toy.json", "toy_min.json", "highway_a.json", "highway_b.json",
                                  "highway_b_red.json"])
def test_bundled_automata_are_valid(name):
    assert validate(load_automaton(fixture_path(name))) == []
