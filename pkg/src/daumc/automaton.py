"""Stit automata: weighted, action-labelled transition systems.

Besides the data type this module provides the graph surgeries used by the
obligation checker (first-action restriction, the primed copy, fragment
spines, re-rooting) and the JSON file format.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*\Z")


class AutomatonError(ValueError):
    """Raised for malformed automata or invalid surgery requests."""


@dataclass(frozen=True)
class Min:
    """History value is the smallest weight seen along the execution."""

    kind = "min"


@dataclass(frozen=True)
class Discounted:
    """History value is the discounted sum of weights."""

    gamma: float
    tolerance: float = 1e-9
    kind = "discounted"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise AutomatonError(f"discount factor must lie in (0, 1), got {self.gamma}")
        if not self.tolerance > 0.0:
            raise AutomatonError(f"tolerance must be positive, got {self.tolerance}")


AccumulationPolicy = Union[Min, Discounted]


@dataclass(frozen=True, order=True)
class Transition:
    source: str
    action: str
    target: str
    weight: float


@dataclass(frozen=True)
class StitAutomaton:
    """Finite stit automaton.

    ``origin`` maps states introduced by a surgery back to the state of the
    automaton they were copied from; it is empty for automata read from a
    file (every state is its own origin).
    """

    states: frozenset[str]
    initial: str
    actions: frozenset[str]
    transitions: frozenset[Transition]
    labels: Mapping[str, frozenset[str]]
    accumulation: AccumulationPolicy
    agent: str = "alpha"
    finals: frozenset[str] = frozenset()
    origin: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __hash__(self):
        return hash((self.states, self.initial, self.transitions))

    def label(self, q: str) -> frozenset[str]:
        return self.labels.get(q, frozenset())

    def original(self, q: str) -> str:
        return self.origin.get(q, q)

    def outgoing(self, q: str) -> list[Transition]:
        return sorted(t for t in self.transitions if t.source == q)

    def available_actions(self, q: Optional[str] = None) -> list[str]:
        q = self.initial if q is None else q
        return sorted({t.action for t in self.transitions if t.source == q})

    def successors(self, q: str) -> list[str]:
        return sorted({t.target for t in self.transitions if t.source == q})

    def reachable(self, root: Optional[str] = None) -> set[str]:
        root = self.initial if root is None else root
        succ = self.successor_map()
        seen = {root}
        stack = [root]
        while stack:
            for r in succ.get(stack.pop(), ()):
                if r not in seen:
                    seen.add(r)
                    stack.append(r)
        return seen

    def successor_map(self) -> dict[str, list[str]]:
        out: dict[str, set[str]] = {q: set() for q in self.states}
        for t in self.transitions:
            out.setdefault(t.source, set()).add(t.target)
        return {q: sorted(v) for q, v in out.items()}

    def atom_universe(self) -> frozenset[str]:
        return frozenset().union(*self.labels.values()) if self.labels else frozenset()


def make_automaton(
    states: Mapping[str, Iterable[str]],
    initial: str,
    transitions: Iterable[tuple[str, str, str, float]],
    accumulation: AccumulationPolicy,
    agent: str = "alpha",
    finals: Iterable[str] = (),
) -> StitAutomaton:
    """Convenience constructor from plain Python values."""
    trs = frozenset(Transition(s, a, t, float(w)) for s, a, t, w in transitions)
    return StitAutomaton(
        states=frozenset(states),
        initial=initial,
        actions=frozenset(t.action for t in trs),
        transitions=trs,
        labels={q: frozenset(ats) for q, ats in states.items()},
        accumulation=accumulation,
        agent=agent,
        finals=frozenset(finals),
    )


# --------------------------------------------------------------------------
# validation

def validate(T: StitAutomaton) -> list[str]:
    """Return human-readable diagnostics; empty means the automaton is well-formed."""
    diags: list[str] = []
    if T.initial not in T.states:
        diags.append(f"initial state {T.initial!r} is not a declared state")
    for name in sorted(T.states):
        if not NAME_RE.match(name):
            diags.append(f"malformed state name {name!r}")
    for t in sorted(T.transitions):
        for end in (t.source, t.target):
            if end not in T.states:
                diags.append(f"transition {t.source}-{t.action}->{t.target} uses unknown state {end!r}")
        if not NAME_RE.match(t.action):
            diags.append(f"malformed action name {t.action!r}")
        if t.action not in T.actions:
            diags.append(f"action {t.action!r} is not declared")
        if t.weight != t.weight or t.weight in (float("inf"), float("-inf")):
            diags.append(f"transition {t.source}-{t.action}->{t.target} has non-finite weight")
    pair_actions: dict[tuple[str, str], set[str]] = {}
    for t in T.transitions:
        pair_actions.setdefault((t.source, t.target), set()).add(t.action)
    for (q, r), acts in sorted(pair_actions.items()):
        if len(acts) > 1:
            diags.append(f"duplicate action for pair ({q},{r}): {', '.join(sorted(acts))}")
    for q, ats in sorted(T.labels.items()):
        if q not in T.states:
            diags.append(f"labels given for unknown state {q!r}")
        for a in sorted(ats):
            if not NAME_RE.match(a):
                diags.append(f"malformed atom name {a!r} at state {q!r}")
    for f in sorted(T.finals - T.states):
        diags.append(f"final state {f!r} is not a declared state")
    if T.initial in T.states:
        has_out = {t.source for t in T.transitions}
        for q in sorted(T.reachable()):
            if q not in has_out:
                diags.append(f"state {q} has no outgoing transition")
    return diags


def require_valid(T: StitAutomaton) -> None:
    diags = validate(T)
    if diags:
        raise AutomatonError("; ".join(diags))


# --------------------------------------------------------------------------
# surgeries

def _check_action(T: StitAutomaton, K: str) -> None:
    if K not in T.available_actions():
        raise AutomatonError(f"action {K!r} is not available at initial state {T.initial!r}")


def restrict_first_action(T: StitAutomaton, K: str) -> StitAutomaton:
    """Keep only the K-labelled transitions leaving the initial state."""
    _check_action(T, K)
    kept = frozenset(t for t in T.transitions if t.source != T.initial or t.action == K)
    return replace(T, transitions=kept)


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    i = 1
    while name in taken:
        name = f"{base}_{i}"
        i += 1
    taken.add(name)
    return name


def prime(T: StitAutomaton, K: str) -> StitAutomaton:
    """Automaton whose executions are exactly those of T that start with action K.

    A renamed copy of the first-action restriction is glued to an untouched
    copy of T: every transition of the renamed copy that would re-enter the
    renamed initial state is redirected to T's own initial state, so the
    restriction applies to the first step only.  The renamed copy keeps only
    states reachable from its root.
    """
    Tn = restrict_first_action(T, K)
    taken = set(T.states)
    reach = Tn.reachable()
    rename = {q: _fresh(f"{q}_prime", taken) for q in sorted(reach)}
    root = rename[T.initial]
    trs = set(T.transitions)
    for t in Tn.transitions:
        if t.source not in reach:
            continue
        target = T.initial if t.target == T.initial else rename[t.target]
        trs.add(Transition(rename[t.source], t.action, target, t.weight))
    labels = dict(T.labels)
    origin = dict(T.origin)
    for q, r in rename.items():
        labels[r] = T.label(q)
        origin[r] = T.original(q)
    return StitAutomaton(
        states=T.states | frozenset(rename.values()),
        initial=root,
        actions=T.actions,
        transitions=frozenset(trs),
        labels=labels,
        accumulation=T.accumulation,
        agent=T.agent,
        finals=T.finals | frozenset(rename[q] for q in T.finals if q in rename),
        origin=origin,
    )


def is_chained(T: StitAutomaton, forced: Sequence[Transition], root: Optional[str] = None) -> bool:
    root = T.initial if root is None else root
    at = root
    for t in forced:
        if t.source != at or t not in T.transitions:
            return False
        at = t.target
    return True


def spine(T: StitAutomaton, forced: Sequence[Transition]) -> StitAutomaton:
    """Automaton with a single forced prefix followed by T's behaviour.

    Fresh states ``s0 .. s_{k-1}`` carry the labels of the forced
    transitions' sources; the last forced transition enters T itself, so
    afterwards every behaviour of T from the reached state is available.
    """
    forced = list(forced)
    if not forced:
        return T
    if forced[0].source != T.initial:
        raise AutomatonError(f"forced sequence must start at {T.initial!r}")
    if not is_chained(T, forced):
        raise AutomatonError("forced transitions are not a chained path of the automaton")
    taken = set(T.states)
    names = [_fresh(f"spine{i}", taken) for i in range(len(forced))]
    trs = set(T.transitions)
    labels = dict(T.labels)
    origin = dict(T.origin)
    for i, t in enumerate(forced):
        target = names[i + 1] if i + 1 < len(forced) else t.target
        trs.add(Transition(names[i], t.action, target, t.weight))
        labels[names[i]] = T.label(t.source)
        origin[names[i]] = T.original(t.source)
    return StitAutomaton(
        states=T.states | frozenset(names),
        initial=names[0],
        actions=T.actions,
        transitions=frozenset(trs),
        labels=labels,
        accumulation=T.accumulation,
        agent=T.agent,
        finals=T.finals,
        origin=origin,
    )


def reroot(T: StitAutomaton, q: str) -> StitAutomaton:
    """Same automaton, initial state moved to q."""
    if q not in T.states:
        raise AutomatonError(f"unknown state {q!r}")
    return T if q == T.initial else replace(T, initial=q)


def reachable_part(T: StitAutomaton) -> StitAutomaton:
    """Drop states (and their transitions) unreachable from the initial state."""
    keep = T.reachable()
    return replace(
        T,
        states=frozenset(keep),
        transitions=frozenset(t for t in T.transitions if t.source in keep),
        labels={q: v for q, v in T.labels.items() if q in keep},
        finals=T.finals & keep,
    )


def kripke_view(T: StitAutomaton):
    """Forget actions and weights, keeping the state graph and labels."""
    from .temporal import TransitionSystem

    return TransitionSystem(
        states=T.states,
        initial=T.initial,
        edges=frozenset((t.source, t.target) for t in T.transitions),
        labels=T.labels,
    )


# --------------------------------------------------------------------------
# executions

@dataclass(frozen=True)
class Execution:
    """A finite prefix of transitions, optionally marked as a lasso.

    With ``lasso=(p, c)`` the execution is transitions[:p] followed by
    transitions[p:p+c] repeated forever.
    """

    transitions: tuple[Transition, ...]
    lasso: Optional[tuple[int, int]] = None

    def __post_init__(self):
        for a, b in zip(self.transitions, self.transitions[1:]):
            if a.target != b.source:
                raise AutomatonError("execution transitions do not chain")
        if self.lasso is not None:
            p, c = self.lasso
            if c < 1 or p + c != len(self.transitions):
                raise AutomatonError("lasso shape does not match transition count")
            if self.transitions[-1].target != self.transitions[p].source:
                raise AutomatonError("lasso cycle does not close")

    def states(self) -> list[str]:
        if not self.transitions:
            return []
        return [self.transitions[0].source] + [t.target for t in self.transitions]

    def weights(self, length: int) -> list[float]:
        """The first ``length`` weights of the (possibly infinite) execution."""
        out = [t.weight for t in self.transitions[:length]]
        if self.lasso is None or len(out) >= length:
            return out
        p, c = self.lasso
        cycle = [t.weight for t in self.transitions[p:]]
        while len(out) < length:
            out.append(cycle[(len(out) - p) % c])
        return out


def enumerate_prefixes(T: StitAutomaton, length: int, root: Optional[str] = None) -> Iterator[tuple[Transition, ...]]:
    """All chained transition sequences of the given length from root, in sorted order."""
    root = T.initial if root is None else root
    out_map: dict[str, list[Transition]] = {}
    for t in sorted(T.transitions):
        out_map.setdefault(t.source, []).append(t)

    def go(q: str, left: int) -> Iterator[tuple[Transition, ...]]:
        if left == 0:
            yield ()
            return
        for t in out_map.get(q, ()):
            for rest in go(t.target, left - 1):
                yield (t,) + rest

    yield from go(root, length)


def prefix_trace(T: StitAutomaton, prefix: Sequence[Transition], root: Optional[str] = None) -> list[frozenset[str]]:
    """Label sequence L(q0), L(q1), ... seen along a transition prefix."""
    q0 = prefix[0].source if prefix else (T.initial if root is None else root)
    return [T.label(q0)] + [T.label(t.target) for t in prefix]


# --------------------------------------------------------------------------
# serialisation

def _accumulation_from_json(d: Mapping) -> AccumulationPolicy:
    kind = d.get("kind")
    if kind == "min":
        return Min()
    if kind == "discounted":
        return Discounted(float(d["gamma"]), float(d.get("tolerance", 1e-9)))
    raise AutomatonError(f"unknown accumulation kind {kind!r}")


def from_dict(d: Mapping) -> StitAutomaton:
    try:
        states = {s["id"]: frozenset(s.get("atoms", ())) for s in d["states"]}
        finals = frozenset(s["id"] for s in d["states"] if s.get("final", False))
        trs = frozenset(
            Transition(t["from"], t["action"], t["to"], float(t["weight"])) for t in d["transitions"]
        )
        return StitAutomaton(
            states=frozenset(states),
            initial=d["initial"],
            actions=frozenset(d.get("actions", ())) | frozenset(t.action for t in trs),
            transitions=trs,
            labels=states,
            accumulation=_accumulation_from_json(d.get("accumulation", {"kind": "min"})),
            agent=d.get("agent", "alpha"),
            finals=finals,
        )
    except (KeyError, TypeError) as exc:
        raise AutomatonError(f"malformed automaton document: missing or bad field {exc}") from exc


def to_dict(T: StitAutomaton) -> dict:
    acc = T.accumulation
    acc_d = {"kind": "min"} if isinstance(acc, Min) else {
        "kind": "discounted", "gamma": acc.gamma, "tolerance": acc.tolerance}
    return {
        "agent": T.agent,
        "accumulation": acc_d,
        "initial": T.initial,
        "states": [
            {"id": q, "atoms": sorted(T.label(q)), "final": q in T.finals} for q in sorted(T.states)
        ],
        "transitions": [
            {"from": t.source, "action": t.action, "to": t.target, "weight": t.weight}
            for t in sorted(T.transitions)
        ],
    }


def load_automaton(path: Union[str, Path]) -> StitAutomaton:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AutomatonError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(doc)


def save_automaton(T: StitAutomaton, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(T), fh, indent=2, sort_keys=True)
        fh.write("\n")
