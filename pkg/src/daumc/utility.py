"""Extremal history utilities and dominance between actions.

For an automaton whose executions all start with one fixed action, the
interval ``[lower, upper]`` bounds the values of every execution.  Under
minimum accumulation both ends are found combinatorially (elementary
cycles and bottleneck paths); under discounting they come from value
iteration on the automaton read as a deterministic MDP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import networkx as nx

from .automaton import Discounted, Min, StitAutomaton
from .formula import Formula


class UtilityError(ValueError):
    pass


@dataclass(frozen=True)
class ActionInterval:
    action: str
    lower: float
    upper: float
    certified_error: float = 0.0

    def __post_init__(self):
        if self.certified_error < 0:
            raise UtilityError("certified error must be non-negative")
        if self.lower > self.upper + 2 * self.certified_error + 1e-12:
            raise UtilityError(f"empty interval for {self.action}: [{self.lower}, {self.upper}]")

    def widened(self) -> tuple[float, float]:
        return self.lower - self.certified_error, self.upper + self.certified_error


# --------------------------------------------------------------------------
# MDP cast and value iteration

@dataclass(frozen=True)
class StitMdp:
    """Deterministic MDP: each enabled choice is one transition of the automaton."""

    states: tuple[str, ...]
    choices: Mapping[str, tuple[tuple[str, float], ...]]  # state -> ((successor, reward), ...)
    gamma: float

    def __post_init__(self):
        for q in self.states:
            if not self.choices.get(q):
                raise UtilityError(f"state {q} has no enabled action")

    @classmethod
    def from_automaton(cls, T: StitAutomaton, gamma: float, negate: bool = False) -> "StitMdp":
        reach = sorted(T.reachable())
        sign = -1.0 if negate else 1.0
        choices: dict[str, list[tuple[str, float]]] = {q: [] for q in reach}
        for t in sorted(T.transitions):
            if t.source in choices:
                choices[t.source].append((t.target, sign * t.weight))
        return cls(tuple(reach), {q: tuple(v) for q, v in choices.items()}, gamma)

    @classmethod
    def from_graph(cls, graph: nx.DiGraph, gamma: float, negate: bool = False) -> "StitMdp":
        sign = -1.0 if negate else 1.0
        choices = {
            n: tuple((m, sign * graph.edges[n, m]["weight"]) for m in sorted(graph.successors(n)))
            for n in sorted(graph.nodes)
        }
        return cls(tuple(sorted(graph.nodes)), choices, gamma)


@dataclass(frozen=True)
class ValueIterationResult:
    values: Mapping[str, float]
    iterations: int
    certified_error: float


def value_iteration(mdp: StitMdp, eps: float) -> dict[str, float]:
    """Optimal discounted values within eps of the fixpoint (sup norm)."""
    return solve_mdp(mdp, eps).values


def solve_mdp(mdp: StitMdp, eps: float) -> ValueIterationResult:
    if not eps > 0:
        raise UtilityError("tolerance must be positive")
    g = mdp.gamma
    stop = eps * (1 - g) / g if g >= 0.5 else eps
    V = {q: 0.0 for q in mdp.states}
    it = 0
    while True:
        it += 1
        V2 = {q: max(r + g * V[s] for s, r in mdp.choices[q]) for q in mdp.states}
        delta = max((abs(V2[q] - V[q]) for q in mdp.states), default=0.0)
        V = V2
        if delta <= stop:
            return ValueIterationResult(V, it, g / (1 - g) * delta)


# --------------------------------------------------------------------------
# extremal values

def extremal_discounted(T: StitAutomaton) -> tuple[float, float, float]:
    """(lower, upper, certified_error) of discounted execution values from the initial state."""
    acc = T.accumulation
    if not isinstance(acc, Discounted):
        raise UtilityError("extremal_discounted needs discounted accumulation")
    hi = solve_mdp(StitMdp.from_automaton(T, acc.gamma), acc.tolerance)
    lo = solve_mdp(StitMdp.from_automaton(T, acc.gamma, negate=True), acc.tolerance)
    return -lo.values[T.initial], hi.values[T.initial], max(hi.certified_error, lo.certified_error)


def _weighted_graph(T: StitAutomaton) -> nx.DiGraph:
    reach = T.reachable()
    g = nx.DiGraph()
    g.add_nodes_from(sorted(reach))
    for t in sorted(T.transitions):
        if t.source in reach:
            g.add_edge(t.source, t.target, weight=t.weight)
    return g


def widest_paths(graph: nx.DiGraph, root) -> dict:
    """Best achievable bottleneck (min edge weight) from root to every reachable node."""
    best = {root: math.inf}
    # Bellman-Ford style relaxation; graphs are small.
    changed = True
    while changed:
        changed = False
        for u, v, w in graph.edges(data="weight"):
            if u in best:
                cand = min(best[u], w)
                if cand > best.get(v, -math.inf):
                    best[v] = cand
                    changed = True
    return best


def extremal_min(T: StitAutomaton) -> tuple[float, float]:
    """(lower, upper) of min-accumulated execution values from the initial state.

    The upper value is the best bottleneck over simple executions (an acyclic
    access path followed by one elementary cycle); elementary cycles are
    enumerated explicitly, which is exponential in the worst case but fine
    for hand-sized automata.  Every reachable edge lies on some execution, so
    the lower value is the smallest reachable weight.
    """
    if not isinstance(T.accumulation, Min):
        raise UtilityError("extremal_min needs min accumulation")
    g = _weighted_graph(T)
    lower = min(w for _, _, w in g.edges(data="weight"))
    access = widest_paths(g, T.initial)
    upper = -math.inf
    for cycle in nx.simple_cycles(g):
        ring = list(zip(cycle, cycle[1:] + cycle[:1]))
        cyc = min(g.edges[u, v]["weight"] for u, v in ring)
        entry = max(access[v] for v in cycle)
        upper = max(upper, min(cyc, entry))
    return lower, upper


def extremal_interval(T: StitAutomaton, action: str) -> ActionInterval:
    """Interval of an automaton whose executions all start with ``action``."""
    if isinstance(T.accumulation, Min):
        lo, hi = extremal_min(T)
        return ActionInterval(action, lo, hi, 0.0)
    lo, hi, err = extremal_discounted(T)
    return ActionInterval(action, lo, hi, err)


# --------------------------------------------------------------------------
# conditional extremal values over runs accepted by a condition

def conditional_interval(T: StitAutomaton, condition: Formula, action: str,
                         extra_labels: Optional[Mapping[str, Iterable[str]]] = None) -> Optional[ActionInterval]:
    """Extremal values over the executions of T that satisfy ``condition``.

    The executions are the accepting runs of the product of T with the
    condition's Büchi automaton.  Returns None if no execution satisfies the
    condition.  Suprema/infima over accepting runs coincide with those over
    paths inside the live region for discounting; for minimum accumulation
    the upper value needs a threshold search because a run must eventually
    reach a fair component.  ``extra_labels`` adds truth sets of atomised
    state subformulas.
    """
    from .automaton import kripke_view
    from .temporal import Product, fair_components

    ts = kripke_view(T)
    if extra_labels:
        ts = ts.with_labels(extra_labels)
    prod = Product(ts, condition, [T.initial])
    if not prod.satisfiable_from(T.initial):
        return None
    live = prod.live()
    weight = {(t.source, t.target): t.weight for t in T.transitions}
    g = nx.DiGraph()
    g.add_nodes_from(sorted(live))
    for u, v in prod.graph.edges:
        if u in live and v in live:
            g.add_edge(u, v, weight=weight[(u[0], v[0])])
    starts = [n for n in prod.initial[T.initial] if n in live]

    if isinstance(T.accumulation, Discounted):
        acc = T.accumulation
        root = ("$root", -1)
        g.add_node(root)
        for s in starts:
            for m in g.successors(s):
                g.add_edge(root, m, weight=g.edges[s, m]["weight"])
        g = g.subgraph(nx.descendants(g, root) | {root}).copy()
        hi = solve_mdp(StitMdp.from_graph(g, acc.gamma), acc.tolerance)
        lo = solve_mdp(StitMdp.from_graph(g, acc.gamma, negate=True), acc.tolerance)
        return ActionInterval(action, -lo.values[root], hi.values[root],
                              max(hi.certified_error, lo.certified_error))

    reach = set(starts)
    for s in starts:
        reach |= nx.descendants(g, s)
    sub = g.subgraph(reach)
    lower = min(w for _, _, w in sub.edges(data="weight"))
    upper = -math.inf
    for t in sorted({w for _, _, w in sub.edges(data="weight")}, reverse=True):
        keep = nx.DiGraph()
        keep.add_nodes_from(sub.nodes)
        keep.add_edges_from((u, v) for u, v, w in sub.edges(data="weight") if w >= t)
        ok = set(starts)
        for s in starts:
            ok |= nx.descendants(keep, s)
        if fair_components(keep, prod.gba, ok):
            upper = t
            break
    return ActionInterval(action, lower, upper, 0.0)


# --------------------------------------------------------------------------
# dominance

def dominates(better: ActionInterval, worse: ActionInterval) -> bool:
    """Strict dominance of interval ``better`` over ``worse`` after widening by certified errors.

    ``worse`` is weakly dominated when every value it can yield is at most every
    value ``better`` can yield; strictness additionally requires that the
    converse fails.
    """
    b_lo, b_hi = better.widened()
    w_lo, w_hi = worse.widened()
    return w_hi <= b_lo and not (b_hi <= w_lo)


def undominated(intervals: Iterable[ActionInterval]) -> set[str]:
    """Actions whose intervals no other interval strictly dominates."""
    ivs = list(intervals)
    if not ivs:
        raise UtilityError("dominance needs at least one interval")
    return {k.action for k in ivs if not any(dominates(o, k) for o in ivs if o is not k)}
