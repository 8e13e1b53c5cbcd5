"""Explicit-state CTL* / LTL model checking.

Path formulas are translated to generalised Büchi automata with the classic
elementary-set (tableau) construction; the product with a transition system
is explored lazily and checked for emptiness through its strongly connected
components.  CTL* state formulas are handled bottom-up: every innermost
``A psi`` / ``E psi`` is decided for all states at once and replaced by a
fresh atom.
"""
from __future__ import annotations

import itertools
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

import networkx as nx

from .formula import (
    TRUE, And, Atom, Always, BoundedAlways, BoundedEventually, Eventually, Exists,
    FalseF, ForAll, Formula, FormulaError, Implies, Next, Not, Or, Release, TrueF, Until,
    expand_bounded, is_deontic, is_state_formula, syntactic_horizon,
)


@dataclass(frozen=True)
class TransitionSystem:
    """Unweighted Kripke structure; ``labels`` maps a state to the atoms true there."""

    states: frozenset[str]
    initial: str
    edges: frozenset[tuple[str, str]]
    labels: Mapping[str, frozenset[str]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        succ: dict[str, list[str]] = {q: [] for q in self.states}
        for a, b in sorted(self.edges):
            succ.setdefault(a, []).append(b)
        object.__setattr__(self, "_succ", succ)

    def __hash__(self):
        return hash((self.states, self.initial, self.edges))

    def successors(self, q: str) -> list[str]:
        return self._succ.get(q, [])

    def label(self, q: str) -> frozenset[str]:
        return self.labels.get(q, frozenset())

    def with_labels(self, extra: Mapping[str, Iterable[str]]) -> "TransitionSystem":
        labels = {q: self.label(q) | frozenset(extra.get(q, ())) for q in self.states}
        return replace(self, labels=labels)

    def dead_ends(self) -> list[str]:
        return sorted(q for q in self.states if not self._succ.get(q))


@dataclass(frozen=True)
class Lasso:
    """Eventually periodic state sequence: prefix followed by cycle repeated forever."""

    prefix: tuple[str, ...]
    cycle: tuple[str, ...]

    def __str__(self) -> str:
        return f"{','.join(self.prefix)} | {','.join(self.cycle)}".strip()

    def states(self, length: int) -> list[str]:
        out = list(self.prefix[:length])
        while len(out) < length:
            out.append(self.cycle[(len(out) - len(self.prefix)) % len(self.cycle)])
        return out

    def rename(self, mapping) -> "Lasso":
        return Lasso(tuple(mapping(q) for q in self.prefix),
                     tuple(mapping(q) for q in self.cycle)).normalized()

    def normalized(self) -> "Lasso":
        """Canonical form: shortest cycle, prefix rolled into the cycle where possible."""
        prefix, cycle = list(self.prefix), list(self.cycle)
        n = len(cycle)
        for k in range(1, n + 1):
            if n % k == 0 and cycle == cycle[:k] * (n // k):
                cycle = cycle[:k]
                break
        while prefix and prefix[-1] == cycle[-1]:
            cycle = [prefix.pop()] + cycle[:-1]
        return Lasso(tuple(prefix), tuple(cycle))


# --------------------------------------------------------------------------
# LTL core and generalised Büchi automata

def to_core(f: Formula) -> Formula:
    """Rewrite into the core {atom, true, not, and, X, U}."""
    match f:
        case Atom() | TrueF():
            return f
        case FalseF():
            return Not(TRUE)
        case Not(a):
            inner = to_core(a)
            return inner.arg if isinstance(inner, Not) else Not(inner)
        case And(a, b):
            return And(to_core(a), to_core(b))
        case Or(a, b):
            return to_core(Not(And(Not(a), Not(b))))
        case Implies(a, b):
            return to_core(Not(And(a, Not(b))))
        case Next(a):
            return Next(to_core(a))
        case Until(a, b):
            return Until(to_core(a), to_core(b))
        case Release(a, b):
            return to_core(Not(Until(Not(a), Not(b))))
        case Eventually(a):
            return Until(TRUE, to_core(a))
        case Always(a):
            return to_core(Not(Until(TRUE, Not(a))))
        case BoundedEventually() | BoundedAlways():
            return to_core(expand_bounded(f))
    raise FormulaError(f"not a quantifier-free path formula: {f}")


def _closure(f: Formula) -> list[Formula]:
    seen: dict[Formula, None] = {}

    def walk(g: Formula):
        for c in g.children:
            walk(c)
        seen.setdefault(g, None)

    walk(f)
    return list(seen)  # children before parents


class Gba:
    """Generalised Büchi automaton of a core LTL formula, built from elementary sets.

    An elementary set is identified by an integer; it fixes the truth value of
    every closure formula.  The alphabet letter read by a set is the
    valuation of the formula's atoms it contains.
    """

    def __init__(self, formula: Formula):
        self.formula = formula
        self.closure = _closure(formula)
        self.atoms = sorted({g.name for g in self.closure if isinstance(g, Atom)})
        self.nexts = [g for g in self.closure if isinstance(g, Next)]
        self.untils = [g for g in self.closure if isinstance(g, Until)]
        self._by_letter: dict[frozenset[str], list[int]] = {}
        self.values: list[dict[Formula, bool]] = []
        self.constraints: list[tuple[tuple[Formula, bool], ...]] = []
        self._acc_members: list[set[int]] = [set() for _ in self.untils]
        self._lock = threading.Lock()

    def _evaluate(self, letter: frozenset[str], basis: dict[Formula, bool]) -> Optional[dict[Formula, bool]]:
        val: dict[Formula, bool] = {}
        for g in self.closure:
            match g:
                case Atom(name):
                    val[g] = name in letter
                case TrueF():
                    val[g] = True
                case Not(a):
                    val[g] = not val[a]
                case And(a, b):
                    val[g] = val[a] and val[b]
                case Next() | Until():
                    val[g] = basis[g]
        for u in self.untils:
            if val[u.right] and not val[u]:
                return None
            if val[u] and not val[u.right] and not val[u.left]:
                return None
        return val

    def sets_for(self, label: Iterable[str]) -> list[int]:
        """Elementary sets whose letter agrees with the given state label."""
        letter = frozenset(label) & frozenset(self.atoms)
        ids = self._by_letter.get(letter)
        if ids is not None:
            return ids
        with self._lock:
            return self._materialise(letter)

    def _materialise(self, letter: frozenset[str]) -> list[int]:
        if letter in self._by_letter:
            return self._by_letter[letter]
        ids = []
        temporal = self.nexts + self.untils
        for bits in itertools.product((False, True), repeat=len(temporal)):
            val = self._evaluate(letter, dict(zip(temporal, bits)))
            if val is None:
                continue
            i = len(self.values)
            self.values.append(val)
            cons: list[tuple[Formula, bool]] = [(x.arg, val[x]) for x in self.nexts]
            for j, u in enumerate(self.untils):
                if not val[u.right]:
                    if val[u]:
                        cons.append((u, True))
                    elif val[u.left]:
                        cons.append((u, False))
                if not val[u] or val[u.right]:
                    self._acc_members[j].add(i)
            self.constraints.append(tuple(cons))
            ids.append(i)
        self._by_letter[letter] = ids
        return ids

    def holds(self, b: int, g: Formula) -> bool:
        return self.values[b][g]

    def step_ok(self, b: int, b2: int) -> bool:
        v2 = self.values[b2]
        return all(v2[g] == want for g, want in self.constraints[b])

    def in_acceptance(self, j: int, b: int) -> bool:
        return b in self._acc_members[j]

    @property
    def n_sets(self) -> int:
        return len(self.values)


@lru_cache(maxsize=512)
def translate(f: Formula) -> Gba:
    """Generalised Büchi automaton for a quantifier-free path formula (memoised).

    Elementary sets are materialised lazily per letter under a lock, so a
    cached automaton may be shared between concurrent checks.
    """
    return Gba(to_core(f))


Node = tuple[str, int]


class Product:
    """Reachable part of the product of a transition system with a formula automaton.

    ``roots`` are the transition-system states whose initial product nodes
    (elementary sets containing the formula) seed the exploration.
    """

    def __init__(self, ts: TransitionSystem, f: Formula, roots: Iterable[str]):
        self.ts = ts
        self.gba = translate(f)
        self.graph = nx.DiGraph()
        self.initial: dict[str, list[Node]] = {}
        queue: deque[Node] = deque()
        for q in sorted(roots):
            nodes = [(q, b) for b in self.gba.sets_for(ts.label(q)) if self.gba.holds(b, self.gba.formula)]
            self.initial[q] = nodes
            for n in nodes:
                if n not in self.graph:
                    self.graph.add_node(n)
                    queue.append(n)
        while queue:
            node = queue.popleft()
            q, b = node
            for q2 in ts.successors(q):
                for b2 in self.gba.sets_for(ts.label(q2)):
                    if self.gba.step_ok(b, b2):
                        n2 = (q2, b2)
                        if n2 not in self.graph:
                            self.graph.add_node(n2)
                            queue.append(n2)
                        self.graph.add_edge(node, n2)
        self._fair: Optional[list[set[Node]]] = None
        self._live: Optional[set[Node]] = None

    def fair_sccs(self) -> list[set[Node]]:
        if self._fair is None:
            self._fair = fair_components(self.graph, self.gba)
        return self._fair

    def live(self) -> set[Node]:
        """Nodes from which some accepting run starts."""
        if self._live is None:
            live: set[Node] = set()
            for comp in self.fair_sccs():
                live |= comp
            for n in list(live):
                live |= nx.ancestors(self.graph, n)
            self._live = live
        return self._live

    def satisfiable_from(self, q: str) -> bool:
        live = self.live()
        return any(n in live for n in self.initial.get(q, ()))

    def witness(self, q: str) -> Optional[Lasso]:
        starts = [n for n in self.initial.get(q, ()) if n in self.live()]
        if not starts:
            return None
        return _extract_lasso(self.graph, starts, self.fair_sccs(), self.gba)

    @property
    def stats(self) -> dict:
        return {"product_nodes": self.graph.number_of_nodes(),
                "product_edges": self.graph.number_of_edges(),
                "automaton_sets": self.gba.n_sets}


def fair_components(graph: nx.DiGraph, gba: Gba, nodes=None) -> list[set[Node]]:
    """Non-trivial SCCs meeting every acceptance set."""
    g = graph if nodes is None else graph.subgraph(nodes)
    out = []
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1:
            (n,) = comp
            if not g.has_edge(n, n):
                continue
        if all(any(gba.in_acceptance(j, b) for (_, b) in comp) for j in range(len(gba.untils))):
            out.append(comp)
    return out


def _bfs_path(graph: nx.DiGraph, sources: Sequence[Node], goal, allowed=None) -> list[Node]:
    """Shortest path from any source to a goal node (zero edges if a source is a goal)."""
    parent: dict[Node, Optional[Node]] = {s: None for s in sources}
    queue = deque(sources)
    while queue:
        n = queue.popleft()
        if goal(n):
            path = [n]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for m in sorted(graph.successors(n)):
            if m not in parent and (allowed is None or m in allowed):
                parent[m] = n
                queue.append(m)
    raise AssertionError("no path found in product graph")


def _extract_lasso(graph: nx.DiGraph, starts: list[Node], fair: list[set[Node]], gba: Gba) -> Lasso:
    fair_nodes = set().union(*fair)
    comp_of = {n: i for i, c in enumerate(fair) for n in c}
    stem = _bfs_path(graph, sorted(starts), lambda n: n in fair_nodes)
    anchor = stem[-1]
    comp = fair[comp_of[anchor]]
    cycle = [anchor]
    at = anchor
    for j in range(len(gba.untils)):
        hop = _bfs_path(graph, [at], lambda n, j=j: gba.in_acceptance(j, n[1]), comp)
        cycle.extend(hop[1:])
        at = cycle[-1]
    # close the cycle with at least one edge
    succs = [m for m in sorted(graph.successors(at)) if m in comp]
    back = _bfs_path(graph, succs, lambda n: n == anchor, comp)
    cycle.extend(back)
    nodes_prefix = stem[:-1]
    nodes_cycle = cycle[:-1]
    return Lasso(tuple(q for q, _ in nodes_prefix), tuple(q for q, _ in nodes_cycle)).normalized()


# --------------------------------------------------------------------------
# CTL*

class _Fresh:
    def __init__(self):
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"$s{self.n}"


def atomize(ts: TransitionSystem, f: Formula, fresh=None) -> tuple[Formula, dict[str, set[str]]]:
    """Replace every quantified subformula by a fresh atom.

    Returns the quantifier-free formula and the extra labels (state → fresh
    atoms true there) that make it equivalent on ``ts``.
    """
    fresh = fresh or _Fresh()
    extra: dict[str, set[str]] = {q: set() for q in ts.states}

    def go(g: Formula) -> Formula:
        if is_deontic(g):
            raise FormulaError(f"deontic operator inside temporal formula: {g}")
        if isinstance(g, (ForAll, Exists)):
            inner = go(g.arg)
            local = ts.with_labels(extra)
            target = inner if isinstance(g, Exists) else Not(inner)
            prod = Product(local, target, local.states)
            sat = {q for q in local.states if prod.satisfiable_from(q)}
            if isinstance(g, ForAll):
                sat = set(local.states) - sat
            name = fresh()
            for q in sat:
                extra[q].add(name)
            return Atom(name)
        kids = tuple(go(c) for c in g.children)
        if not kids:
            return g
        if isinstance(g, (BoundedEventually, BoundedAlways)):
            return type(g)(g.bound, kids[0])
        return type(g)(*kids)

    out = go(f)
    return out, {q: v for q, v in extra.items() if v}


def _eval_propositional(f: Formula, label: frozenset[str]) -> bool:
    match f:
        case Atom(name):
            return name in label
        case TrueF():
            return True
        case FalseF():
            return False
        case Not(a):
            return not _eval_propositional(a, label)
        case And(a, b):
            return _eval_propositional(a, label) and _eval_propositional(b, label)
        case Or(a, b):
            return _eval_propositional(a, label) or _eval_propositional(b, label)
        case Implies(a, b):
            return (not _eval_propositional(a, label)) or _eval_propositional(b, label)
    raise FormulaError(f"not a state formula: {f}")


def check_state(ts: TransitionSystem, f: Formula) -> set[str]:
    """States of ts satisfying the CTL* state formula f."""
    if not is_state_formula(f):
        raise FormulaError(f"not a state formula: {f}")
    flat, extra = atomize(ts, f)
    local = ts.with_labels(extra)
    return {q for q in ts.states if _eval_propositional(flat, local.label(q))}


@dataclass(frozen=True)
class PathResult:
    holds: bool
    lasso: Optional[Lasso] = None
    stats: dict = field(default_factory=dict, compare=False)

    def __bool__(self) -> bool:
        return self.holds


def check_existential_path(ts: TransitionSystem, q: str, psi: Formula,
                           extra_labels: Optional[Mapping[str, Iterable[str]]] = None) -> PathResult:
    """Is there an infinite path from q satisfying psi?  Witness lasso on success.

    ``extra_labels`` lets a caller supply pre-computed truth sets for
    atomised state subformulas (see :func:`atomize`).
    """
    if q not in ts.states:
        raise ValueError(f"unknown state {q!r}")
    if extra_labels is None:
        flat, extra = atomize(ts, psi)
    else:
        flat, extra = psi, extra_labels
    local = ts.with_labels(extra)
    prod = Product(local, flat, [q])
    lasso = prod.witness(q)
    return PathResult(lasso is not None, lasso, prod.stats)


def check_universal_path(ts: TransitionSystem, q: str, psi: Formula,
                         extra_labels: Optional[Mapping[str, Iterable[str]]] = None) -> PathResult:
    """Do all infinite paths from q satisfy psi?  Counterexample lasso when not."""
    if extra_labels is None:
        flat, extra = atomize(ts, psi)
    else:
        flat, extra = psi, extra_labels
    res = check_existential_path(ts, q, Not(flat), extra)
    return PathResult(not res.holds, res.lasso, res.stats)


# --------------------------------------------------------------------------
# direct evaluation on finite traces and lassos

def eval_finite_trace(psi: Formula, trace: Sequence[Iterable[str]]) -> bool:
    """Verdict of a bounded-horizon path formula on a trace prefix long enough to decide it."""
    h = syntactic_horizon(psi)
    if h is None:
        raise FormulaError(f"formula has no finite horizon: {psi}")
    if len(trace) < h + 1:
        raise FormulaError(f"trace of length {len(trace)} too short for horizon {h}")
    labels = [frozenset(x) for x in trace]

    def ev(g: Formula, i: int) -> bool:
        match g:
            case Atom(name):
                return name in labels[i]
            case TrueF():
                return True
            case FalseF():
                return False
            case Not(a):
                return not ev(a, i)
            case And(a, b):
                return ev(a, i) and ev(b, i)
            case Or(a, b):
                return ev(a, i) or ev(b, i)
            case Implies(a, b):
                return (not ev(a, i)) or ev(b, i)
            case Next(a):
                return ev(a, i + 1)
            case BoundedEventually(n, a):
                return any(ev(a, i + k) for k in range(n + 1))
            case BoundedAlways(n, a):
                return all(ev(a, i + k) for k in range(n + 1))
        raise FormulaError(f"unsupported operator in bounded formula: {g}")

    return ev(psi, 0)


def _least(va: list[bool], vb: list[bool], succ: list[int]) -> list[bool]:
    """Least fixpoint of  x = b or (a and X x)  on a lasso."""
    out = [False] * len(va)
    for _ in range(len(va) + 1):
        out = [vb[i] or (va[i] and out[succ[i]]) for i in range(len(va))]
    return out


def _greatest(va: list[bool], vb: list[bool], succ: list[int]) -> list[bool]:
    """Greatest fixpoint of  x = b and (a or X x)  on a lasso."""
    out = [True] * len(va)
    for _ in range(len(va) + 1):
        out = [vb[i] and (va[i] or out[succ[i]]) for i in range(len(va))]
    return out


def eval_lasso(psi: Formula, prefix: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> bool:
    """Truth of a quantifier-free path formula on the word prefix · cycle^ω."""
    if not cycle:
        raise ValueError("lasso cycle must be non-empty")
    labels = [frozenset(x) for x in prefix] + [frozenset(x) for x in cycle]
    n = len(labels)
    loop = len(prefix)
    succ = [i + 1 if i + 1 < n else loop for i in range(n)]
    memo: dict[Formula, list[bool]] = {}

    def ev(g: Formula) -> list[bool]:
        if g in memo:
            return memo[g]
        match g:
            case Atom(name):
                out = [name in lab for lab in labels]
            case TrueF():
                out = [True] * n
            case FalseF():
                out = [False] * n
            case Not(a):
                out = [not v for v in ev(a)]
            case And(a, b):
                out = [x and y for x, y in zip(ev(a), ev(b))]
            case Or(a, b):
                out = [x or y for x, y in zip(ev(a), ev(b))]
            case Implies(a, b):
                out = [(not x) or y for x, y in zip(ev(a), ev(b))]
            case Next(a):
                va = ev(a)
                out = [va[succ[i]] for i in range(n)]
            case Until(a, b):
                out = _least(ev(a), ev(b), succ)
            case Eventually(b):
                out = _least([True] * n, ev(b), succ)
            case Release(a, b):
                out = _greatest(ev(a), ev(b), succ)
            case Always(b):
                out = _greatest([False] * n, ev(b), succ)
            case BoundedEventually() | BoundedAlways():
                out = ev(expand_bounded(g))
            case _:
                raise FormulaError(f"unsupported operator on lasso: {g}")
        memo[g] = out
        return out

    return ev(psi)[0]
