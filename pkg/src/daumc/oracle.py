"""Brute-force DAU semantics on explicit finite stit trees.

Histories are identified with the leaves of the tree and handled as integer
bitmasks, so a proposition |A|_m is a mask over the leaves below m.  Each
formula is evaluated to a pair ``(true_mask, false_mask)``; the two masks
are complementary inside H_m except under the ``open`` leaf semantics, where
temporal operators looking past a leaf are Unknown (Kleene logic).

Under the default ``stutter`` leaf semantics a leaf moment repeats forever,
which is exact for trees unrolled from automata whose frontier states are
absorbing.
"""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .automaton import Min, StitAutomaton
from .formula import (
    TRUE, And, Atom, Always, BoundedAlways, BoundedEventually, ConditionalOught, ConditionalPerm,
    Cstit, DauNext, Dstit, Eventually, Exists, FalseF, ForAll, Formula, Implies, Next, Not, Or,
    Ought, Perm, Release, TookOptimal, TrueF, Until, parse_formula,
)

Tri = tuple[int, int]  # (true mask, false mask)


class OracleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ExplicitStitModel:
    """Finite tree of moments with per-agent choice partitions and history values.

    ``choices[(agent, moment)]`` maps action names to the histories (leaf
    ids) they contain.  Agents without a declared choice at a moment have a
    single vacuous action.  ``macros`` define derived atoms by formulas.
    """

    moments: tuple[str, ...]
    parent: Mapping[str, Optional[str]]
    labels: Mapping[str, frozenset[str]]
    agents: tuple[str, ...]
    choices: Mapping[tuple[str, str], Mapping[str, frozenset[str]]]
    values: Mapping[str, float]
    macros: Mapping[str, Formula] = field(default_factory=dict)
    leaf_mode: str = "stutter"
    state_of: Mapping[str, str] = field(default_factory=dict)
    approximate: bool = False

    # ---- structure -------------------------------------------------------
    @cached_property
    def root(self) -> str:
        roots = [m for m in self.moments if self.parent.get(m) is None]
        if len(roots) != 1:
            raise OracleError(f"tree must have exactly one root, found {roots}")
        return roots[0]

    @cached_property
    def children(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {m: [] for m in self.moments}
        for m in self.moments:
            p = self.parent.get(m)
            if p is not None:
                out[p].append(m)
        return out

    @cached_property
    def leaves(self) -> tuple[str, ...]:
        return tuple(m for m in self.moments if not self.children[m])

    @cached_property
    def leaf_bit(self) -> dict[str, int]:
        return {h: 1 << i for i, h in enumerate(self.leaves)}

    @cached_property
    def hmask(self) -> dict[str, int]:
        out: dict[str, int] = {}

        def go(m: str) -> int:
            mask = self.leaf_bit.get(m, 0)
            for c in self.children[m]:
                mask |= go(c)
            out[m] = mask
            return mask

        go(self.root)
        return out

    @cached_property
    def depth_of(self) -> dict[str, int]:
        out = {self.root: 0}
        stack = [self.root]
        while stack:
            m = stack.pop()
            for c in self.children[m]:
                out[c] = out[m] + 1
                stack.append(c)
        return out

    @property
    def depth(self) -> int:
        return max(self.depth_of[h] for h in self.leaves)

    def histories(self, m: Optional[str] = None) -> list[str]:
        mask = self.hmask[self.root if m is None else m]
        return [h for h in self.leaves if self.leaf_bit[h] & mask]

    def mask_of(self, hs: Iterable[str]) -> int:
        mask = 0
        for h in hs:
            mask |= self.leaf_bit[h]
        return mask

    def names_of(self, mask: int) -> set[str]:
        return {h for h in self.leaves if self.leaf_bit[h] & mask}

    def cells(self, agent: str, m: str) -> dict[str, int]:
        """Action name -> history mask of ``agent``'s choice at ``m``."""
        acts = self.choices.get((agent, m))
        if not acts:
            return {"_": self.hmask[m]}
        return {k: self.mask_of(v) for k, v in acts.items()}

    def next_moment(self, m: str, h: str) -> str:
        bit = self.leaf_bit[h]
        for c in self.children[m]:
            if self.hmask[c] & bit:
                return c
        return m  # a leaf is its own successor

    def value_max(self, mask: int) -> float:
        return max(self.values[h] for h in self.leaves if self.leaf_bit[h] & mask)

    def value_min(self, mask: int) -> float:
        return min(self.values[h] for h in self.leaves if self.leaf_bit[h] & mask)


@dataclass(frozen=True)
class Index:
    moment: str
    history: str

    def __str__(self) -> str:
        return f"{self.moment}/{self.history}"

    @classmethod
    def parse(cls, text: str) -> "Index":
        m, sep, h = text.partition("/")
        if not sep or not m or not h:
            raise OracleError(f"index must look like MOMENT/HISTORY, got {text!r}")
        return cls(m.strip(), h.strip())


# --------------------------------------------------------------------------
# validation

def validate_model(M: ExplicitStitModel) -> list[str]:
    diags: list[str] = []
    try:
        M.root
    except OracleError as exc:
        return [str(exc)]
    for m in M.moments:
        p = M.parent.get(m)
        if p is not None and p not in M.parent:
            diags.append(f"moment {m} has unknown parent {p}")
    if len(M.depth_of) != len(M.moments):
        diags.append("some moments are not connected to the root")
        return diags
    depths = {M.depth_of[h] for h in M.leaves}
    if len(depths) > 1:
        diags.append(f"leaves have different depths {sorted(depths)}")
    for h in M.leaves:
        if h not in M.values:
            diags.append(f"history {h} has no value")
    for (agent, m), acts in sorted(M.choices.items()):
        if agent not in M.agents:
            diags.append(f"choice for unknown agent {agent} at {m}")
            continue
        if m not in M.hmask:
            diags.append(f"choice at unknown moment {m}")
            continue
        hm = M.hmask[m]
        seen = 0
        for name, hs in sorted(acts.items()):
            unknown = [h for h in hs if h not in M.leaf_bit]
            if unknown:
                diags.append(f"action {name} of {agent} at {m} names unknown histories {unknown}")
                continue
            mask = M.mask_of(hs)
            if not mask:
                diags.append(f"action {name} of {agent} at {m} is empty")
            if mask & ~hm:
                diags.append(f"action {name} of {agent} at {m} contains histories not through {m}")
            if mask & seen:
                diags.append(f"actions of {agent} at {m} overlap (disjointness violation)")
            seen |= mask
        if seen & hm != hm:
            diags.append(f"actions of {agent} at {m} do not cover H_{m} (coverage violation at {m})")
        for c in M.children[m]:
            hit = [n for n, hs in acts.items() if M.mask_of(h for h in hs if h in M.leaf_bit) & M.hmask[c]]
            if len(hit) > 1:
                diags.append(f"histories through {c} are split by {agent}'s actions at {m} "
                             "(choice between undivided histories)")
    for m in M.moments:
        if not M.children[m] or len(M.agents) < 2:
            continue
        per_agent = [list(M.cells(a, m).items()) for a in M.agents]
        for combo in itertools.product(*per_agent):
            mask = M.hmask[m]
            for _, cell in combo:
                mask &= cell
            if not mask:
                names = ", ".join(f"{a}:{k}" for a, (k, _) in zip(M.agents, combo))
                diags.append(f"independence violation at {m}: {names} have empty intersection")
    return diags


# --------------------------------------------------------------------------
# dominance

def _leq(M: ExplicitStitModel, Z: int, Y: int) -> bool:
    if not Z or not Y:
        return True
    return M.value_max(Z) <= M.value_min(Y)


def _background(M: ExplicitStitModel, agent: str, m: str) -> list[int]:
    others = [a for a in M.agents if a != agent]
    if not others:
        return [M.hmask[m]]
    out = []
    for combo in itertools.product(*[M.cells(a, m).values() for a in others]):
        mask = M.hmask[m]
        for c in combo:
            mask &= c
        out.append(mask)
    return out


def _optimal_masks(M: ExplicitStitModel, agent: str, m: str, X: Optional[int] = None) -> dict[str, int]:
    cells = M.cells(agent, m)
    states = _background(M, agent, m)
    if X is not None:
        cells = {k: v for k, v in cells.items() if v & X}
        states = [s & X for s in states]

    def weak(K: int, K2: int) -> bool:
        return all(_leq(M, K & S, K2 & S) for S in states)

    out = {}
    for k, K in cells.items():
        if not any(weak(K, K2) and not weak(K2, K) for k2, K2 in cells.items() if k2 != k):
            out[k] = K
    return out


def optimal_actions(M: ExplicitStitModel, agent: str, m: str) -> set[str]:
    """Actions of ``agent`` at ``m`` not strictly dominated under sure-thing reasoning."""
    return set(_optimal_masks(M, agent, m))


def conditional_optimal(M: ExplicitStitModel, agent: str, m: str, X: Iterable[str]) -> set[str]:
    """Optimal actions among those compatible with the history set X, comparing only X-histories."""
    return set(_optimal_masks(M, agent, m, M.mask_of(X)))


# --------------------------------------------------------------------------
# evaluation

class _Evaluator:
    def __init__(self, M: ExplicitStitModel):
        self.M = M
        self.memo: dict[tuple[Formula, str], Tri] = {}
        self.opt: dict[tuple[str, str, Optional[int]], list[int]] = {}

    def optimal(self, agent: str, m: str, X: Optional[int] = None) -> list[int]:
        key = (agent, m, X)
        if key not in self.opt:
            self.opt[key] = list(_optimal_masks(self.M, agent, m, X).values())
        return self.opt[key]

    def next_tri(self, f: Formula, m: str) -> Tri:
        kids = self.M.children[m]
        if not kids:
            return self.ev(f, m) if self.M.leaf_mode == "stutter" else (0, 0)
        t = fl = 0
        for c in kids:
            a, b = self.ev(f, c)
            t |= a
            fl |= b
        return t, fl

    def ev(self, f: Formula, m: str) -> Tri:
        key = (f, m)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        out = self._ev(f, m)
        self.memo[key] = out
        return out

    def _ev(self, f: Formula, m: str) -> Tri:
        M = self.M
        hm = M.hmask[m]
        leaf = not M.children[m]
        stutter = M.leaf_mode == "stutter"
        match f:
            case Atom(name):
                if name in M.macros:
                    return self.ev(M.macros[name], m)
                return (hm, 0) if name in M.labels.get(m, ()) else (0, hm)
            case TrueF():
                return hm, 0
            case FalseF():
                return 0, hm
            case Not(a):
                t, fl = self.ev(a, m)
                return fl, t
            case And(a, b):
                (t1, f1), (t2, f2) = self.ev(a, m), self.ev(b, m)
                return t1 & t2, f1 | f2
            case Or(a, b):
                (t1, f1), (t2, f2) = self.ev(a, m), self.ev(b, m)
                return t1 | t2, f1 & f2
            case Implies(a, b):
                (t1, f1), (t2, f2) = self.ev(a, m), self.ev(b, m)
                return f1 | t2, t1 & f2
            case Next(a) | DauNext(a):
                return self.next_tri(a, m)
            case BoundedEventually(n, a):
                if n == 0:
                    return self.ev(a, m)
                return self.ev(Or(a, Next(BoundedEventually(n - 1, a))), m)
            case BoundedAlways(n, a):
                if n == 0:
                    return self.ev(a, m)
                return self.ev(And(a, Next(BoundedAlways(n - 1, a))), m)
            case Eventually(a):
                return self.ev(Until(TRUE, a), m)
            case Always(a):
                return self.ev(Release(FalseF(), a), m)
            case Until(a, b):
                (ta, fa), (tb, fb) = self.ev(a, m), self.ev(b, m)
                if leaf:
                    return (tb, fb) if stutter else (tb, fb & fa)
                tn, fn = self.next_tri(f, m)
                return tb | (ta & tn), fb & (fa | fn)
            case Release(a, b):
                (ta, fa), (tb, fb) = self.ev(a, m), self.ev(b, m)
                if leaf:
                    return (tb, fb) if stutter else (tb & ta, fb)
                tn, fn = self.next_tri(f, m)
                return tb & (ta | tn), fb | (fa & fn)
            case ForAll(a):
                t, fl = self.ev(a, m)
                if t == hm:
                    return hm, 0
                return (0, hm) if fl else (0, 0)
            case Exists(a):
                t, fl = self.ev(a, m)
                if t:
                    return hm, 0
                return (0, hm) if fl == hm else (0, 0)
            case Cstit(agent, a):
                return self._cstit(agent, a, m)
            case Dstit(agent, a):
                ct, cf = self._cstit(agent, a, m)
                t, fl = self.ev(a, m)
                nt, nf = (hm, 0) if fl else ((0, hm) if t == hm else (0, 0))
                return ct & nt, cf | nf
            case Ought(agent, a):
                return self._ought(self.optimal(agent, m), a, m)
            case ConditionalOught(agent, a, b):
                bt, bf = self.ev(b, m)
                if bt | bf != hm:
                    return 0, 0
                return self._ought(self.optimal(agent, m, bt), a, m)
            case Perm(agent, a):
                return self.ev(Not(Ought(agent, Not(a))), m)
            case ConditionalPerm(agent, a, b):
                return self.ev(Not(ConditionalOught(agent, Not(a), b)), m)
            case TookOptimal(agent):
                t = 0
                for K in self.optimal(agent, m):
                    t |= K
                return t, hm & ~t
        raise OracleError(f"cannot evaluate {f}")

    def _cstit(self, agent: str, a: Formula, m: str) -> Tri:
        t, fl = self.ev(a, m)
        ot = of = 0
        for K in self.M.cells(agent, m).values():
            if K & ~t == 0:
                ot |= K
            elif K & fl:
                of |= K
        return ot, of

    def _ought(self, optimal: list[int], a: Formula, m: str) -> Tri:
        hm = self.M.hmask[m]
        t, fl = self.ev(a, m)
        if all(K & ~t == 0 for K in optimal):
            return hm, 0
        if any(K & fl for K in optimal):
            return 0, hm
        return 0, 0


def _evaluator(M: ExplicitStitModel) -> _Evaluator:
    ev = M.__dict__.get("_evaluator")
    if ev is None:
        ev = _Evaluator(M)
        M.__dict__["_evaluator"] = ev
    return ev


def _as_formula(f: Union[Formula, str]) -> Formula:
    return parse_formula(f) if isinstance(f, str) else f


def _check_index(M: ExplicitStitModel, i: Index) -> None:
    if i.moment not in M.hmask:
        raise OracleError(f"unknown moment {i.moment!r}")
    if i.history not in M.leaf_bit:
        raise OracleError(f"unknown history {i.history!r}")
    if not M.hmask[i.moment] & M.leaf_bit[i.history]:
        raise OracleError(f"history {i.history} does not pass through moment {i.moment}")


def proposition(M: ExplicitStitModel, m: str, f: Union[Formula, str]) -> set[str]:
    """|f|_m: histories through m at which f is (definitely) true."""
    t, _ = _evaluator(M).ev(_as_formula(f), m)
    return M.names_of(t)


def eval3(M: ExplicitStitModel, i: Index, f: Union[Formula, str]) -> Optional[bool]:
    """Three-valued truth at an index: None when truncation leaves it undetermined."""
    _check_index(M, i)
    t, fl = _evaluator(M).ev(_as_formula(f), i.moment)
    bit = M.leaf_bit[i.history]
    if t & bit:
        return True
    if fl & bit:
        return False
    return None


def eval(M: ExplicitStitModel, i: Index, f: Union[Formula, str]) -> bool:  # noqa: A001
    """Truth of f at index m/h; raises if the truncated tree cannot decide it."""
    v = eval3(M, i, f)
    if v is None:
        raise OracleError(f"formula undetermined at {i} (tree truncated)")
    return v


def indices(M: ExplicitStitModel) -> list[Index]:
    return [Index(m, h) for m in M.moments for h in M.histories(m)]


# --------------------------------------------------------------------------
# serialisation

def model_from_dict(d: Mapping) -> ExplicitStitModel:
    try:
        moments = tuple(x["id"] for x in d["moments"])
        parent = {x["id"]: x.get("parent") for x in d["moments"]}
        labels = {x["id"]: frozenset(x.get("atoms", ())) for x in d["moments"]}
        children: dict[str, list[str]] = {m: [] for m in moments}
        for m, p in parent.items():
            if p is not None and p in children:
                children[p].append(m)

        def leaves_under(m: str) -> list[str]:
            if m not in children:
                raise OracleError(f"choice refers to unknown moment {m!r}")
            if not children[m]:
                return [m]
            return [h for c in children[m] for h in leaves_under(c)]

        choices = {}
        for c in d.get("choices", []):
            acts = {name: frozenset(h for x in ids for h in leaves_under(x))
                    for name, ids in c["actions"].items()}
            choices[(c["agent"], c["moment"])] = acts
        return ExplicitStitModel(
            moments=moments,
            parent=parent,
            labels=labels,
            agents=tuple(d.get("agents", ["alpha"])),
            choices=choices,
            values={k: float(v) for k, v in d["values"].items()},
            macros={k: parse_formula(v) for k, v in d.get("macros", {}).items()},
            leaf_mode=d.get("leaf_mode", "stutter"),
        )
    except (KeyError, TypeError) as exc:
        raise OracleError(f"malformed explicit model: missing or bad field {exc}") from exc


def model_to_dict(M: ExplicitStitModel) -> dict:
    from .formula import to_text

    return {
        "agents": list(M.agents),
        "moments": [{"id": m, "parent": M.parent.get(m), "atoms": sorted(M.labels.get(m, ()))}
                    for m in M.moments],
        "choices": [{"agent": a, "moment": m, "actions": {k: sorted(v) for k, v in sorted(acts.items())}}
                    for (a, m), acts in sorted(M.choices.items())],
        "values": {h: M.values[h] for h in M.leaves},
        "macros": {k: to_text(v) for k, v in sorted(M.macros.items())},
        "leaf_mode": M.leaf_mode,
    }


def load_model(path: Union[str, Path]) -> ExplicitStitModel:
    with open(path, encoding="utf-8") as fh:
        try:
            return model_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise OracleError(f"{path}: invalid JSON: {exc}") from exc


# --------------------------------------------------------------------------
# unrolling automata

EXACT_IF_ABSORBING = "ExactIfAbsorbing"
PARTIAL_WITH_BOUNDS = "PartialWithBounds"


def _absorbing_weight(T: StitAutomaton, q: str) -> Optional[float]:
    out = T.outgoing(q)
    if len(out) == 1 and out[0].target == q:
        return out[0].weight
    return None


def unroll(T: StitAutomaton, depth: int, value_mode: str = EXACT_IF_ABSORBING) -> ExplicitStitModel:
    """Single-agent tree of all depth-``depth`` execution prefixes of T.

    One moment per transition occurrence; the agent's choice at a moment
    groups children by action; moment labels are the state labels.  With
    ``ExactIfAbsorbing`` every frontier state must be absorbing, so each
    leaf stands for exactly one infinite execution and its value is exact
    (the absorbing tail is summed in closed form).  ``PartialWithBounds``
    uses the value of the finite prefix and Unknown beyond the leaves.
    """
    if depth < 0:
        raise OracleError("depth must be non-negative")
    if value_mode not in (EXACT_IF_ABSORBING, PARTIAL_WITH_BOUNDS):
        raise OracleError(f"unknown value mode {value_mode!r}")
    agent = T.agent
    moments: list[str] = []
    parent: dict[str, Optional[str]] = {}
    labels: dict[str, frozenset[str]] = {}
    state_of: dict[str, str] = {}
    choices: dict[tuple[str, str], dict[str, set[str]]] = {}
    values: dict[str, float] = {}

    def build(name: str, q: str, par: Optional[str], level: int, weights: list[float]) -> list[str]:
        moments.append(name)
        parent[name] = par
        labels[name] = T.label(q)
        state_of[name] = q
        if level == depth:
            values[name] = _leaf_value(T, q, weights, value_mode)
            return [name]
        acts: dict[str, set[str]] = {}
        hs: list[str] = []
        for i, t in enumerate(T.outgoing(q)):
            sub = build(f"{name}.{i}", t.target, name, level + 1, weights + [t.weight])
            acts.setdefault(t.action, set()).update(sub)
            hs.extend(sub)
        choices[(agent, name)] = acts
        return hs

    build("r", T.initial, None, 0, [])
    return ExplicitStitModel(
        moments=tuple(moments),
        parent=parent,
        labels=labels,
        agents=(agent,),
        choices={k: {a: frozenset(v) for a, v in acts.items()} for k, acts in choices.items()},
        values=values,
        leaf_mode="stutter" if value_mode == EXACT_IF_ABSORBING else "open",
        state_of=state_of,
        approximate=value_mode == PARTIAL_WITH_BOUNDS,
    )


def _leaf_value(T: StitAutomaton, q: str, weights: list[float], mode: str) -> float:
    acc = T.accumulation
    if mode == PARTIAL_WITH_BOUNDS:
        if isinstance(acc, Min):
            return min(weights) if weights else 0.0
        return sum(w * acc.gamma ** i for i, w in enumerate(weights))
    w_abs = _absorbing_weight(T, q)
    if w_abs is None:
        raise OracleError(f"frontier state {q} is not absorbing; unroll deeper or use {PARTIAL_WITH_BOUNDS}")
    if isinstance(acc, Min):
        return min(weights + [w_abs])
    g = acc.gamma
    n = len(weights)
    return sum(w * g ** i for i, w in enumerate(weights)) + g ** n * w_abs / (1 - g)


# --------------------------------------------------------------------------
# random models

@dataclass(frozen=True)
class RandomParams:
    depth: int = 2
    branching: int = 2
    agents: int = 1
    atoms: int = 2
    value_range: tuple[int, int] = (0, 4)
    atom_probability: float = 0.5


def random_model(params: RandomParams, seed: int) -> ExplicitStitModel:
    """Random valid model; multi-agent choices are laid out as a product grid of children."""
    rng = random.Random(seed)
    agents = tuple(["alpha", "beta", "gamma", "delta"][: params.agents])
    atom_names = [f"p{i}" for i in range(params.atoms)]
    moments: list[str] = []
    parent: dict[str, Optional[str]] = {}
    labels: dict[str, frozenset[str]] = {}
    choices: dict[tuple[str, str], dict[str, frozenset[str]]] = {}
    values: dict[str, float] = {}
    lo, hi = params.value_range

    def build(name: str, par: Optional[str], level: int) -> list[str]:
        moments.append(name)
        parent[name] = par
        labels[name] = frozenset(a for a in atom_names if rng.random() < params.atom_probability)
        if level == params.depth:
            values[name] = float(rng.randint(lo, hi))
            return [name]
        counts = [rng.randint(1, params.branching) for _ in agents]
        grid: dict[tuple[int, ...], list[str]] = {}
        k = 0
        for cell in itertools.product(*[range(c) for c in counts]):
            n_children = 1 if params.agents > 1 else rng.randint(1, params.branching)
            grid[cell] = []
            for _ in range(n_children):
                grid[cell].extend(build(f"{name}.{k}", name, level + 1))
                k += 1
        for ai, agent in enumerate(agents):
            acts: dict[str, set[str]] = {}
            for cell, hs in grid.items():
                acts.setdefault(f"K{cell[ai]}", set()).update(hs)
            choices[(agent, name)] = {a: frozenset(v) for a, v in acts.items()}
        return [h for hs in grid.values() for h in hs]

    build("r", None, 0)
    return ExplicitStitModel(tuple(moments), parent, labels, agents, choices, values)


# --------------------------------------------------------------------------
# propagation patterns

@dataclass(frozen=True)
class Pattern:
    pid: str
    text: str
    expected_valid: bool
    description: str


PATTERNS: dict[str, Pattern] = {p.pid: p for p in [
    Pattern("P1", "Ob[alpha](X {phi}) -> XX Ob[alpha]({phi})", False,
            "obligation to ensure phi next persists to the next moment"),
    Pattern("P2", "(Ob[alpha](F {phi}) & !cstit[alpha](F {phi}) & XX E cstit[alpha](F {phi}))"
                  " -> XX Ob[alpha](F {phi})", False,
            "unmet eventual obligation that is still achievable persists"),
    Pattern("P3", "XX Ob[alpha]({phi}) -> Ob[alpha](X {phi})", False,
            "next-moment obligation implies a present obligation about the next moment"),
    Pattern("P4", "Ob[alpha](F {phi}) -> F Ob[alpha]({phi})", False,
            "eventual obligation implies eventually being obliged"),
    Pattern("P5", "F Ob[alpha]({phi}) -> Ob[alpha](F {phi})", False,
            "eventually being obliged implies an eventual obligation"),
    Pattern("V1", "(Ob[alpha](X {phi}) & tookOpt[alpha]) -> XX Ob[alpha]({phi})", True,
            "acting optimally carries a next-step obligation forward"),
    Pattern("V2", "(Ob[alpha](F {phi}) & tookOpt[alpha] & A !{phi}) -> XX Ob[alpha](F {phi})", True,
            "acting optimally while phi is impossible now carries an eventual obligation forward"),
    Pattern("V3", "(Ob[alpha](({phi} | X {psi})) & cstit[alpha](!{phi}) & tookOpt[alpha])"
                  " -> XX Ob[alpha]({psi})", True,
            "optimal agent that rules out phi is next obliged to psi"),
    Pattern("L1", "(Ob[alpha](({phi} | X {psi})) & cstit[alpha](!{phi}) & XX E cstit[alpha]({psi}))"
                  " -> XX Ob[alpha]({psi})", True,
            "as V3 without optimality, valid only in models meeting a choice constraint"),
]}


@dataclass(frozen=True)
class PatternResult:
    pattern: str
    valid_on_model: bool
    counterexample: Optional[Index] = None
    constraint_violated: bool = False
    undetermined: int = 0


def pattern_formula(pid: str, phi: str = "phi", psi: str = "psi") -> Formula:
    return parse_formula(PATTERNS[pid].text.format(phi=phi, psi=psi))


def l1_constraint(M: ExplicitStitModel, phi: Formula, psi: Formula, agent: str = "alpha") -> bool:
    """Model constraint under which L1 is valid, checked at every moment.

    For every action K ⊆ |¬phi|_m containing some h whose next moment m' can
    see to psi, every optimal action at m' must guarantee psi.
    """
    ev = _evaluator(M)
    can_psi = Exists(Cstit(agent, psi))
    for m in M.moments:
        if not M.children[m]:
            continue
        not_phi, _ = ev.ev(Not(phi), m)
        for K in M.cells(agent, m).values():
            if K & ~not_phi:
                continue
            for h in M.names_of(K):
                m2 = M.next_moment(m, h)
                ct, _ = ev.ev(can_psi, m2)
                if not ct & M.leaf_bit[h]:
                    continue
                pt, _ = ev.ev(psi, m2)
                if any(O & ~pt for O in ev.optimal(agent, m2)):
                    return False
    return True


def check_pattern(M: ExplicitStitModel, pid: str, phi: str = "phi", psi: str = "psi") -> PatternResult:
    """First index where the pattern's antecedent holds and its consequent fails."""
    if pid not in PATTERNS:
        raise OracleError(f"unknown pattern {pid!r}; known: {', '.join(PATTERNS)}")
    if pid == "L1" and not l1_constraint(M, parse_formula(phi), parse_formula(psi)):
        return PatternResult(pid, True, None, constraint_violated=True)
    f = pattern_formula(pid, phi, psi)
    ev = _evaluator(M)
    undetermined = 0
    for m in M.moments:
        t, fl = ev.ev(f, m)
        hm = M.hmask[m]
        undetermined += bin(hm & ~(t | fl)).count("1")
        if fl:
            h = next(h for h in M.leaves if M.leaf_bit[h] & fl)
            return PatternResult(pid, False, Index(m, h), undetermined=undetermined)
    return PatternResult(pid, True, None, undetermined=undetermined)


@dataclass(frozen=True)
class SearchResult:
    pattern: str
    seeds: int
    counterexample_seed: Optional[int]
    counterexample: Optional[Index]
    constraint_passing: int


def search_pattern(pid: str, seeds: Iterable[int], params: Optional[RandomParams] = None,
                   stop_at_first: bool = True, phi: str = "p0", psi: str = "(X p1)") -> SearchResult:
    """Random search for a counterexample to a pattern.

    Random atoms label moments, so an atomic psi is settled by the moment
    alone; the default ``X p1`` lets actions differ on psi.
    """
    params = params or RandomParams(depth=3, branching=2, atoms=2)
    n = passing = 0
    found_seed, found = None, None
    for seed in seeds:
        n += 1
        M = random_model(params, seed)
        res = check_pattern(M, pid, phi, psi)
        if not res.constraint_violated:
            passing += 1
        if res.counterexample is not None and found is None:
            found_seed, found = seed, res.counterexample
            if stop_at_first:
                break
    return SearchResult(pid, n, found_seed, found, passing)
