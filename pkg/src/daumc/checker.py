"""Deciding obligations, conditional obligations and permissions on stit automata.

An agent ought to see to A when every optimal first action guarantees A.
Optimal actions are the un-dominated ones, compared by the extremal value
intervals of the automaton restricted to each first action.  Conditional
obligations compare only executions that satisfy the condition.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .automaton import (
    StitAutomaton, enumerate_prefixes, kripke_view, prefix_trace, prime,
    require_valid, spine,
)
from .formula import (
    BodyKind, ConditionalOught, ConditionalPerm, Dstit, Formula, Not, Ought,
    Perm, Tag, _body_class, is_deontic, is_state_formula, syntactic_horizon, to_text,
)
from .temporal import Lasso, TransitionSystem, atomize, check_state, check_universal_path, eval_finite_trace
from .utility import ActionInterval, conditional_interval, extremal_interval, undominated

DEFAULT_TAU_CAP = 8


class CheckerError(ValueError):
    """A query the checker cannot decide (e.g. it needs the explicit oracle)."""


@dataclass(frozen=True)
class Verdict:
    holds: bool
    optimal_actions: frozenset[str] = frozenset()
    intervals: tuple[ActionInterval, ...] = ()
    failing_action: Optional[str] = None
    counterexample: Optional[Lasso] = None
    notes: tuple[str, ...] = ()
    stats: Mapping[str, int] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "optimal_actions": sorted(self.optimal_actions),
            "intervals": [
                {"action": i.action, "lower": i.lower, "upper": i.upper,
                 "certified_error": i.certified_error}
                for i in self.intervals
            ],
            "failing_action": self.failing_action,
            "counterexample": None if self.counterexample is None else {
                "prefix": list(self.counterexample.prefix), "cycle": list(self.counterexample.cycle)},
            "notes": list(self.notes),
            "stats": dict(sorted(self.stats.items())),
        }


def _admissible_kind(body: Formula) -> BodyKind:
    cls = _body_class(body)
    if cls.tag is not Tag.CHECKER:
        raise CheckerError(
            f"obligation body {to_text(body)} is outside the checker's fragment "
            "(nested deontic operators, cstit, tookOpt or XX); use the explicit oracle (oracle-eval)")
    return cls.kind


def _clean(T: StitAutomaton) -> StitAutomaton:
    require_valid(T)
    return replace(T, origin={})


class _Context:
    """State-subformula truth sets computed once on the unrestricted automaton.

    Quantified subformulas of obligation bodies speak about all histories
    through a moment, so they are evaluated on T and transported to the
    surgically modified automata through the state origin map.
    """

    def __init__(self, T: StitAutomaton):
        self.T = T
        self.ts = kripke_view(T)
        self._counter = 0

    def flatten(self, f: Formula) -> tuple[Formula, dict[str, set[str]]]:
        from .temporal import _Fresh

        fresh = _Fresh()
        fresh.n = self._counter
        flat, extra = atomize(self.ts, f, fresh)
        self._counter = fresh.n
        return flat, extra

    def lifted(self, P: StitAutomaton, extra: Mapping[str, set[str]]) -> tuple[TransitionSystem, dict]:
        lifted = {q: extra.get(P.original(q), set()) for q in P.states}
        return kripke_view(P), lifted


def _guarantees(ctx: _Context, P: StitAutomaton, flat: Formula, extra) -> tuple[bool, Optional[Lasso], dict]:
    ts, lifted = ctx.lifted(P, extra)
    res = check_universal_path(ts, P.initial, flat, lifted)
    cex = None if res.lasso is None else res.lasso.rename(P.original)
    return res.holds, cex, res.stats


def _second_step(ctx: _Context, kind: BodyKind, body: Formula, optimal: list[str],
                 primes: dict[str, StitAutomaton]) -> tuple[bool, Optional[str], Optional[Lasso], list[str], dict]:
    """Does every optimal action guarantee the body?  Returns holds, failing action, lasso, notes, stats."""
    T = ctx.T
    stats: dict[str, int] = {"universal_checks": 0}
    notes: list[str] = []
    if kind is BodyKind.PLAIN:
        flat, extra = ctx.flatten(body)
        for K in optimal:
            ok, cex, st = _guarantees(ctx, primes[K], flat, extra)
            stats["universal_checks"] += 1
            stats["product_nodes"] = max(stats.get("product_nodes", 0), st.get("product_nodes", 0))
            if not ok:
                return False, K, cex, notes, stats
        return True, None, None, notes, stats

    phi = body.arg if kind is BodyKind.DSTIT else body.arg.arg
    flat, extra = ctx.flatten(phi)
    root_ts, root_extra = ctx.lifted(T, extra)
    trivial = check_universal_path(root_ts, T.initial, flat, root_extra).holds
    stats["universal_checks"] += 1
    if kind is BodyKind.DSTIT:
        if trivial:
            notes.append(f"trivial: |{to_text(phi)}| = H at root, so nothing is deliberately seen to")
            return False, None, None, notes, stats
        for K in optimal:
            ok, cex, _ = _guarantees(ctx, primes[K], flat, extra)
            stats["universal_checks"] += 1
            if not ok:
                return False, K, cex, notes, stats
        return True, None, None, notes, stats

    # negated deliberative stit: an action is fine unless it guarantees a non-trivial phi
    if trivial:
        notes.append(f"trivial: |{to_text(phi)}| = H at root, so no action deliberately sees to it")
        return True, None, None, notes, stats
    for K in optimal:
        ok, _, _ = _guarantees(ctx, primes[K], flat, extra)
        stats["universal_checks"] += 1
        if ok:
            notes.append(f"action {K} guarantees {to_text(phi)}, which could otherwise fail")
            return False, K, None, notes, stats
    return True, None, None, notes, stats


def check_ought(T: StitAutomaton, body: Formula) -> Verdict:
    """Does the automaton's agent ought to see to ``body`` at the initial state?"""
    kind = _admissible_kind(body)
    T = _clean(T)
    ctx = _Context(T)
    primes = {K: prime(T, K) for K in T.available_actions()}
    intervals = tuple(extremal_interval(P, K) for K, P in sorted(primes.items()))
    optimal = sorted(undominated(intervals))
    holds, failing, cex, notes, stats = _second_step(ctx, kind, body, optimal, primes)
    return Verdict(holds, frozenset(optimal), intervals, failing, cex, tuple(notes), stats)


def _fragment_intervals(T: StitAutomaton, cond: Formula, tau: int) -> tuple[dict, dict, int]:
    """Per first action: interval over condition-satisfying fragments (and the literal-max lower end)."""
    per_action: dict[str, list[ActionInterval]] = {}
    count = 0
    for pi in enumerate_prefixes(T, tau):
        if not eval_finite_trace(cond, prefix_trace(T, pi)):
            continue
        K = pi[0].action
        per_action.setdefault(K, []).append(extremal_interval(spine(T, pi), K))
        count += 1
    merged, literal = {}, {}
    for K, ivs in sorted(per_action.items()):
        err = max(i.certified_error for i in ivs)
        hi = max(i.upper for i in ivs)
        merged[K] = ActionInterval(K, min(i.lower for i in ivs), hi, err)
        lit_lo = max(i.lower for i in ivs)
        literal[K] = ActionInterval(K, min(lit_lo, hi), hi, err)
    return merged, literal, count


def check_conditional_ought(T: StitAutomaton, body: Formula, condition: Formula,
                            tau: Optional[int] = None, tau_cap: int = DEFAULT_TAU_CAP) -> Verdict:
    """Ought(body | condition): optimality is judged on condition-satisfying executions only."""
    kind = _admissible_kind(body)
    if is_deontic(condition):
        raise CheckerError("the condition must be a deontic-free path formula")
    T = _clean(T)
    ctx = _Context(T)
    notes: list[str] = []
    stats: dict[str, int] = {}
    h = syntactic_horizon(condition)
    if h is None:
        if tau is not None:
            raise CheckerError("--tau only applies to finite-horizon conditions")
        notes.append("condition has no finite horizon: intervals taken over condition-accepting runs")
        flat, extra = ctx.flatten(condition)
        merged = {}
        for K in T.available_actions():
            P = prime(T, K)
            lifted = {q: extra.get(P.original(q), set()) for q in P.states}
            iv = conditional_interval(P, flat, K, lifted)
            if iv is not None:
                merged[K] = iv
        literal = merged
    else:
        tau = h if tau is None else tau
        if tau < h:
            raise CheckerError(f"tau={tau} is below the condition's horizon {h}")
        if tau > tau_cap:
            raise CheckerError(f"tau={tau} exceeds the fragment-enumeration cap {tau_cap}")
        merged, literal, stats["fragments"] = _fragment_intervals(T, condition, max(tau, 1))
    if not merged:
        notes.append("condition unsatisfiable from root: no action is compatible with it, "
                     "so the conditional obligation holds vacuously")
        return Verdict(True, frozenset(), (), None, None, tuple(notes), stats)
    intervals = tuple(merged[K] for K in sorted(merged))
    optimal = sorted(undominated(intervals))
    literal_opt = sorted(undominated(literal[K] for K in sorted(literal)))
    if literal_opt != optimal:
        notes.append("taking the lower value as the maximum of fragment minima would give optimal set "
                     f"{{{', '.join(literal_opt)}}} instead")
    primes = {K: prime(T, K) for K in optimal}
    holds, failing, cex, step_notes, step_stats = _second_step(ctx, kind, body, optimal, primes)
    stats.update(step_stats)
    return Verdict(holds, frozenset(optimal), intervals, failing, cex, tuple(notes + step_notes), stats)


def negate_body(body: Formula) -> Formula:
    """Negation that stays inside the checker's three body forms."""
    match body:
        case Not(Dstit() as d):
            return d
    return Not(body)


def check_permission(T: StitAutomaton, body: Formula, condition: Optional[Formula] = None,
                     tau: Optional[int] = None) -> Verdict:
    """Perm(body [| condition]) as the negation of Ought(not body [| condition])."""
    neg = negate_body(body)
    if condition is None:
        v = check_ought(T, neg)
    else:
        v = check_conditional_ought(T, neg, condition, tau)
    return replace(v, holds=not v.holds,
                   notes=v.notes + (f"permission decided as the negation of Ob({to_text(neg)})",))


def check_mission(T: StitAutomaton, f: Formula) -> Verdict:
    """Plain CTL* satisfaction of a state formula at the initial state."""
    if not is_state_formula(f):
        raise CheckerError(f"mission must be a deontic-free state formula: {to_text(f)}")
    T = _clean(T)
    sat = check_state(kripke_view(T), f)
    return Verdict(T.initial in sat, notes=(f"satisfied at {len(sat)} of {len(T.states)} states",))


def check_query(T: StitAutomaton, f: Formula, tau: Optional[int] = None) -> Verdict:
    """Dispatch a parsed query to the matching decision procedure."""
    match f:
        case Ought(agent, body):
            return _agent_note(check_ought(T, body), T, agent)
        case ConditionalOught(agent, body, cond):
            return _agent_note(check_conditional_ought(T, body, cond, tau), T, agent)
        case Perm(agent, body):
            return _agent_note(check_permission(T, body), T, agent)
        case ConditionalPerm(agent, body, cond):
            return _agent_note(check_permission(T, body, cond, tau), T, agent)
    if is_state_formula(f):
        return check_mission(T, f)
    if is_deontic(f):
        raise CheckerError(f"{to_text(f)} is not a checker query; use the explicit oracle (oracle-eval)")
    raise CheckerError(f"{to_text(f)} is a path formula; wrap it in Ob[..](..), Perm[..](..) or A/E")


def _agent_note(v: Verdict, T: StitAutomaton, agent: str) -> Verdict:
    if agent == T.agent:
        return v
    return replace(v, notes=v.notes + (
        f"query names agent {agent!r}; the automaton models agent {T.agent!r} and is used as is",))
