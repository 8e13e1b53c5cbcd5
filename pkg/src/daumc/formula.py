"""Formula AST, concrete syntax, and syntactic analyses.

One grammar covers temporal formulas (CTL*, with bounded Eventually/Always)
and the deontic layer (Ought, conditional Ought, permission, cstit, dstit,
took-optimal, DAU-level next).  Nodes are frozen dataclasses, so formulas
are hashable and can be used as memo keys.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Union


class FormulaError(ValueError):
    """Syntax or well-formedness error, optionally carrying a text position."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()

    @property
    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class ForAll(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Exists(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class BoundedEventually(Formula):
    bound: int
    arg: Formula

    def __post_init__(self):
        if not isinstance(self.bound, int) or self.bound < 0:
            raise FormulaError(f"malformed bound {self.bound!r}")

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class BoundedAlways(Formula):
    bound: int
    arg: Formula

    def __post_init__(self):
        if not isinstance(self.bound, int) or self.bound < 0:
            raise FormulaError(f"malformed bound {self.bound!r}")

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Cstit(Formula):
    agent: str
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Dstit(Formula):
    agent: str
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Ought(Formula):
    agent: str
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class ConditionalOught(Formula):
    agent: str
    arg: Formula
    condition: Formula

    def __post_init__(self):
        if is_deontic(self.condition):
            raise FormulaError("condition of a conditional Ought must be deontic-free")

    @property
    def children(self):
        return (self.arg, self.condition)


@dataclass(frozen=True)
class Perm(Formula):
    agent: str
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class ConditionalPerm(Formula):
    agent: str
    arg: Formula
    condition: Formula

    def __post_init__(self):
        if is_deontic(self.condition):
            raise FormulaError("condition of a conditional permission must be deontic-free")

    @property
    def children(self):
        return (self.arg, self.condition)


@dataclass(frozen=True)
class DauNext(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class TookOptimal(Formula):
    agent: str


TRUE = TrueF()
FALSE = FalseF()

_DEONTIC = (Cstit, Dstit, Ought, ConditionalOught, Perm, ConditionalPerm, DauNext, TookOptimal)
_TEMPORAL = (Next, Eventually, Always, Until, Release, BoundedEventually, BoundedAlways)
_UNARY_PREFIX = {Not: "!", ForAll: "A", Exists: "E", Next: "X", Eventually: "F",
                 Always: "G", DauNext: "XX"}
_BINARY_INFIX = {And: "&", Or: "|", Implies: "->", Until: "U", Release: "R"}


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal, including f itself."""
    yield f
    for c in f.children:
        yield from subformulas(c)


def atoms(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Atom))


def is_deontic(f: Formula) -> bool:
    return any(isinstance(g, _DEONTIC) for g in subformulas(f))


def is_state_formula(f: Formula) -> bool:
    """Deontic-free formula whose temporal operators all sit under a path quantifier."""
    match f:
        case Atom() | TrueF() | FalseF():
            return True
        case ForAll() | Exists():
            return not is_deontic(f.arg)
        case Not() | And() | Or() | Implies():
            return all(is_state_formula(c) for c in f.children)
        case _:
            return False


def is_path_formula(f: Formula) -> bool:
    """Deontic-free CTL* formula (state formulas are path formulas too)."""
    return not is_deontic(f)


# --------------------------------------------------------------------------
# printing

def to_text(f: Formula) -> str:
    """Concrete syntax; binary nodes are always parenthesised so parsing inverts it."""
    match f:
        case Atom(name):
            return name
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case BoundedEventually(n, a):
            return f"F<={n} {to_text(a)}"
        case BoundedAlways(n, a):
            return f"G<={n} {to_text(a)}"
        case Cstit(ag, a):
            return f"cstit[{ag}]({to_text(a)})"
        case Dstit(ag, a):
            return f"dstit[{ag}]({to_text(a)})"
        case Ought(ag, a):
            return f"Ob[{ag}]({to_text(a)})"
        case ConditionalOught(ag, a, c):
            return f"Ob[{ag}]({to_text(a)} | {to_text(c)})"
        case Perm(ag, a):
            return f"Perm[{ag}]({to_text(a)})"
        case ConditionalPerm(ag, a, c):
            return f"Perm[{ag}]({to_text(a)} | {to_text(c)})"
        case TookOptimal(ag):
            return f"tookOpt[{ag}]"
        case Not(a):
            return f"!{to_text(a)}"
    op = _UNARY_PREFIX.get(type(f))
    if op is not None:
        return f"{op} {to_text(f.children[0])}"
    op = _BINARY_INFIX[type(f)]
    left, right = f.children
    return f"({to_text(left)} {op} {to_text(right)})"


# --------------------------------------------------------------------------
# parsing

_ID = r"[A-Za-z_](?:[A-Za-z0-9_]|-(?!>))*"
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>\s+)
  | (?P<agentop>(?:Ob|Perm|cstit|dstit|tookOpt)\s*\[\s*(?P<agent>{_ID})\s*\])
  | (?P<bounded>[FG]\s*<=\s*(?P<bound>[^\s()!&|]*))
  | (?P<arrow>->)
  | (?P<punct>[!&|()])
  | (?P<ident>{_ID})
    """,
    re.VERBOSE,
)

_PREFIX_WORDS = {"A", "E", "X", "F", "G", "XX"}
_KEYWORDS = _PREFIX_WORDS | {"U", "R", "true", "false"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'op' (agent operator), 'bounded', 'sym', 'id', 'end'
    value: Union[str, tuple]
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pass
        elif m.group("agentop"):
            name = m.group("agentop").split("[")[0].strip()
            toks.append(_Tok("op", (name, m.group("agent")), pos))
        elif m.group("bounded"):
            raw = m.group("bound")
            if not raw.isdigit():
                raise FormulaError(f"malformed bound {raw!r}", pos)
            toks.append(_Tok("bounded", (m.group("bounded")[0], int(raw)), pos))
        elif m.group("arrow"):
            toks.append(_Tok("sym", "->", pos))
        elif m.group("punct"):
            toks.append(_Tok("sym", m.group("punct"), pos))
        else:
            word = m.group("ident")
            nxt = m.end()
            while nxt < len(text) and text[nxt].isspace():
                nxt += 1
            if nxt < len(text) and text[nxt] == "[":
                raise FormulaError(f"unknown operator {word}[...]", pos)
            toks.append(_Tok("id", word, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, sym: str) -> None:
        t = self.take()
        if t.kind != "sym" or t.value != sym:
            shown = t.value if t.kind != "end" else "end of input"
            raise FormulaError(f"expected {sym!r}, found {shown!r}", t.pos)

    def at_sym(self, sym: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.value == sym

    def starts_formula(self, t: _Tok) -> bool:
        if t.kind in ("op", "bounded"):
            return True
        if t.kind == "sym":
            return t.value in ("!", "(")
        return t.kind == "id" and t.value not in ("U", "R")

    # implication is right-associative and binds loosest
    def expr(self, no_bar: bool = False) -> Formula:
        left = self.disj(no_bar)
        if self.at_sym("->"):
            self.take()
            return Implies(left, self.expr(no_bar))
        return left

    def disj(self, no_bar: bool) -> Formula:
        left = self.conj()
        while not no_bar and self.at_sym("|"):
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.binary_temporal()
        while self.at_sym("&"):
            self.take()
            left = And(left, self.binary_temporal())
        return left

    def binary_temporal(self) -> Formula:
        left = self.unary()
        t = self.peek()
        if t.kind == "id" and t.value in ("U", "R"):
            self.take()
            right = self.binary_temporal()
            return Until(left, right) if t.value == "U" else Release(left, right)
        return left

    def unary(self) -> Formula:
        t = self.peek()
        if t.kind == "sym" and t.value == "!":
            self.take()
            return Not(self.unary())
        if t.kind == "sym" and t.value == "(":
            self.take()
            f = self.expr()
            self.expect(")")
            return f
        if t.kind == "bounded":
            self.take()
            op, n = t.value
            arg = self.unary()
            return BoundedEventually(n, arg) if op == "F" else BoundedAlways(n, arg)
        if t.kind == "op":
            return self.agent_operator()
        if t.kind == "id":
            word = t.value
            if word in _PREFIX_WORDS and self.starts_formula(self.peek(1)):
                self.take()
                arg = self.unary()
                return {"A": ForAll, "E": Exists, "X": Next, "F": Eventually,
                        "G": Always, "XX": DauNext}[word](arg)
            self.take()
            if word == "true":
                return TRUE
            if word == "false":
                return FALSE
            return Atom(word)
        shown = t.value if t.kind != "end" else "end of input"
        raise FormulaError(f"unexpected {shown!r}", t.pos)

    def agent_operator(self) -> Formula:
        t = self.take()
        name, agent = t.value
        if name == "tookOpt":
            return TookOptimal(agent)
        self.expect("(")
        if name in ("Ob", "Perm"):
            body = self.expr(no_bar=True)
            cond = None
            if self.at_sym("|"):
                self.take()
                cond = self.expr()
            self.expect(")")
            if cond is not None and is_deontic(cond):
                raise FormulaError("condition must be a deontic-free path formula", t.pos)
            if name == "Ob":
                return Ought(agent, body) if cond is None else ConditionalOught(agent, body, cond)
            return Perm(agent, body) if cond is None else ConditionalPerm(agent, body, cond)
        body = self.expr()
        self.expect(")")
        return Cstit(agent, body) if name == "cstit" else Dstit(agent, body)


def parse_formula(text: str) -> Formula:
    """Parse concrete syntax into a formula AST.

    A top-level ``|`` inside ``Ob[..](..)`` / ``Perm[..](..)`` separates the
    body from the condition; disjunctions in a body must be parenthesised.

    >>> parse_formula("Ob[a](G !collision)")
    Ought(agent='a', arg=Always(arg=Not(arg=Atom(name='collision'))))
    """
    if not text or not text.strip():
        raise FormulaError("empty formula")
    p = _Parser(text)
    f = p.expr()
    t = p.peek()
    if t.kind != "end":
        raise FormulaError(f"unexpected trailing {t.value!r}", t.pos)
    return f


# --------------------------------------------------------------------------
# rewriting

def _rebuild(f: Formula, kids: tuple[Formula, ...]) -> Formula:
    match f:
        case BoundedEventually(n, _):
            return BoundedEventually(n, kids[0])
        case BoundedAlways(n, _):
            return BoundedAlways(n, kids[0])
        case Cstit(ag, _) | Dstit(ag, _) | Ought(ag, _) | Perm(ag, _):
            return type(f)(ag, kids[0])
        case ConditionalOught(ag, _, _) | ConditionalPerm(ag, _, _):
            return type(f)(ag, kids[0], kids[1])
    if not kids:
        return f
    return type(f)(*kids)


def expand_bounded(f: Formula) -> Formula:
    """Rewrite F<=n / G<=n into nested Next; the result has no bounded operators."""
    kids = tuple(expand_bounded(c) for c in f.children)
    match f:
        case BoundedEventually(n, _):
            out = kids[0]
            for _ in range(n):
                out = Or(kids[0], Next(out))
            return out
        case BoundedAlways(n, _):
            out = kids[0]
            for _ in range(n):
                out = And(kids[0], Next(out))
            return out
    return _rebuild(f, kids)


def negate(f: Formula) -> Formula:
    """Negation pushed one level through the top connective."""
    match f:
        case TrueF():
            return FALSE
        case FalseF():
            return TRUE
        case Not(a):
            return a
        case And(a, b):
            return Or(Not(a), Not(b))
        case Or(a, b):
            return And(Not(a), Not(b))
        case Implies(a, b):
            return And(a, Not(b))
        case ForAll(a):
            return Exists(Not(a))
        case Exists(a):
            return ForAll(Not(a))
        case Next(a):
            return Next(Not(a))
        case Eventually(a):
            return Always(Not(a))
        case Always(a):
            return Eventually(Not(a))
        case Until(a, b):
            return Release(Not(a), Not(b))
        case Release(a, b):
            return Until(Not(a), Not(b))
        case BoundedEventually(n, a):
            return BoundedAlways(n, Not(a))
        case BoundedAlways(n, a):
            return BoundedEventually(n, Not(a))
        case DauNext(a):
            return DauNext(Not(a))
    return Not(f)


def syntactic_horizon(f: Formula) -> Optional[int]:
    """Number of steps after which every trace prefix decides f, or None if unbounded.

    Only propositional connectives, X, F<=n and G<=n are bounded.
    """
    match f:
        case Atom() | TrueF() | FalseF():
            return 0
        case Not(a):
            return syntactic_horizon(a)
        case And(a, b) | Or(a, b) | Implies(a, b):
            ha, hb = syntactic_horizon(a), syntactic_horizon(b)
            return None if ha is None or hb is None else max(ha, hb)
        case Next(a):
            h = syntactic_horizon(a)
            return None if h is None else h + 1
        case BoundedEventually(n, a) | BoundedAlways(n, a):
            h = syntactic_horizon(a)
            return None if h is None else h + n
    return None


# --------------------------------------------------------------------------
# classification

class Tag(Enum):
    STATE = "StateFormula"
    PATH = "PathFormula"
    CHECKER = "CheckerObligation"
    ORACLE_ONLY = "OracleOnly"


class BodyKind(Enum):
    PLAIN = "PlainTemporal"
    DSTIT = "Dstit"
    NEG_DSTIT = "NegDstit"


@dataclass(frozen=True)
class FormulaClass:
    tag: Tag
    kind: Optional[BodyKind] = None

    def __str__(self) -> str:
        return self.tag.value if self.kind is None else f"{self.tag.value}({self.kind.value})"


def _body_class(f: Formula) -> FormulaClass:
    match f:
        case Dstit(_, a) if not is_deontic(a):
            return FormulaClass(Tag.CHECKER, BodyKind.DSTIT)
        case Not(Dstit(_, a)) if not is_deontic(a):
            return FormulaClass(Tag.CHECKER, BodyKind.NEG_DSTIT)
    if not is_deontic(f):
        return FormulaClass(Tag.CHECKER, BodyKind.PLAIN)
    return FormulaClass(Tag.ORACLE_ONLY)


def classify(f: Formula) -> FormulaClass:
    """Tag a formula by which engine can decide it.

    Deontic-free state formulas are StateFormula (missions); other
    deontic-free formulas and dstit / negated-dstit bodies are admissible
    obligation bodies.  An Ought/Perm query carries the class of its body.
    Everything else (nesting, cstit, tookOpt, XX) needs the explicit oracle.
    """
    match f:
        case Ought(_, a) | Perm(_, a):
            return _body_class(a)
        case ConditionalOught(_, a, c) | ConditionalPerm(_, a, c):
            if is_deontic(c):
                return FormulaClass(Tag.ORACLE_ONLY)
            return _body_class(a)
    if is_state_formula(f):
        return FormulaClass(Tag.STATE)
    return _body_class(f)


def is_checker_admissible(body: Formula) -> bool:
    return _body_class(body).tag is Tag.CHECKER


def wellformed(f: Formula) -> None:
    """Raise FormulaError if a structural invariant is violated."""
    for g in subformulas(f):
        if isinstance(g, (ConditionalOught, ConditionalPerm)) and is_deontic(g.condition):
            raise FormulaError("condition must be deontic-free")
        if isinstance(g, (BoundedEventually, BoundedAlways)) and g.bound < 0:
            raise FormulaError("negative bound")
        if isinstance(g, Atom) and not g.name:
            raise FormulaError("empty atom name")
