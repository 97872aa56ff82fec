"""Abstract syntax shared by the parser, analyzer, code generator and simulator.

Expression trees cover the guarded-machine dialect: arithmetic, finite sets,
per-process functions, quantifiers over typed binders, and the channel
primitives (send/receive/lose and the sent/received/inChannel history
queries).  All nodes are immutable after construction and safe to share.

Channel operations are represented by a dedicated ChannelCall node; the
``channels`` variable itself never appears as a plain Var in a well-formed
tree.  Enumerated-set members and control-state names are parsed as Var and
rewritten to EnumElem during analysis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .diagnostics import SourceSpan

IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


def check_ident(name: str) -> str:
    if not IDENT_RE.match(name):
        raise ValueError(f"not a valid identifier: {name!r}")
    return name


class BinOp(Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    EQ = "="
    NE = "/="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    IN = "in"
    NOTIN = "/:"
    SUBSETEQ = "<:"
    UNION = "\\/"
    INTER = "/\\"
    DIFF = "\\"
    AND = "&"
    OR = "or"
    IMPLIES = "=>"
    # Type-level operators, needed to parse typing axioms and invariants.
    TFUN = "-->"
    PFUN = "+->"
    CROSS = "**"


COMPARISONS = {BinOp.EQ, BinOp.NE, BinOp.LT, BinOp.LE, BinOp.GT, BinOp.GE,
               BinOp.IN, BinOp.NOTIN, BinOp.SUBSETEQ}


class QuantKind(Enum):
    FORALL = "!"
    EXISTS = "#"


class ChannelKind(Enum):
    SEND = "send"
    RECEIVE = "receive"
    LOSE = "lose"
    SENT = "sent"
    RECEIVED = "received"
    IN_CHANNEL = "inChannel"


CHANNEL_KINDS = {k.value: k for k in ChannelKind}
HISTORY_KINDS = {ChannelKind.SENT, ChannelKind.RECEIVED, ChannelKind.IN_CHANNEL}


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class EnumElem(Expr):
    """Member of an enumerated carrier set, resolved by the analyzer."""

    set_name: str
    elem: str


@dataclass(frozen=True)
class Apply(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Maplet(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: BinOp
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class SetExt(Expr):
    elems: tuple[Expr, ...]


@dataclass(frozen=True)
class SetComprehension(Expr):
    """``{x . x in D & filter | body}``; filter is optional."""

    binder: str
    domain: Expr
    filter: Expr | None
    body: Expr


@dataclass(frozen=True)
class Quantifier(Expr):
    """Typed quantifier: each binder carries its domain expression.

    Binders shadow outer variables of the same name; a later binder's
    domain may mention earlier binders.
    """

    kind: QuantKind
    binders: tuple[tuple[str, Expr], ...]
    body: Expr


@dataclass(frozen=True)
class Interval(Expr):
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class Card(Expr):
    operand: Expr


@dataclass(frozen=True)
class ChannelCall(Expr):
    """Channel primitive applied to ``channels |-> (src |-> dst) |-> msg``."""

    kind: ChannelKind
    src: Expr
    dst: Expr
    msg: Expr


@dataclass(frozen=True)
class FuncOverride(Expr):
    """Function override ``base <+ updates``."""

    base: Expr
    updates: Expr


@dataclass(frozen=True)
class Partition(Expr):
    """``partition(S, B1, ..., Bn)`` as used by set and class axioms."""

    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Pow(Expr):
    operand: Expr


@dataclass(frozen=True)
class NatSet(Expr):
    """The natural numbers, usable only as a typing domain."""


@dataclass(frozen=True)
class Axiom:
    label: str
    predicate: Expr
    annotations: tuple[str, ...] = ()
    # Side information for diagnostics; never part of structural equality.
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ContextModel:
    name: str
    extends: tuple[str, ...]
    sets: tuple[str, ...]
    constants: tuple[str, ...]
    axioms: tuple[Axiom, ...]
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)

    def axiom(self, label: str) -> Axiom | None:
        for ax in self.axioms:
            if ax.label == label:
                return ax
        return None


class Action:
    """Base class for event actions."""

    __slots__ = ()


@dataclass(frozen=True)
class LocalAssign(Action):
    """``var(proc) := rhs``; proc is None for a malformed bare assignment,
    which the analyzer rejects."""

    label: str
    var: str
    proc: str | None
    rhs: Expr


@dataclass(frozen=True)
class ChannelAssign(Action):
    """``channels := send/receive(channels |-> (src |-> dst) |-> msg)``."""

    label: str
    kind: ChannelKind
    src: Expr
    dst: Expr
    msg: Expr

    @property
    def peer(self) -> Expr:
        return self.dst if self.kind is ChannelKind.SEND else self.src


@dataclass(frozen=True)
class EventDecl:
    name: str
    params: tuple[str, ...]
    guards: tuple[tuple[str, Expr], ...]
    actions: tuple[Action, ...]
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class InitAssign:
    """One initialisation action ``var := expr``."""

    label: str
    var: str
    rhs: Expr
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class MachineModel:
    name: str
    sees: str
    variables: tuple[str, ...]
    invariants: tuple[tuple[str, Expr], ...]
    initialisation: tuple[InitAssign, ...]
    events: tuple[EventDecl, ...]
    span: "SourceSpan | None" = field(default=None, compare=False, repr=False)


class EventKind(Enum):
    INTERNAL = "internal"
    SEND = "send"
    RECEIVE = "receive"


class AmbiguousKind(Exception):
    """An event contains both a send and a receive channel action."""


def classify_event(event: EventDecl) -> EventKind:
    """Classify an event by its channel actions.

    The result depends only on the action list, so it is stable under any
    reordering of guards.
    """
    kinds = {a.kind for a in event.actions if isinstance(a, ChannelAssign)}
    if ChannelKind.SEND in kinds and ChannelKind.RECEIVE in kinds:
        raise AmbiguousKind(event.name)
    if ChannelKind.SEND in kinds:
        return EventKind.SEND
    if ChannelKind.RECEIVE in kinds:
        return EventKind.RECEIVE
    return EventKind.INTERNAL


def free_vars(expr: Expr) -> set[str]:
    """Identifiers occurring free in expr.

    Quantifier and comprehension binders are excluded inside their scope;
    a binder's own domain is evaluated outside it (an earlier binder is in
    scope for a later binder's domain).  Resolved EnumElem nodes contribute
    nothing, and ChannelCall hides the channels variable it stands for.
    """
    out: set[str] = set()
    _collect_free(expr, frozenset(), out)
    return out


def _collect_free(e: Expr, bound: frozenset[str], out: set[str]) -> None:
    if isinstance(e, Var):
        if e.name not in bound:
            out.add(e.name)
    elif isinstance(e, (IntLit, BoolLit, EnumElem, NatSet)):
        pass
    elif isinstance(e, Apply):
        _collect_free(e.fn, bound, out)
        _collect_free(e.arg, bound, out)
    elif isinstance(e, Maplet):
        _collect_free(e.left, bound, out)
        _collect_free(e.right, bound, out)
    elif isinstance(e, Binary):
        _collect_free(e.left, bound, out)
        _collect_free(e.right, bound, out)
    elif isinstance(e, Not):
        _collect_free(e.operand, bound, out)
    elif isinstance(e, SetExt):
        for el in e.elems:
            _collect_free(el, bound, out)
    elif isinstance(e, SetComprehension):
        _collect_free(e.domain, bound, out)
        inner = bound | {e.binder}
        if e.filter is not None:
            _collect_free(e.filter, inner, out)
        _collect_free(e.body, inner, out)
    elif isinstance(e, Quantifier):
        inner = bound
        for name, domain in e.binders:
            _collect_free(domain, inner, out)
            inner = inner | {name}
        _collect_free(e.body, inner, out)
    elif isinstance(e, Interval):
        _collect_free(e.lo, bound, out)
        _collect_free(e.hi, bound, out)
    elif isinstance(e, Card):
        _collect_free(e.operand, bound, out)
    elif isinstance(e, ChannelCall):
        _collect_free(e.src, bound, out)
        _collect_free(e.dst, bound, out)
        _collect_free(e.msg, bound, out)
    elif isinstance(e, FuncOverride):
        _collect_free(e.base, bound, out)
        _collect_free(e.updates, bound, out)
    elif isinstance(e, Partition):
        for a in e.args:
            _collect_free(a, bound, out)
    elif isinstance(e, Pow):
        _collect_free(e.operand, bound, out)
    else:
        raise TypeError(f"unknown expression node: {e!r}")


def children(e: Expr) -> list[tuple[Expr, frozenset[str]]]:
    """Immediate subexpressions, each with the binders newly in scope there."""
    none: frozenset[str] = frozenset()
    if isinstance(e, Apply):
        return [(e.fn, none), (e.arg, none)]
    if isinstance(e, Maplet):
        return [(e.left, none), (e.right, none)]
    if isinstance(e, Binary):
        return [(e.left, none), (e.right, none)]
    if isinstance(e, Not):
        return [(e.operand, none)]
    if isinstance(e, SetExt):
        return [(el, none) for el in e.elems]
    if isinstance(e, SetComprehension):
        scope = frozenset({e.binder})
        out = [(e.domain, none), (e.body, scope)]
        if e.filter is not None:
            out.insert(1, (e.filter, scope))
        return out
    if isinstance(e, Quantifier):
        out = []
        seen: frozenset[str] = frozenset()
        for name, domain in e.binders:
            out.append((domain, seen))
            seen = seen | {name}
        out.append((e.body, seen))
        return out
    if isinstance(e, Interval):
        return [(e.lo, none), (e.hi, none)]
    if isinstance(e, Card):
        return [(e.operand, none)]
    if isinstance(e, ChannelCall):
        return [(e.src, none), (e.dst, none), (e.msg, none)]
    if isinstance(e, FuncOverride):
        return [(e.base, none), (e.updates, none)]
    if isinstance(e, Partition):
        return [(a, none) for a in e.args]
    if isinstance(e, Pow):
        return [(e.operand, none)]
    return []


def walk(e: Expr):
    """Yield every node of the tree, preorder."""
    yield e
    for child, _ in children(e):
        yield from walk(child)


def maplet_chain(e: Expr) -> list[Expr]:
    """Flatten a left-associated maplet chain into its components."""
    parts: list[Expr] = []
    while isinstance(e, Maplet):
        parts.append(e.right)
        e = e.left
    parts.append(e)
    parts.reverse()
    return parts
