"""Well-formedness analysis of parsed models.

Enforces the locality discipline that makes a machine/context pair a
distributed program: a partitioned Nodes set of process classes, the
communication constants, per-process typing of constants and variables,
and the event shape rules (one process parameter, a pc guard, typed
parameters, local-only expressions, at most one channel action with the
right orientation).  The result is an AnalyzedProgram with per-class
locality tables consumed by the code generator and the simulator.

Analysis is all-or-nothing: diagnostics are aggregated and raised together
in an AnalysisFailure; an accepted program satisfies every rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast
from .ast import (
    AmbiguousKind,
    Apply,
    Axiom,
    Binary,
    BinOp,
    ChannelAssign,
    ChannelKind,
    ContextModel,
    EnumElem,
    EventDecl,
    EventKind,
    Expr,
    IntLit,
    LocalAssign,
    MachineModel,
    Maplet,
    Partition,
    Pow,
    Quantifier,
    SetComprehension,
    SetExt,
    Var,
    classify_event,
    free_vars,
    walk,
)
from .diagnostics import (
    AnalysisFailure,
    Diagnostic,
    SourceSpan,
    error,
    warning,
)
from . import diagnostics as codes

BUILTIN_SETS = ("Nodes", "States", "Messages")
BUILTIN_CONSTANTS = ("Channels", "emptyChannel", "sent", "received",
                     "inChannel", "send", "receive", "lose")
STATES_SET = "States"
DONE = "done"

_NO_SPAN = SourceSpan("<model>", 1, 1)


def _span(node) -> SourceSpan:
    span = getattr(node, "span", None)
    return span if span is not None else _NO_SPAN


@dataclass
class EventInfo:
    """One checked event with its classification and guard split."""

    decl: EventDecl
    kind: EventKind
    class_name: str
    proc_param: str
    state: str
    params: tuple[tuple[str, Expr], ...]          # non-proc params with domains
    other_guards: tuple[tuple[str, Expr], ...]    # non-pc, non-typing, in order
    match_guards: tuple[tuple[str, Expr], ...]    # receive only: param -> pattern
    src_param: str | None = None                  # receive only
    msg_param: str | None = None                  # receive only

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def general_guards(self) -> tuple[tuple[str, Expr], ...]:
        return tuple(g for g in self.other_guards if not _is_history_atom(g[1]))

    @property
    def history_guards(self) -> tuple[tuple[str, Expr], ...]:
        return tuple(g for g in self.other_guards if _is_history_atom(g[1]))

    @property
    def local_assigns(self) -> tuple[LocalAssign, ...]:
        return tuple(a for a in self.decl.actions if isinstance(a, LocalAssign))

    @property
    def channel_action(self) -> ChannelAssign | None:
        for a in self.decl.actions:
            if isinstance(a, ChannelAssign):
                return a
        return None


@dataclass
class ProcessClassInfo:
    name: str
    explicit_members: tuple[str, ...]
    local_constants: tuple[str, ...]      # setup parameter order
    local_enum_sets: tuple[str, ...]
    local_variables: tuple[str, ...]      # declaration order, pc included
    states: tuple[str, ...]               # pc-guard states plus done, done last
    events_by_state: dict[str, list[EventInfo]] = field(default_factory=dict)
    init_exprs: tuple[tuple[str, str, Expr], ...] = ()   # (var, binder, expr)

    def events(self) -> list[EventInfo]:
        return [ev for evs in self.events_by_state.values() for ev in evs]


@dataclass
class TopologyEntry:
    class_name: str
    binder: str
    expr: Expr


@dataclass
class EnumSetInfo:
    name: str
    elems: tuple[str, ...]
    annotations: tuple[str, ...]


@dataclass
class UnboundConstant:
    """Constant with a typing axiom but no value axiom: a configuration hole."""

    name: str
    domain_class: str | None       # set when typed Class --> T or Nodes --> T
    typing: Expr


@dataclass
class ConstantValue:
    """Value axiom of a constant: per-class comprehensions or a scalar."""

    name: str
    comprehensions: tuple[tuple[str, str, Expr], ...] | None   # (class, binder, expr)
    scalar: Expr | None


@dataclass
class AnalyzedProgram:
    context: ContextModel
    machine: MachineModel
    classes: list[ProcessClassInfo]
    topology: list[TopologyEntry]
    enums: list[EnumSetInfo]
    states: tuple[str, ...]                     # declared States members, in order
    unbound_constants: list[UnboundConstant]
    constant_values: list[ConstantValue]
    class_of_member: dict[str, str]
    invariants: tuple[tuple[str, Expr], ...]    # resolved machine invariants
    warnings: list[Diagnostic] = field(default_factory=list)

    def class_named(self, name: str) -> ProcessClassInfo:
        for cls in self.classes:
            if cls.name == name:
                return cls
        raise KeyError(name)

    def hole_names(self) -> list[str]:
        """Configuration holes: sizes of unenumerated classes, then unbound
        constants, in declaration order."""
        names = [f"N{cls.name}" for cls in self.classes if not cls.explicit_members]
        names.extend(u.name for u in self.unbound_constants)
        return names


def _is_history_atom(e: Expr) -> bool:
    return (isinstance(e, Binary) and e.op in (BinOp.GT, BinOp.EQ)
            and isinstance(e.left, ast.ChannelCall)
            and e.left.kind in (ChannelKind.SENT, ChannelKind.RECEIVED)
            and e.right == IntLit(0))


def _flatten_union(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op is BinOp.UNION:
        return _flatten_union(e.left) + [e.right]
    return [e]


def _singleton_blocks(p: Partition) -> list[str] | None:
    """Member names when every block after the first arg is a {name} singleton."""
    members = []
    for block in p.args[1:]:
        if not (isinstance(block, SetExt) and len(block.elems) == 1
                and isinstance(block.elems[0], Var)):
            return None
        members.append(block.elems[0].name)
    return members


class _Resolver:
    """Rewrites Var references to enumerated-set members into EnumElem."""

    def __init__(self, elem_to_set: dict[str, str]):
        self.elem_to_set = elem_to_set

    def resolve(self, e: Expr, shadow: frozenset[str] = frozenset()) -> Expr:
        if isinstance(e, Var):
            if e.name in self.elem_to_set and e.name not in shadow:
                return EnumElem(self.elem_to_set[e.name], e.name)
            return e
        if isinstance(e, (IntLit, ast.BoolLit, EnumElem, ast.NatSet)):
            return e
        if isinstance(e, Apply):
            return Apply(self.resolve(e.fn, shadow), self.resolve(e.arg, shadow))
        if isinstance(e, Maplet):
            return Maplet(self.resolve(e.left, shadow), self.resolve(e.right, shadow))
        if isinstance(e, Binary):
            return Binary(e.op, self.resolve(e.left, shadow), self.resolve(e.right, shadow))
        if isinstance(e, ast.Not):
            return ast.Not(self.resolve(e.operand, shadow))
        if isinstance(e, SetExt):
            return SetExt(tuple(self.resolve(el, shadow) for el in e.elems))
        if isinstance(e, SetComprehension):
            inner = shadow | {e.binder}
            return SetComprehension(
                e.binder, self.resolve(e.domain, shadow),
                None if e.filter is None else self.resolve(e.filter, inner),
                self.resolve(e.body, inner))
        if isinstance(e, Quantifier):
            binders = []
            inner = shadow
            for name, dom in e.binders:
                binders.append((name, self.resolve(dom, inner)))
                inner = inner | {name}
            return Quantifier(e.kind, tuple(binders), self.resolve(e.body, inner))
        if isinstance(e, ast.Interval):
            return ast.Interval(self.resolve(e.lo, shadow), self.resolve(e.hi, shadow))
        if isinstance(e, ast.Card):
            return ast.Card(self.resolve(e.operand, shadow))
        if isinstance(e, ast.ChannelCall):
            return ast.ChannelCall(e.kind, self.resolve(e.src, shadow),
                                   self.resolve(e.dst, shadow),
                                   self.resolve(e.msg, shadow))
        if isinstance(e, ast.FuncOverride):
            return ast.FuncOverride(self.resolve(e.base, shadow),
                                    self.resolve(e.updates, shadow))
        if isinstance(e, Partition):
            return Partition(tuple(self.resolve(a, shadow) for a in e.args))
        if isinstance(e, Pow):
            return Pow(self.resolve(e.operand, shadow))
        raise TypeError(f"cannot resolve {e!r}")


class _Analysis:
    def __init__(self, ctx: ContextModel, mch: MachineModel):
        self.ctx = ctx
        self.mch = mch
        self.diags: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []
        self.class_names: list[str] = []
        self.class_members: dict[str, tuple[str, ...]] = {}
        self.class_of_member: dict[str, str] = {}
        self.states: tuple[str, ...] = ()
        self.enums: list[EnumSetInfo] = []
        self.elem_to_set: dict[str, str] = {}
        self.resolver: _Resolver | None = None
        self.topology: list[TopologyEntry] = []
        self.const_typing: dict[str, Expr] = {}
        self.const_domain_class: dict[str, str | None] = {}
        self.annotated_constants: dict[str, tuple[str, ...]] = {}
        self.constant_values: list[ConstantValue] = []
        self.unbound: list[UnboundConstant] = []
        self.local_constants: dict[str, tuple[str, ...]] = {}
        self.local_enum_sets: dict[str, tuple[str, ...]] = {}
        self.local_variables: dict[str, tuple[str, ...]] = {}

    def err(self, code: str, message: str, node=None) -> None:
        self.diags.append(error(code, message, _span(node)))

    def warn(self, code: str, message: str, node=None) -> None:
        self.warnings.append(warning(code, message, _span(node)))

    # -- context phases ------------------------------------------------------

    def check_builtins(self) -> None:
        for s in BUILTIN_SETS:
            if s not in self.ctx.sets:
                self.err(codes.E_MISSING_BUILTIN, f"carrier set {s!r} must be declared",
                         self.ctx)
        for c in BUILTIN_CONSTANTS:
            if c not in self.ctx.constants:
                self.err(codes.E_MISSING_BUILTIN,
                         f"communication constant {c!r} must be declared", self.ctx)
        for v in ("pc", "channels"):
            if v not in self.mch.variables:
                self.err(codes.E_MISSING_BUILTIN, f"variable {v!r} must be declared",
                         self.mch)

    def check_axiom_references(self) -> None:
        declared = set(self.ctx.sets) | set(self.ctx.constants)
        for ax in self.ctx.axioms:
            for name in sorted(free_vars(ax.predicate)):
                if name not in declared:
                    self.err(codes.E_UNDECLARED_REF,
                             f"axiom {ax.label!r} references undeclared name {name!r}",
                             ax)

    def extract_classes(self) -> None:
        ax = self.ctx.axiom("Nodes")
        if ax is None or not (isinstance(ax.predicate, Partition)
                              and ax.predicate.args
                              and ax.predicate.args[0] == Var("Nodes")):
            self.err(codes.E_NO_NODES_AXIOM,
                     "context needs an axiom Nodes: partition(Nodes, PCl1, ...)",
                     ax or self.ctx)
            return
        names: list[str] = []
        for block in ax.predicate.args[1:]:
            if not isinstance(block, Var):
                self.err(codes.E_MALFORMED_PARTITION,
                         "Nodes partition blocks must be process-class constants", ax)
                return
            if block.name in names:
                self.err(codes.E_MALFORMED_PARTITION,
                         f"duplicate partition block {block.name!r}", ax)
                return
            if block.name not in self.ctx.constants:
                self.err(codes.E_MALFORMED_PARTITION,
                         f"process class {block.name!r} is not a declared constant", ax)
                return
        self.class_names = [b.name for b in ax.predicate.args[1:]]
        for cls in self.class_names:
            members: tuple[str, ...] = ()
            member_ax = self.ctx.axiom(cls)
            if member_ax is not None and isinstance(member_ax.predicate, Partition) \
                    and member_ax.predicate.args[:1] == (Var(cls),):
                names_or_none = _singleton_blocks(member_ax.predicate)
                if names_or_none is None or len(set(names_or_none)) != len(names_or_none):
                    self.err(codes.E_MALFORMED_PARTITION,
                             f"class {cls!r} must be partitioned into distinct "
                             "singleton processes", member_ax)
                    continue
                members = tuple(names_or_none)
            self.class_members[cls] = members
            for m in members:
                self.class_of_member[m] = cls

    def extract_states(self) -> None:
        ax = self.ctx.axiom(STATES_SET)
        if ax is None or not (isinstance(ax.predicate, Partition)
                              and ax.predicate.args[:1] == (Var(STATES_SET),)):
            self.err(codes.E_MISSING_BUILTIN,
                     "context needs an axiom States: partition(States, {st}, ...)",
                     ax or self.ctx)
            return
        members = _singleton_blocks(ax.predicate)
        if members is None:
            self.err(codes.E_MALFORMED_PARTITION,
                     "States must be partitioned into singleton states", ax)
            return
        self.states = tuple(members)
        if DONE not in self.states:
            self.err(codes.E_NO_DONE_STATE,
                     "the terminal state 'done' must be a declared state", ax)

    def extract_enums(self) -> None:
        for s in self.ctx.sets:
            if s in BUILTIN_SETS:
                continue
            ax = self.ctx.axiom(s)
            if ax is None:
                continue
            if not (isinstance(ax.predicate, Partition)
                    and ax.predicate.args[:1] == (Var(s),)):
                continue
            members = _singleton_blocks(ax.predicate)
            if members is None:
                self.err(codes.E_MALFORMED_PARTITION,
                         f"enumerated set {s!r} must be partitioned into singletons", ax)
                continue
            self.enums.append(EnumSetInfo(s, tuple(members), ax.annotations))

    def check_annotations(self) -> None:
        for ax in self.ctx.axioms:
            for ann in ax.annotations:
                if ann not in self.class_names:
                    self.err(codes.E_UNKNOWN_ANNOTATION,
                             f"annotation @{ann} on axiom {ax.label!r} is not a "
                             "declared process class", ax)

    def build_resolver(self) -> None:
        for info in self.enums:
            for elem in info.elems:
                self.elem_to_set[elem] = info.name
        for st in self.states:
            self.elem_to_set[st] = STATES_SET
        self.resolver = _Resolver(self.elem_to_set)

    def extract_topology(self) -> None:
        if self.ctx.axiom("network_typing") is None:
            self.err(codes.E_NO_TOPOLOGY,
                     "context needs an axiom network_typing: network in Nodes --> POW(Nodes)",
                     self.ctx)
        ax = self.ctx.axiom("network_value")
        if ax is None:
            self.err(codes.E_NO_TOPOLOGY,
                     "context needs an axiom network_value defining the topology",
                     self.ctx)
            return
        entries = self._value_comprehensions(ax, "network")
        if entries is None:
            return
        covered = [e.class_name for e in entries]
        if sorted(covered) != sorted(self.class_names) or len(set(covered)) != len(covered):
            self.err(codes.E_NO_TOPOLOGY,
                     "network_value must cover every process class exactly once", ax)
            return
        self.topology = entries

    def _value_comprehensions(self, ax: Axiom, cst: str) -> list[TopologyEntry] | None:
        """Parse ``cst = {x . x in PCl | x |-> expr} \\/ ...`` value axioms."""
        pred = ax.predicate
        if not (isinstance(pred, Binary) and pred.op is BinOp.EQ
                and pred.left == Var(cst)):
            self.err(codes.E_BAD_INIT, f"axiom {ax.label!r} must have the form "
                     f"{cst} = ...", ax)
            return None
        entries: list[TopologyEntry] = []
        for part in _flatten_union(pred.right):
            if not (isinstance(part, SetComprehension) and part.filter is None
                    and isinstance(part.domain, Var)
                    and part.domain.name in self.class_names
                    and isinstance(part.body, Maplet)
                    and part.body.left == Var(part.binder)):
                self.err(codes.E_BAD_INIT,
                         f"axiom {ax.label!r} must be a union of per-class "
                         "comprehensions {x . x in PCl | x |-> expr}", ax)
                return None
            expr = self.resolver.resolve(part.body.right, frozenset({part.binder}))
            entries.append(TopologyEntry(part.domain.name, part.binder, expr))
        return entries

    def extract_constants(self) -> None:
        skip = set(BUILTIN_CONSTANTS) | set(self.class_names) | {"network"}
        skip |= set(self.class_of_member)
        skip |= set(self.elem_to_set)
        for cst in self.ctx.constants:
            if cst in skip:
                continue
            typing_ax = self.ctx.axiom(f"{cst}_typing")
            if typing_ax is None:
                self.err(codes.E_UNTYPED_CONSTANT,
                         f"constant {cst!r} needs a typing axiom {cst}_typing",
                         self.ctx)
                continue
            self.const_typing[cst] = typing_ax.predicate
            self.const_domain_class[cst] = self._domain_class(typing_ax.predicate, cst)
            if typing_ax.annotations:
                self.annotated_constants[cst] = typing_ax.annotations
            value_ax = self.ctx.axiom(f"{cst}_value")
            if value_ax is None:
                self.unbound.append(UnboundConstant(
                    cst, self.const_domain_class[cst], typing_ax.predicate))
                continue
            if self.const_domain_class[cst] is not None:
                entries = self._value_comprehensions(value_ax, cst)
                if entries is not None:
                    self.constant_values.append(ConstantValue(
                        cst, tuple((e.class_name, e.binder, e.expr) for e in entries),
                        None))
            else:
                pred = value_ax.predicate
                if isinstance(pred, Binary) and pred.op is BinOp.EQ \
                        and pred.left == Var(cst):
                    self.constant_values.append(ConstantValue(
                        cst, None, self.resolver.resolve(pred.right)))
                else:
                    self.err(codes.E_BAD_INIT,
                             f"axiom {cst}_value must have the form {cst} = expr",
                             value_ax)

    def _domain_class(self, typing: Expr, name: str) -> str | None:
        """Class domain when typed name in (PCl|Nodes) --> T, else None."""
        if (isinstance(typing, Binary) and typing.op is BinOp.IN
                and typing.left == Var(name)
                and isinstance(typing.right, Binary)
                and typing.right.op in (BinOp.TFUN, BinOp.PFUN)
                and isinstance(typing.right.left, Var)
                and typing.right.left.name in (*self.class_names, "Nodes")):
            return typing.right.left.name
        return None

    def compute_local_constants(self) -> None:
        for cls in self.class_names:
            consts: list[str] = []
            if self.topology:
                consts.append("network")
            for cst in self.ctx.constants:
                if cst in ("network", *BUILTIN_CONSTANTS):
                    continue
                domain = self.const_domain_class.get(cst)
                annotated = cls in self.annotated_constants.get(cst, ())
                if domain in (cls, "Nodes") or annotated:
                    consts.append(cst)
            self.local_constants[cls] = tuple(consts)
            self.local_enum_sets[cls] = tuple(
                info.name for info in self.enums if cls in info.annotations)

    # -- machine phases -------------------------------------------------------

    def compute_local_variables(self) -> None:
        inv_by_label = dict(self.mch.invariants)
        for var in self.mch.variables:
            if f"{var}_typing" not in inv_by_label:
                self.err(codes.E_UNTYPED_VARIABLE,
                         f"variable {var!r} needs a typing invariant {var}_typing",
                         self.mch)
        for cls in self.class_names:
            out = []
            for var in self.mch.variables:
                if var == "channels":
                    continue
                typing = inv_by_label.get(f"{var}_typing")
                if typing is not None and self._domain_class(typing, var) in (cls, "Nodes"):
                    out.append(var)
            self.local_variables[cls] = tuple(out)

    def check_initialisation(self) -> dict[str, list[tuple[str, str, Expr]]]:
        """Validate initialisation; returns class -> [(var, binder, expr)]."""
        per_class: dict[str, list[tuple[str, str, Expr]]] = {
            cls: [] for cls in self.class_names}
        assigned: set[str] = set()
        for init in self.mch.initialisation:
            if init.var in assigned:
                self.err(codes.E_BAD_INIT,
                         f"variable {init.var!r} initialised more than once", init)
                continue
            assigned.add(init.var)
            if init.var not in self.mch.variables:
                self.err(codes.E_BAD_INIT,
                         f"initialisation of undeclared variable {init.var!r}", init)
                continue
            if init.var == "channels":
                if init.rhs != Var("emptyChannel"):
                    self.err(codes.E_BAD_INIT,
                             "channels must be initialised to emptyChannel", init)
                continue
            expected = {cls for cls in self.class_names
                        if init.var in self.local_variables.get(cls, ())}
            seen: set[str] = set()
            ok = True
            for part in _flatten_union(init.rhs):
                if not (isinstance(part, SetComprehension) and part.filter is None
                        and isinstance(part.domain, Var)
                        and part.domain.name in self.class_names
                        and isinstance(part.body, Maplet)
                        and part.body.left == Var(part.binder)):
                    self.err(codes.E_BAD_INIT,
                             f"initialisation of {init.var!r} must be a union of "
                             "per-class comprehensions {x . x in PCl | x |-> expr}",
                             init)
                    ok = False
                    break
                cls = part.domain.name
                seen.add(cls)
                expr = self.resolver.resolve(part.body.right, frozenset({part.binder}))
                self._check_local_expr(expr, cls, {part.binder},
                                       f"initialisation of {init.var!r}", init)
                per_class[cls].append((init.var, part.binder, expr))
            if ok and seen != expected:
                self.err(codes.E_BAD_INIT,
                         f"initialisation of {init.var!r} must cover exactly the "
                         f"classes it is local to ({', '.join(sorted(expected)) or 'none'})",
                         init)
        for var in self.mch.variables:
            if var not in assigned:
                self.err(codes.E_UNINITIALISED,
                         f"variable {var!r} is never initialised", self.mch)
        return per_class

    def _check_local_expr(self, expr: Expr, cls: str, extra: set[str],
                          where: str, node) -> None:
        """Locality: only local constants/variables, given binders, literals."""
        allowed = set(self.local_constants.get(cls, ()))
        allowed |= set(self.local_variables.get(cls, ()))
        allowed |= extra
        for name in sorted(free_vars(expr)):
            if name not in allowed:
                self.err(codes.E_NONLOCAL_REF,
                         f"{where} uses {name!r}, which is not local to class {cls}",
                         node)
        for sub in walk(expr):
            if isinstance(sub, EnumElem) and sub.set_name != STATES_SET:
                if cls not in dict((e.name, e.annotations) for e in self.enums).get(
                        sub.set_name, ()):
                    self.err(codes.E_NONLOCAL_REF,
                             f"{where} uses {sub.elem!r} of set {sub.set_name}, "
                             f"which is not annotated @{cls}", node)

    def check_event(self, ev: EventDecl) -> EventInfo | None:
        resolver = self.resolver
        guards = [(label, resolver.resolve(g, frozenset(ev.params)))
                  for label, g in ev.guards]

        # Process parameter: the unique parameter typed by a class membership.
        proc_candidates = []
        for label, g in guards:
            if (isinstance(g, Binary) and g.op is BinOp.IN
                    and isinstance(g.left, Var) and g.left.name in ev.params
                    and isinstance(g.right, Var) and g.right.name in self.class_names):
                proc_candidates.append((g.left.name, g.right.name))
        if not proc_candidates:
            self.err(codes.E_NO_PROC_PARAM,
                     f"event {ev.name!r} needs a parameter typed by a process class",
                     ev)
            return None
        if len({p for p, _ in proc_candidates}) > 1:
            self.err(codes.E_MULTI_PROC_PARAM,
                     f"event {ev.name!r} has more than one class-typed parameter", ev)
            return None
        proc_param, class_name = proc_candidates[0]

        # Typing guards: exactly one per parameter.
        typing_guards: dict[str, Expr] = {}
        special: set[int] = set()
        for i, (label, g) in enumerate(guards):
            if (isinstance(g, Binary) and g.op is BinOp.IN
                    and isinstance(g.left, Var) and g.left.name in ev.params):
                if g.left.name in typing_guards:
                    self.err(codes.E_MULTI_TYPING_GUARD,
                             f"parameter {g.left.name!r} of event {ev.name!r} has "
                             "more than one typing guard", ev)
                else:
                    typing_guards[g.left.name] = g.right
                special.add(i)
        missing = [p for p in ev.params if p not in typing_guards]
        for p in missing:
            self.err(codes.E_NO_TYPING_GUARD,
                     f"parameter {p!r} of event {ev.name!r} has no typing guard", ev)

        # pc guard: pc(proc) = st.
        pc_guards = []
        for i, (label, g) in enumerate(guards):
            if (isinstance(g, Binary) and g.op is BinOp.EQ
                    and isinstance(g.left, Apply) and g.left.fn == Var("pc")):
                pc_guards.append((label, g))
                special.add(i)
        state = None
        if not pc_guards:
            self.err(codes.E_NO_PC_GUARD,
                     f"event {ev.name!r} needs a guard pc({proc_param}) = st", ev)
        elif len(pc_guards) > 1:
            self.err(codes.E_MULTI_PC_GUARD,
                     f"event {ev.name!r} has more than one pc guard", ev)
        else:
            _, g = pc_guards[0]
            if g.left.arg != Var(proc_param):
                self.err(codes.E_BAD_PC_GUARD,
                         f"pc guard of event {ev.name!r} must test "
                         f"pc({proc_param})", ev)
            elif not (isinstance(g.right, EnumElem) and g.right.set_name == STATES_SET):
                self.err(codes.E_BAD_PC_GUARD,
                         f"pc guard of event {ev.name!r} must compare against a "
                         "declared state", ev)
            else:
                state = g.right.elem
        if state is None or missing:
            return None

        other = [(label, g) for i, (label, g) in enumerate(guards)
                 if i not in special]

        try:
            kind = classify_event(ev)
        except AmbiguousKind:
            self.err(codes.E_AMBIGUOUS_KIND,
                     f"event {ev.name!r} has both send and receive actions", ev)
            return None
        channel_actions = [a for a in ev.actions if isinstance(a, ChannelAssign)]
        if len(channel_actions) > 1:
            self.err(codes.E_MULTI_CHANNEL_ACTION,
                     f"event {ev.name!r} has more than one channel action", ev)
            return None

        info = EventInfo(
            decl=self._resolve_event_actions(ev),
            kind=kind, class_name=class_name, proc_param=proc_param, state=state,
            params=tuple((p, resolver.resolve(typing_guards[p], frozenset(ev.params)))
                         for p in ev.params if p != proc_param),
            other_guards=tuple(other), match_guards=())

        if kind is EventKind.RECEIVE:
            self._check_receive(info, other)
        else:
            self._check_internal_send(info, other)
        self._check_event_locality(info)
        return info

    def _resolve_event_actions(self, ev: EventDecl) -> EventDecl:
        shadow = frozenset(ev.params)
        actions: list[ast.Action] = []
        for a in ev.actions:
            if isinstance(a, LocalAssign):
                actions.append(LocalAssign(a.label, a.var, a.proc,
                                           self.resolver.resolve(a.rhs, shadow)))
            else:
                actions.append(ChannelAssign(a.label, a.kind,
                                             self.resolver.resolve(a.src, shadow),
                                             self.resolver.resolve(a.dst, shadow),
                                             self.resolver.resolve(a.msg, shadow)))
        return EventDecl(ev.name, ev.params, ev.guards, tuple(actions), span=ev.span)

    def _check_receive(self, info: EventInfo, other) -> None:
        ev = info.decl
        action = info.channel_action
        if action.dst != Var(info.proc_param):
            self.err(codes.E_CHANNEL_ORIENTATION,
                     f"receive in event {ev.name!r} must have the form "
                     f"receive(channels |-> (src |-> {info.proc_param}) |-> msg)", ev)
            return
        if not (isinstance(action.src, Var) and action.src.name in ev.params
                and isinstance(action.msg, Var) and action.msg.name in ev.params):
            self.err(codes.E_BAD_RECEIVE_SHAPE,
                     f"receive in event {ev.name!r} must name source and message "
                     "parameters", ev)
            return
        info.src_param = action.src.name
        info.msg_param = action.msg.name
        match_guards = []
        for label, g in other:
            if (isinstance(g, Binary) and g.op is BinOp.EQ
                    and g.left in (Var(info.src_param), Var(info.msg_param))):
                match_guards.append((g.left.name, g.right))
                for sub in walk(g.right):
                    if isinstance(sub, ast.ChannelCall):
                        self.err(codes.E_UNSUPPORTED_HISTORY,
                                 f"matching guard {label!r} of event {ev.name!r} "
                                 "may not query message history", ev)
            else:
                self.err(codes.E_RECV_GENERAL_GUARD,
                         f"receive event {ev.name!r} may only carry matching guards "
                         f"for {info.src_param!r} and {info.msg_param!r} "
                         f"(guard {label!r} is not one)", ev)
        info.match_guards = tuple(match_guards)
        info.other_guards = ()
        self._check_actions(info)

    def _check_internal_send(self, info: EventInfo, other) -> None:
        ev = info.decl
        action = info.channel_action
        if action is not None and action.src != Var(info.proc_param):
            self.err(codes.E_CHANNEL_ORIENTATION,
                     f"send in event {ev.name!r} must have the form "
                     f"send(channels |-> ({info.proc_param} |-> dest) |-> msg)", ev)
        for label, g in other:
            self._check_history_atoms(g, info, label)
        self._check_actions(info)

    def _check_history_atoms(self, g: Expr, info: EventInfo, label: str) -> None:
        """sent/received queries may only occur as > 0 or = 0 atoms."""
        if _is_history_atom(g):
            call = g.left
            if call.kind is ChannelKind.SENT and call.src != Var(info.proc_param):
                self.err(codes.E_CHANNEL_ORIENTATION,
                         f"sent query in guard {label!r} of event {info.name!r} "
                         f"must have source {info.proc_param!r}", info.decl)
            if call.kind is ChannelKind.RECEIVED and call.dst != Var(info.proc_param):
                self.err(codes.E_CHANNEL_ORIENTATION,
                         f"received query in guard {label!r} of event {info.name!r} "
                         f"must have destination {info.proc_param!r}", info.decl)
            for sub, _ in ast.children(call):
                self._check_history_atoms(sub, info, label)
            return
        if isinstance(g, ast.ChannelCall):
            self.err(codes.E_UNSUPPORTED_HISTORY,
                     f"guard {label!r} of event {info.name!r} uses "
                     f"{g.kind.value}(...) outside a '> 0' or '= 0' comparison",
                     info.decl)
            return
        for sub, _ in ast.children(g):
            self._check_history_atoms(sub, info, label)

    def _check_actions(self, info: EventInfo) -> None:
        ev = info.decl
        assigned: set[str] = set()
        for action in info.local_assigns:
            if action.proc is None:
                self.err(codes.E_BAD_ACTION,
                         f"action {action.label!r} of event {ev.name!r} must have "
                         f"the form x({info.proc_param}) := expr", ev)
                continue
            if action.proc != info.proc_param:
                self.err(codes.E_FOREIGN_ASSIGN,
                         f"action {action.label!r} of event {ev.name!r} assigns "
                         f"{action.var}({action.proc}); only the process parameter "
                         f"{info.proc_param!r} may be updated", ev)
                continue
            if action.var not in self.local_variables.get(info.class_name, ()):
                self.err(codes.E_NONLOCAL_REF,
                         f"action {action.label!r} of event {ev.name!r} assigns "
                         f"{action.var!r}, which is not local to class "
                         f"{info.class_name}", ev)
                continue
            if action.var in assigned:
                self.err(codes.E_BAD_ACTION,
                         f"event {ev.name!r} assigns {action.var!r} twice", ev)
            assigned.add(action.var)

    def _check_event_locality(self, info: EventInfo) -> None:
        ev = info.decl
        extra = set(ev.params)
        for label, g in info.other_guards:
            self._check_local_expr(g, info.class_name, extra,
                                   f"guard {label!r} of event {ev.name!r}", ev)
        for param, pattern in info.match_guards:
            self._check_local_expr(pattern, info.class_name, extra,
                                   f"matching guard for {param!r} of event "
                                   f"{ev.name!r}", ev)
        for action in info.local_assigns:
            if action.proc == info.proc_param:
                self._check_local_expr(action.rhs, info.class_name, extra,
                                       f"action {action.label!r} of event "
                                       f"{ev.name!r}", ev)
        action = info.channel_action
        if action is not None:
            self._check_local_expr(action.msg, info.class_name, extra,
                                   f"message of event {ev.name!r}", ev)
            self._check_local_expr(action.peer, info.class_name, extra,
                                   f"peer of event {ev.name!r}", ev)

    # -- assembly --------------------------------------------------------------

    def run(self) -> AnalyzedProgram:
        if self.mch.sees != self.ctx.name:
            self.warn(codes.E_UNDECLARED_REF,
                      f"machine sees {self.mch.sees!r} but the context is "
                      f"{self.ctx.name!r}", self.mch)
        self.check_builtins()
        self.check_axiom_references()
        self.extract_classes()
        self.extract_states()
        self.extract_enums()
        self.check_annotations()
        self.build_resolver()
        if self.diags:
            raise AnalysisFailure(self.diags)
        self.extract_topology()
        self.extract_constants()
        self.compute_local_constants()
        self.compute_local_variables()
        init_per_class = self.check_initialisation()

        infos: list[EventInfo] = []
        for ev in self.mch.events:
            info = self.check_event(ev)
            if info is not None:
                infos.append(info)
        if self.diags:
            raise AnalysisFailure(self.diags)

        classes: list[ProcessClassInfo] = []
        for cls in self.class_names:
            states: list[str] = []
            by_state: dict[str, list[EventInfo]] = {}
            for info in infos:
                if info.class_name != cls:
                    continue
                if info.state == DONE:
                    self.warn(codes.W_DONE_EVENT,
                              f"event {info.name!r} is observable in the terminal "
                              "state 'done'", info.decl)
                if info.state not in states:
                    states.append(info.state)
                by_state.setdefault(info.state, []).append(info)
            if DONE in states:
                states.remove(DONE)
            states.append(DONE)
            # Initialisation entries ordered by variable declaration order.
            init_exprs = tuple(sorted(
                init_per_class[cls],
                key=lambda item: self.mch.variables.index(item[0])))
            classes.append(ProcessClassInfo(
                name=cls,
                explicit_members=self.class_members.get(cls, ()),
                local_constants=self.local_constants[cls],
                local_enum_sets=self.local_enum_sets[cls],
                local_variables=self.local_variables[cls],
                states=tuple(states),
                events_by_state=by_state,
                init_exprs=init_exprs,
            ))

        invariants = tuple((label, self.resolver.resolve(inv))
                           for label, inv in self.mch.invariants)
        return AnalyzedProgram(
            context=self.ctx, machine=self.mch, classes=classes,
            topology=self.topology, enums=self.enums, states=self.states,
            unbound_constants=self.unbound, constant_values=self.constant_values,
            class_of_member=dict(self.class_of_member), invariants=invariants,
            warnings=self.warnings)


def analyze(ctx: ContextModel, mch: MachineModel) -> AnalyzedProgram:
    """Run the full analysis; raises AnalysisFailure on any violation."""
    return _Analysis(ctx, mch).run()


def extract_classes(ctx: ContextModel) -> list[tuple[str, tuple[str, ...]]]:
    """Process classes of the Nodes partition with any enumerated members."""
    analysis = _Analysis(ctx, _EMPTY_MACHINE)
    analysis.extract_classes()
    if analysis.diags:
        raise AnalysisFailure(analysis.diags)
    return [(cls, analysis.class_members[cls]) for cls in analysis.class_names]


def compute_local_constants(ctx: ContextModel, class_name: str) -> list[str]:
    """Constants local to a class: per-process functions and annotated
    constants in declaration order (network first), then annotated
    enumerated sets."""
    analysis = _Analysis(ctx, _EMPTY_MACHINE)
    analysis.extract_classes()
    analysis.extract_states()
    analysis.extract_enums()
    analysis.build_resolver()
    analysis.extract_topology()
    analysis.extract_constants()
    analysis.compute_local_constants()
    if class_name not in analysis.local_constants:
        raise KeyError(class_name)
    return list(analysis.local_constants[class_name]) + \
        list(analysis.local_enum_sets[class_name])


def compute_local_variables(mch: MachineModel, ctx: ContextModel,
                            class_name: str) -> list[str]:
    """Variables local to a class per their typing invariants; pc included,
    channels never."""
    analysis = _Analysis(ctx, mch)
    analysis.extract_classes()
    analysis.compute_local_variables()
    if class_name not in analysis.local_variables:
        raise KeyError(class_name)
    return list(analysis.local_variables[class_name])


_EMPTY_MACHINE = MachineModel("empty", "none", ("pc", "channels"), (), (), ())
