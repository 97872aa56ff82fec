"""DistAlgo-style source generation from an analyzed program.

Emits a main function (process-set creation, topology map, constant
initialisation, setup loops, start), one Enum module per enumerated set,
and one process class per declared class (setup/run, one method per
control state, one receive handler per receive event).

Output is deterministic: identical inputs produce byte-identical text.
Control states render as string literals; history guards render as
some(sent(...)) / some(received(...)) queries in which event parameters
and quantifier binders appear with a leading underscore, marking them
bound inside the query.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .analyzer import AnalyzedProgram, EventInfo, ProcessClassInfo
from .ast import (
    Apply,
    Binary,
    BinOp,
    BoolLit,
    Card,
    ChannelAssign,
    ChannelCall,
    ChannelKind,
    EnumElem,
    EventKind,
    Expr,
    FuncOverride,
    IntLit,
    Interval,
    LocalAssign,
    Maplet,
    Not,
    Quantifier,
    QuantKind,
    SetComprehension,
    SetExt,
    Var,
    free_vars,
    maplet_chain,
)

STATES_SET = "States"
DONE = "done"


class CodegenError(Exception):
    """A construct reached the generator that analysis should have rejected."""


@dataclass(frozen=True)
class GenConfig:
    """Translation context.

    bound_vars lists identifiers that are bound inside message-history
    queries (rendered with a leading underscore there); localize_for
    activates the self.f rewrite of f(proc) for the given class's local
    names; name_map substitutes free identifiers (used by the main
    function, where a class name denotes its process set).
    """

    bound_vars: frozenset[str] = frozenset()
    localize_for: tuple[str, str] | None = None   # (class name, proc parameter)
    indent: int = 4
    local_names: frozenset[str] = frozenset()
    name_map: dict[str, str] = field(default_factory=dict)
    read_redirect: dict[str, str] = field(default_factory=dict)
    in_query: bool = False


@dataclass
class GeneratedProgram:
    main_source: str
    class_sources: dict[str, str]
    enum_sources: dict[str, str]
    holes: list[tuple[str, str]]


# Python rendering precedence tiers (wider gaps than needed, for clarity).
_PY_OR, _PY_AND, _PY_NOT, _PY_CMP, _PY_BOR, _PY_BAND, _PY_ADD, _PY_MUL = \
    1, 2, 3, 4, 5, 6, 7, 8
_PY_ATOM = 99

_PY_OPS: dict[BinOp, tuple[str, int, str]] = {
    # op -> (python text, level, associativity)
    BinOp.OR: ("or", _PY_OR, "left"),
    BinOp.AND: ("and", _PY_AND, "left"),
    BinOp.EQ: ("==", _PY_CMP, "none"),
    BinOp.NE: ("!=", _PY_CMP, "none"),
    BinOp.LT: ("<", _PY_CMP, "none"),
    BinOp.LE: ("<=", _PY_CMP, "none"),
    BinOp.GT: (">", _PY_CMP, "none"),
    BinOp.GE: (">=", _PY_CMP, "none"),
    BinOp.IN: ("in", _PY_CMP, "none"),
    BinOp.NOTIN: ("not in", _PY_CMP, "none"),
    BinOp.SUBSETEQ: ("<=", _PY_CMP, "none"),
    BinOp.UNION: ("|", _PY_BOR, "left"),
    BinOp.INTER: ("&", _PY_BAND, "left"),
    BinOp.DIFF: ("-", _PY_ADD, "left"),
    BinOp.ADD: ("+", _PY_ADD, "left"),
    BinOp.SUB: ("-", _PY_ADD, "left"),
    BinOp.MUL: ("*", _PY_MUL, "left"),
    BinOp.DIV: ("//", _PY_MUL, "left"),
}


def translate_expr(e: Expr, cfg: GenConfig) -> str:
    """Render an expression as DistAlgo/Python source text."""
    return _render(e, cfg, 0)


def translate_expr_bound(e: Expr, cfg: GenConfig) -> str:
    """Like translate_expr, but identifiers in cfg.bound_vars render as _x."""
    return _render(e, replace(cfg, in_query=True), 0)


def _render(e: Expr, cfg: GenConfig, level: int) -> str:
    text, mine = _render_level(e, cfg)
    return f"({text})" if mine < level else text


def _render_level(e: Expr, cfg: GenConfig) -> tuple[str, int]:
    if isinstance(e, IntLit):
        return str(e.value), _PY_ATOM
    if isinstance(e, BoolLit):
        return ("True" if e.value else "False"), _PY_ATOM
    if isinstance(e, Var):
        name = e.name
        if cfg.in_query and name in cfg.bound_vars:
            return f"_{name}", _PY_ATOM
        if name in cfg.read_redirect:
            return cfg.read_redirect[name], _PY_ATOM
        return cfg.name_map.get(name, name), _PY_ATOM
    if isinstance(e, EnumElem):
        if e.set_name == STATES_SET:
            return f'"{e.elem}"', _PY_ATOM
        return f"{e.set_name}.{e.elem}", _PY_ATOM
    if isinstance(e, Apply):
        local = _localized(e, cfg)
        if local is not None:
            return local, _PY_ATOM
        return f"{_render(e.fn, cfg, _PY_ATOM)}[{_render(e.arg, cfg, 0)}]", _PY_ATOM
    if isinstance(e, Maplet):
        parts = [_render(p, cfg, 0) for p in maplet_chain(e)]
        return f"({', '.join(parts)})", _PY_ATOM
    if isinstance(e, Binary):
        query = _history_query(e, cfg)
        if query is not None:
            return query, _PY_ATOM
        if e.op is BinOp.IMPLIES:
            left = _render(e.left, cfg, _PY_NOT)
            right = _render(e.right, cfg, _PY_OR)
            return f"(not {left} or {right})", _PY_ATOM
        if e.op not in _PY_OPS:
            raise CodegenError(f"operator {e.op.value!r} has no runtime translation")
        text, lvl, assoc = _PY_OPS[e.op]
        if assoc == "left":
            lr = (lvl, lvl + 1)
        else:
            lr = (lvl + 1, lvl + 1)
        return (f"{_render(e.left, cfg, lr[0])} {text} "
                f"{_render(e.right, cfg, lr[1])}"), lvl
    if isinstance(e, Not):
        return f"not({_render(e.operand, cfg, 0)})", _PY_NOT
    if isinstance(e, SetExt):
        if not e.elems:
            return "{}", _PY_ATOM
        if all(isinstance(el, Maplet) for el in e.elems):
            items = []
            for el in e.elems:
                parts = maplet_chain(el)
                if len(parts) != 2:
                    raise CodegenError("only binary maplets form dictionary entries")
                items.append(f"{_render(parts[0], cfg, 0)}: {_render(parts[1], cfg, 0)}")
            return "{" + ", ".join(items) + "}", _PY_ATOM
        return "{" + ", ".join(_render(el, cfg, 0) for el in e.elems) + "}", _PY_ATOM
    if isinstance(e, SetComprehension):
        inner = replace(cfg, bound_vars=cfg.bound_vars | {e.binder})
        body = _render(e.body, inner, 0)
        domain = _render(e.domain, cfg, 0)
        if e.filter is None:
            return f"setof({body}, {e.binder} in {domain})", _PY_ATOM
        return (f"setof({body}, {e.binder} in {domain}, "
                f"{_render(e.filter, inner, 0)})"), _PY_ATOM
    if isinstance(e, Quantifier):
        fn = "each" if e.kind is QuantKind.FORALL else "some"
        inner = cfg
        binder_texts = []
        for name, domain in e.binders:
            binder_texts.append(f"{name} in {_render(domain, inner, 0)}")
            inner = replace(inner, bound_vars=inner.bound_vars | {name})
        return (f"{fn}({', '.join(binder_texts)}, "
                f"has={_render(e.body, inner, 0)})"), _PY_ATOM
    if isinstance(e, Interval):
        lo = _render(e.lo, cfg, 0)
        hi = _render(e.hi, cfg, _PY_ADD)
        return f"set(range({lo}, {hi} + 1))", _PY_ATOM
    if isinstance(e, Card):
        return f"len({_render(e.operand, cfg, 0)})", _PY_ATOM
    if isinstance(e, FuncOverride):
        base = _render(e.base, cfg, 0)
        updates = _render(e.updates, cfg, 0)
        return f"{{**{base}, **{updates}}}", _PY_ATOM
    if isinstance(e, ChannelCall):
        raise CodegenError(
            f"{e.kind.value}(...) may only appear in a '> 0' or '= 0' history "
            "guard or a channel action")
    raise CodegenError(f"no translation for {type(e).__name__}")


def _localized(e: Apply, cfg: GenConfig) -> str | None:
    """self.f for f(proc) when f is local to the class being generated."""
    if cfg.localize_for is None:
        return None
    _, proc_param = cfg.localize_for
    if (isinstance(e.fn, Var) and e.fn.name in cfg.local_names
            and e.arg == Var(proc_param)):
        name = e.fn.name
        if name in cfg.read_redirect:
            return cfg.read_redirect[name]
        return f"self.{name}"
    return None


def _history_query(e: Binary, cfg: GenConfig) -> str | None:
    """some(sent(...)) / some(received(...)) for '> 0' atoms, negated for '= 0'."""
    if not (isinstance(e.left, ChannelCall)
            and e.left.kind in (ChannelKind.SENT, ChannelKind.RECEIVED)
            and e.right == IntLit(0) and e.op in (BinOp.GT, BinOp.EQ)):
        return None
    call = e.left
    qcfg = replace(cfg, in_query=True)
    msg = message_tuple(call.msg, qcfg)
    if call.kind is ChannelKind.SENT:
        query = f"some(sent({msg}, to={_render(call.dst, qcfg, 0)}))"
    else:
        query = f"some(received({msg}, from_={_render(call.src, qcfg, 0)}))"
    if e.op is BinOp.EQ:
        return f"not({query})"
    return query


def message_tuple(msg: Expr, cfg: GenConfig) -> str:
    """Messages are tuples with the prefix first; unary ones keep a
    trailing comma, e.g. (MessagePrefixes.request, )."""
    parts = maplet_chain(msg)
    rendered = [_render(p, cfg, 0) for p in parts]
    if len(rendered) == 1:
        return f"({rendered[0]}, )"
    return f"({', '.join(rendered)})"


# -- process classes ----------------------------------------------------------


def _class_cfg(info: ProcessClassInfo, proc_param: str,
               bound: frozenset[str] = frozenset()) -> GenConfig:
    return GenConfig(
        bound_vars=bound,
        localize_for=(info.name, proc_param),
        local_names=frozenset(info.local_constants) | frozenset(info.local_variables),
    )


def _guard_condition(info: ProcessClassInfo, ev: EventInfo) -> str:
    cfg = _class_cfg(info, ev.proc_param,
                     bound=frozenset(ev.decl.params))
    head = f'self.pc == "{ev.state}"'
    guards = [translate_expr(g, cfg) for _, g in ev.other_guards]
    if ev.params:
        binders = ", ".join(
            f"{name} in {translate_expr(domain, cfg)}" for name, domain in ev.params)
        has = " and ".join(guards) if guards else "True"
        return f"{head} and some({binders}, has={has})"
    if guards:
        return head + " and " + " and ".join(guards)
    return head


def _inplace_update(action: LocalAssign, proc_param: str):
    """(key, value) when rhs is var(proc) \\/ {k |-> v} or var(proc) <+ {k |-> v}."""
    rhs = action.rhs
    if isinstance(rhs, Binary) and rhs.op is BinOp.UNION:
        base, updates = rhs.left, rhs.right
    elif isinstance(rhs, FuncOverride):
        base, updates = rhs.base, rhs.updates
    else:
        return None
    if (base == Apply(Var(action.var), Var(proc_param))
            and isinstance(updates, SetExt) and len(updates.elems) == 1
            and isinstance(updates.elems[0], Maplet)):
        pair = updates.elems[0]
        return pair.left, pair.right
    return None


def _action_reads(action: LocalAssign, info: ProcessClassInfo,
                  proc_param: str) -> set[str]:
    """Local variables the translated rhs reads; in-place updates read only
    their key and value parts."""
    local_vars = set(info.local_variables)
    pair = _inplace_update(action, proc_param)
    if pair is not None:
        return (free_vars(pair[0]) | free_vars(pair[1])) & local_vars
    return free_vars(action.rhs) & local_vars


def render_actions(info: ProcessClassInfo, ev: EventInfo, indent: str) -> list[str]:
    """Translate the event's actions as a statement sequence.

    All right-hand sides are meant to read the pre-state, so any local
    variable that is both written and read gets a deepcopy old_<var>
    first, with reads redirected to the copy.
    """
    assigns = [a for a in ev.decl.actions if isinstance(a, LocalAssign)]
    written = {a.var for a in assigns}
    read = set()
    for a in assigns:
        read |= _action_reads(a, info, ev.proc_param)
    need_copy = [v for v in info.local_variables if v in written and v in read]

    cfg = _class_cfg(info, ev.proc_param, bound=frozenset(ev.decl.params))
    body_cfg = replace(cfg, read_redirect={v: f"old_{v}" for v in need_copy})

    lines = [f"{indent}old_{v} = deepcopy(self.{v})" for v in need_copy]
    for action in ev.decl.actions:
        if isinstance(action, ChannelAssign):
            if action.kind is ChannelKind.SEND:
                msg = message_tuple(action.msg, body_cfg)
                dest = translate_expr(action.dst, body_cfg)
                lines.append(f"{indent}send({msg}, to={dest})")
            # A receive action is implicit in the receive handler itself.
            continue
        pair = _inplace_update(action, ev.proc_param)
        if pair is not None:
            key = translate_expr(pair[0], body_cfg)
            value = translate_expr(pair[1], body_cfg)
            lines.append(f"{indent}self.{action.var}[{key}] = {value}")
        else:
            lines.append(f"{indent}self.{action.var} = {translate_expr(action.rhs, body_cfg)}")
    if not lines:
        lines.append(f"{indent}pass")
    return lines


def gen_state_method(prog: AnalyzedProgram, class_name: str, state: str,
                     indent: int = 4) -> str:
    """Method run while pc == state: one branch per internal or send event
    in declaration order, an await head when the state can receive."""
    info = prog.class_named(class_name)
    events = info.events_by_state.get(state, [])
    branch_events = [ev for ev in events if ev.kind is not EventKind.RECEIVE]
    has_receive = any(ev.kind is EventKind.RECEIVE for ev in events)

    ind = " " * indent
    lines = [f"{ind}def {state}():"]
    if has_receive:
        lines.append(f"{ind * 2}--{state}")
    first_head = "if await" if has_receive else "if"
    if not branch_events:
        lines.append(f"{ind * 2}{first_head}(False):")
        lines.append(f"{ind * 3}pass")
    for i, ev in enumerate(branch_events):
        head = first_head if i == 0 else "elif"
        lines.append(f"{ind * 2}# event {ev.name}")
        lines.append(f"{ind * 2}{head}({_guard_condition(info, ev)}):")
        lines.extend(render_actions(info, ev, ind * 3))
    lines.append(f'{ind * 2}elif(self.pc != "{state}"):')
    lines.append(f"{ind * 3}pass")
    return "\n".join(lines)


def gen_receive_method(prog: AnalyzedProgram, class_name: str, ev: EventInfo,
                       indent: int = 4) -> str:
    """receive handler: message/source patterns from the matching guards,
    free pattern variables for unconstrained parts, at=(state, )."""
    info = prog.class_named(class_name)
    cfg = _class_cfg(info, ev.proc_param)
    patterns = dict(ev.match_guards)
    if ev.msg_param in patterns:
        msg = message_tuple(patterns[ev.msg_param], cfg)
    else:
        msg = ev.msg_param
    if ev.src_param in patterns:
        source = translate_expr(patterns[ev.src_param], cfg)
    else:
        source = ev.src_param
    ind = " " * indent
    lines = [f"{ind}def receive(msg={msg}, from_={source}, at=({ev.state}, )):"]
    lines.extend(render_actions(info, ev, ind * 2))
    return "\n".join(lines)


def gen_process_class(prog: AnalyzedProgram, class_name: str, indent: int = 4) -> str:
    info = prog.class_named(class_name)
    ind = " " * indent
    cfg = _class_cfg(info, "proc")

    parts: list[str] = []
    setup_params = ", ".join(info.local_constants)
    setup = [f"{ind}def setup({setup_params}):"]
    for var, binder, expr in info.init_exprs:
        var_cfg = _class_cfg(info, binder)
        setup.append(f"{ind * 2}self.{var} = {translate_expr(expr, var_cfg)}")
    if not info.init_exprs:
        setup.append(f"{ind * 2}pass")
    parts.append("\n".join(setup))

    run_states = [st for st in info.states if st != DONE]
    table = ", ".join(f'"{st}":{st}' for st in run_states)
    run = [f"{ind}def run():",
           f"{ind * 2}stateFunctions = {{{table}}}",
           f'{ind * 2}while (self.pc != "{DONE}"):',
           f"{ind * 3}stateFunctions[self.pc]()"]
    parts.append("\n".join(run))

    for st in run_states:
        parts.append(gen_state_method(prog, class_name, st, indent))
    for st in info.states:
        for ev in info.events_by_state.get(st, []):
            if ev.kind is EventKind.RECEIVE:
                parts.append(gen_receive_method(prog, class_name, ev, indent))

    return f"class {class_name}(process):\n" + "\n\n".join(parts) + "\n"


# -- enum modules --------------------------------------------------------------


def gen_enum_module(set_name: str, elems: tuple[str, ...] | list[str]) -> str:
    lines = [f"class {set_name}(Enum):"]
    for el in elems:
        lines.append(f'    {el} = "{el}"')
    return "\n".join(lines) + "\n"


# -- main function ---------------------------------------------------------------


def hole_marker(name: str) -> str:
    return f"#{name} - to be configured"


def collect_holes(prog: AnalyzedProgram) -> list[tuple[str, str]]:
    return [(name, hole_marker(name)) for name in prog.hole_names()]


def gen_main(prog: AnalyzedProgram, indent: int = 4) -> str:
    ind = " " * indent
    cfg = GenConfig(name_map={cls.name: f"{cls.name}Set" for cls in prog.classes})
    lines = ["def main():"]

    for cls in prog.classes:
        if cls.explicit_members:
            lines.append(f"{ind}N{cls.name} = {len(cls.explicit_members)}")
        else:
            lines.append(f"{ind}N{cls.name} = {hole_marker('N' + cls.name)}")
    lines.append("")

    for cls in prog.classes:
        lines.append(f"{ind}{cls.name}Set = new({cls.name}, num=N{cls.name})")
        if cls.explicit_members:
            names = ", ".join(cls.explicit_members)
            suffix = "," if len(cls.explicit_members) == 1 else ""
            lines.append(f"{ind}({names}{suffix}) = list({cls.name}Set)")
    lines.append("")

    sets = ", ".join(f"{cls.name}Set" for cls in prog.classes)
    lines.append(f"{ind}Nodes = set.union({sets})")
    lines.extend(_map_constant_lines("network",
                                     [(t.class_name, t.binder, t.expr)
                                      for t in prog.topology], cfg, ind))
    values = {cv.name: cv for cv in prog.constant_values}
    unbound = {u.name for u in prog.unbound_constants}
    for cst in prog.context.constants:
        if cst in values:
            cv = values[cst]
            if cv.comprehensions is not None:
                lines.extend(_map_constant_lines(cst, cv.comprehensions, cfg, ind))
            else:
                lines.append(f"{ind}{cst} = {translate_expr(cv.scalar, cfg)}")
        elif cst in unbound:
            lines.append(f"{ind}{cst} = {hole_marker(cst)}")
    lines.append("")

    for cls in prog.classes:
        lines.append(f"{ind}for proc in {cls.name}Set:")
        args = [f"{cst}[proc]" if _is_map_constant(prog, cst) else cst
                for cst in cls.local_constants]
        if len(args) == 1:
            tup = f"({args[0]},)"
        else:
            tup = "(" + ", ".join(args) + ")"
        lines.append(f"{ind * 2}setup({{proc}}, {tup})")
    lines.append(f"{ind}start(Nodes)")
    return "\n".join(lines) + "\n"


def _is_map_constant(prog: AnalyzedProgram, cst: str) -> bool:
    if cst == "network":
        return True
    for u in prog.unbound_constants:
        if u.name == cst:
            return u.domain_class is not None
    for cv in prog.constant_values:
        if cv.name == cst:
            return cv.comprehensions is not None
    return False


def _map_constant_lines(name: str, comprehensions, cfg: GenConfig,
                        ind: str) -> list[str]:
    lines = []
    for i, (class_name, binder, expr) in enumerate(comprehensions):
        value = translate_expr(expr, replace(
            cfg, bound_vars=cfg.bound_vars | {binder}))
        comp = f"{{{binder}:{value} for {binder} in {class_name}Set}}"
        if i == 0:
            lines.append(f"{ind}{name} = {comp}")
        else:
            lines.append(f"{ind}{name}.update({comp})")
    return lines


def generate(prog: AnalyzedProgram, indent: int = 4) -> GeneratedProgram:
    """Generate every output of the program: main, classes, enum modules."""
    return GeneratedProgram(
        main_source=gen_main(prog, indent),
        class_sources={cls.name: gen_process_class(prog, cls.name, indent)
                       for cls in prog.classes},
        enum_sources={e.name: gen_enum_module(e.name, e.elems) for e in prog.enums},
        holes=collect_holes(prog),
    )
