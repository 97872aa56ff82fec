"""Render models and expressions back to the .lbc/.lbm surface syntax.

The printer is precedence-aware: reparsing its output yields a tree
structurally identical to the one printed (resolved EnumElem nodes print
as their bare member name and reparse as Var, so round-tripping applies
to parser output, before analysis).
"""

from __future__ import annotations

from .ast import (
    Apply,
    Binary,
    BinOp,
    BoolLit,
    Card,
    ChannelAssign,
    ChannelCall,
    ContextModel,
    EnumElem,
    EventDecl,
    Expr,
    FuncOverride,
    IntLit,
    Interval,
    LocalAssign,
    MachineModel,
    Maplet,
    NatSet,
    Not,
    Partition,
    Pow,
    QuantKind,
    Quantifier,
    SetComprehension,
    SetExt,
    Var,
)

# Precedence tiers, weakest to tightest; mirrors the parser.
_IMPLIES, _OR, _AND, _NOT, _CMP, _ARROW, _SETOP, _IVL, _ADD, _MUL, _MAPLET, _APP = \
    range(1, 13)

_BINOP_LEVEL = {
    BinOp.IMPLIES: (_IMPLIES, "right"),
    BinOp.OR: (_OR, "left"),
    BinOp.AND: (_AND, "left"),
    BinOp.EQ: (_CMP, "none"), BinOp.NE: (_CMP, "none"),
    BinOp.LT: (_CMP, "none"), BinOp.LE: (_CMP, "none"),
    BinOp.GT: (_CMP, "none"), BinOp.GE: (_CMP, "none"),
    BinOp.IN: (_CMP, "none"), BinOp.NOTIN: (_CMP, "none"),
    BinOp.SUBSETEQ: (_CMP, "none"),
    BinOp.TFUN: (_ARROW, "right"), BinOp.PFUN: (_ARROW, "right"),
    BinOp.UNION: (_SETOP, "left"), BinOp.INTER: (_SETOP, "left"),
    BinOp.DIFF: (_SETOP, "left"), BinOp.CROSS: (_SETOP, "left"),
    BinOp.ADD: (_ADD, "left"), BinOp.SUB: (_ADD, "left"),
    BinOp.MUL: (_MUL, "left"), BinOp.DIV: (_MUL, "left"),
}


def expr_to_text(e: Expr, level: int = 0) -> str:
    text, my_level = _render(e)
    if my_level < level:
        return f"({text})"
    return text


def _render(e: Expr) -> tuple[str, int]:
    if isinstance(e, IntLit):
        return str(e.value), _APP
    if isinstance(e, BoolLit):
        return ("TRUE" if e.value else "FALSE"), _APP
    if isinstance(e, Var):
        return e.name, _APP
    if isinstance(e, EnumElem):
        return e.elem, _APP
    if isinstance(e, NatSet):
        return "NAT", _APP
    if isinstance(e, Apply):
        return f"{expr_to_text(e.fn, _APP)}({expr_to_text(e.arg)})", _APP
    if isinstance(e, Maplet):
        left = expr_to_text(e.left, _MAPLET)
        right = expr_to_text(e.right, _MAPLET + 1)
        return f"{left} |-> {right}", _MAPLET
    if isinstance(e, Binary):
        lvl, assoc = _BINOP_LEVEL[e.op]
        if assoc == "left":
            lr = (lvl, lvl + 1)
        elif assoc == "right":
            lr = (lvl + 1, lvl)
        else:
            lr = (lvl + 1, lvl + 1)
        return (f"{expr_to_text(e.left, lr[0])} {e.op.value} "
                f"{expr_to_text(e.right, lr[1])}"), lvl
    if isinstance(e, Not):
        return f"not {expr_to_text(e.operand, _NOT)}", _NOT
    if isinstance(e, SetExt):
        return "{" + ", ".join(expr_to_text(el) for el in e.elems) + "}", _APP
    if isinstance(e, SetComprehension):
        pred = f"{e.binder} in {expr_to_text(e.domain, _CMP + 1)}"
        if e.filter is not None:
            pred += f" & {expr_to_text(e.filter, _NOT)}"
        return "{" + f"{e.binder} . {pred} | {expr_to_text(e.body)}" + "}", _APP
    if isinstance(e, Quantifier):
        names = ", ".join(name for name, _ in e.binders)
        memberships = " & ".join(
            f"{name} in {expr_to_text(dom, _CMP + 1)}" for name, dom in e.binders)
        if e.kind is QuantKind.FORALL:
            return f"!{names} . {memberships} => {expr_to_text(e.body, _IMPLIES)}", 0
        return f"#{names} . {memberships} & {expr_to_text(e.body, _NOT)}", 0
    if isinstance(e, Interval):
        return (f"{expr_to_text(e.lo, _IVL + 1)} .. "
                f"{expr_to_text(e.hi, _IVL + 1)}"), _IVL
    if isinstance(e, Card):
        return f"card({expr_to_text(e.operand)})", _APP
    if isinstance(e, Pow):
        return f"POW({expr_to_text(e.operand)})", _APP
    if isinstance(e, Partition):
        return "partition(" + ", ".join(expr_to_text(a) for a in e.args) + ")", _APP
    if isinstance(e, ChannelCall):
        src = expr_to_text(e.src, _MAPLET + 1)
        dst = expr_to_text(e.dst, _MAPLET + 1)
        msg = expr_to_text(e.msg, _MAPLET + 1)
        return f"{e.kind.value}(channels |-> ({src} |-> {dst}) |-> {msg})", _APP
    if isinstance(e, FuncOverride):
        base = expr_to_text(e.base, _SETOP)
        updates = expr_to_text(e.updates, _SETOP + 1)
        return f"{base} <+ {updates}", _SETOP
    raise TypeError(f"cannot render {e!r}")


def action_to_text(action) -> str:
    if isinstance(action, ChannelAssign):
        call = ChannelCall(action.kind, action.src, action.dst, action.msg)
        return f"@{action.label}: channels := {expr_to_text(call)}"
    if isinstance(action, LocalAssign):
        target = action.var if action.proc is None else f"{action.var}({action.proc})"
        return f"@{action.label}: {target} := {expr_to_text(action.rhs)}"
    raise TypeError(f"cannot render {action!r}")


def event_to_text(ev: EventDecl, indent: str = "  ") -> str:
    lines = [f"{indent}event {ev.name}"]
    if ev.params:
        lines.append(f"{indent}any {' '.join(ev.params)}")
    if ev.guards:
        lines.append(f"{indent}where")
        for label, guard in ev.guards:
            lines.append(f"{indent}  @{label}: {expr_to_text(guard)}")
    if ev.actions:
        lines.append(f"{indent}then")
        for action in ev.actions:
            lines.append(f"{indent}  {action_to_text(action)}")
    lines.append(f"{indent}end")
    return "\n".join(lines)


def context_to_text(ctx: ContextModel) -> str:
    lines = [f"CONTEXT {ctx.name}"]
    if ctx.extends:
        lines.append("EXTENDS " + " ".join(ctx.extends))
    if ctx.sets:
        lines.append("SETS")
        lines.append("  " + " ".join(ctx.sets))
    if ctx.constants:
        lines.append("CONSTANTS")
        lines.append("  " + " ".join(ctx.constants))
    if ctx.axioms:
        lines.append("AXIOMS")
        for ax in ctx.axioms:
            suffix = "".join(f" @{a}" for a in ax.annotations)
            lines.append(f"  @{ax.label}: {expr_to_text(ax.predicate)}{suffix}")
    lines.append("END")
    return "\n".join(lines) + "\n"


def machine_to_text(mch: MachineModel) -> str:
    lines = [f"MACHINE {mch.name}", f"SEES {mch.sees}"]
    if mch.variables:
        lines.append("VARIABLES")
        lines.append("  " + " ".join(mch.variables))
    if mch.invariants:
        lines.append("INVARIANTS")
        for label, inv in mch.invariants:
            lines.append(f"  @{label}: {expr_to_text(inv)}")
    lines.append("EVENTS")
    lines.append("  initialisation")
    lines.append("  begin")
    for init in mch.initialisation:
        lines.append(f"    @{init.label}: {init.var} := {expr_to_text(init.rhs)}")
    lines.append("  end")
    for ev in mch.events:
        lines.append(event_to_text(ev))
    lines.append("END")
    return "\n".join(lines) + "\n"
