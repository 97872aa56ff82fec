"""Recursive-descent parser for the .lbc / .lbm surface syntax.

The surface syntax is a line-friendly ASCII rendering of the usual
machine/context notation: ``in`` (or ``:``) for membership, ``|->`` for
maplets, ``-->`` for total functions, ``\\/`` ``/\\`` ``\\`` for set
operations, ``!x . P`` and ``#x . P`` for the quantifiers, and
``{x . x in S | e}`` for set comprehensions.  The common Unicode math
symbols are accepted as aliases so model text can be pasted near-verbatim.

Parsing is all-or-nothing: on any error a ParseFailure carrying Diagnostic
records is raised and no partial model escapes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Apply,
    Axiom,
    Binary,
    BinOp,
    BoolLit,
    Card,
    ChannelAssign,
    ChannelCall,
    CHANNEL_KINDS,
    ChannelKind,
    ContextModel,
    EventDecl,
    Expr,
    FuncOverride,
    InitAssign,
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
from .diagnostics import (
    Diagnostic,
    E_BAD_ACTION,
    E_BAD_CHANNEL_EXPR,
    E_BAD_QUANTIFIER,
    E_DUPLICATE_DECL,
    E_SYNTAX,
    ParseFailure,
    SourceSpan,
    error,
)

KEYWORDS = {
    "CONTEXT", "EXTENDS", "SETS", "CONSTANTS", "AXIOMS", "END",
    "MACHINE", "SEES", "VARIABLES", "INVARIANTS", "EVENTS",
    "initialisation", "event", "any", "where", "then", "begin", "end",
    "in", "or", "not", "NAT", "POW", "card", "partition", "TRUE", "FALSE",
}

SYMBOLS = [
    "|->", "-->", "+->", ":=", "..", "**", "\\/", "/\\", "/=", "/:",
    "<=", "<:", "<+", ">=", "=>",
    "=", "<", ">", "+", "-", "*", "/", "(", ")", "{", "}", ",", ".",
    ":", "@", "|", "!", "#", "\\", "&",
]

# Unicode aliases map to the equivalent ASCII token text.
UNICODE_ALIASES = {
    "∈": "in", "∉": "/:", "⊆": "<:", "↦": "|->",
    "→": "-->", "⇸": "+->", "∪": "\\/", "∩": "/\\",
    "∖": "\\", "×": "**", "∧": "&", "∨": "or",
    "¬": "not", "⇒": "=>", "≠": "/=", "≤": "<=",
    "≥": ">=", "∀": "!", "∃": "#", "·": ".",
    "ℕ": "NAT", "ℙ": "POW", "÷": "/", "−": "-",
    "≔": ":=", "∅": "EMPTYSET",
}


@dataclass(frozen=True)
class Token:
    kind: str   # "IDENT", "INT", "EOF", a keyword, or the symbol text
    text: str
    span: SourceSpan


def tokenize(text: str, file: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        span = SourceSpan(file, line, col)
        if ch in UNICODE_ALIASES:
            alias = UNICODE_ALIASES[ch]
            kind = alias if alias in KEYWORDS or alias == "EMPTYSET" or not alias[0].isalpha() else "IDENT"
            tokens.append(Token(kind, alias, span))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], SourceSpan(file, line, col, j - i)))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = word if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, SourceSpan(file, line, col, j - i)))
            col += j - i
            i = j
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                tokens.append(Token(sym, sym, SourceSpan(file, line, col, len(sym))))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseFailure([error(E_SYNTAX, f"unexpected character {ch!r}", span)])
    tokens.append(Token("EOF", "", SourceSpan(file, line, col)))
    return tokens


# Binary operator token -> (BinOp, precedence tier).  Tiers, weakest first:
# implies < or < and < not < comparison < arrow < set ops < interval
# < additive < multiplicative < maplet < application.
COMPARE_OPS = {
    "=": BinOp.EQ, "/=": BinOp.NE, "<": BinOp.LT, "<=": BinOp.LE,
    ">": BinOp.GT, ">=": BinOp.GE, "in": BinOp.IN, ":": BinOp.IN,
    "/:": BinOp.NOTIN, "<:": BinOp.SUBSETEQ,
}
SET_OPS = {"\\/": BinOp.UNION, "/\\": BinOp.INTER, "\\": BinOp.DIFF, "**": BinOp.CROSS}
ARROW_OPS = {"-->": BinOp.TFUN, "+->": BinOp.PFUN}
ADD_OPS = {"+": BinOp.ADD, "-": BinOp.SUB}
MUL_OPS = {"*": BinOp.MUL, "/": BinOp.DIV}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def tok(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def at(self, kind: str) -> bool:
        return self.tok().kind == kind

    def take(self, kind: str) -> Token:
        t = self.tok()
        if t.kind != kind:
            self.fail(f"expected {kind!r}, found {t.text or 'end of input'!r}")
        self.pos += 1
        return t

    def take_ident(self, what: str = "identifier") -> Token:
        t = self.tok()
        if t.kind != "IDENT":
            self.fail(f"expected {what}, found {t.text or 'end of input'!r}")
        self.pos += 1
        return t

    def fail(self, message: str, span: SourceSpan | None = None, code: str = E_SYNTAX):
        raise ParseFailure([error(code, message, span or self.tok().span)])

    # -- expressions --------------------------------------------------------

    def expr(self) -> Expr:
        if self.tok().kind in ("!", "#"):
            return self.quantifier()
        return self.implies()

    def implies(self) -> Expr:
        left = self.disjunction()
        if self.at("=>"):
            self.take("=>")
            return Binary(BinOp.IMPLIES, left, self.implies())
        return left

    def disjunction(self) -> Expr:
        left = self.conjunction()
        while self.at("or"):
            self.take("or")
            left = Binary(BinOp.OR, left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.negation()
        while self.at("&"):
            self.take("&")
            left = Binary(BinOp.AND, left, self.negation())
        return left

    def negation(self) -> Expr:
        if self.at("not"):
            self.take("not")
            return Not(self.negation())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.arrow()
        kind = self.tok().kind
        if kind in COMPARE_OPS:
            self.pos += 1
            return Binary(COMPARE_OPS[kind], left, self.arrow())
        return left

    def arrow(self) -> Expr:
        left = self.set_op()
        kind = self.tok().kind
        if kind in ARROW_OPS:
            self.pos += 1
            return Binary(ARROW_OPS[kind], left, self.arrow())
        return left

    def set_op(self) -> Expr:
        left = self.interval()
        while True:
            kind = self.tok().kind
            if kind in SET_OPS:
                self.pos += 1
                left = Binary(SET_OPS[kind], left, self.interval())
            elif kind == "<+":
                self.take("<+")
                left = FuncOverride(left, self.interval())
            else:
                return left

    def interval(self) -> Expr:
        left = self.additive()
        if self.at(".."):
            self.take("..")
            return Interval(left, self.additive())
        return left

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.tok().kind in ADD_OPS:
            op = ADD_OPS[self.tok().kind]
            self.pos += 1
            left = Binary(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> Expr:
        left = self.maplet()
        while self.tok().kind in MUL_OPS:
            op = MUL_OPS[self.tok().kind]
            self.pos += 1
            left = Binary(op, left, self.maplet())
        return left

    def maplet(self) -> Expr:
        left = self.application()
        while self.at("|->"):
            self.take("|->")
            left = Maplet(left, self.application())
        return left

    def application(self) -> Expr:
        head = self.atom()
        while self.at("("):
            span = self.tok().span
            self.take("(")
            args = [self.expr()]
            while self.at(","):
                self.take(",")
                args.append(self.expr())
            self.take(")")
            if len(args) > 1:
                self.fail("function application takes a single argument "
                          "(use maplets for tuples)", span)
            head = self.as_application(head, args[0], span)
        return head

    def as_application(self, head: Expr, arg: Expr, span: SourceSpan) -> Expr:
        if isinstance(head, Var) and head.name in CHANNEL_KINDS:
            return self.channel_call(CHANNEL_KINDS[head.name], arg, span)
        return Apply(head, arg)

    def channel_call(self, kind: ChannelKind, arg: Expr, span: SourceSpan) -> ChannelCall:
        # Expected argument shape: channels |-> (src |-> dst) |-> msg.
        if (isinstance(arg, Maplet) and isinstance(arg.left, Maplet)
                and arg.left.left == Var("channels")
                and isinstance(arg.left.right, Maplet)):
            pair = arg.left.right
            return ChannelCall(kind, pair.left, pair.right, arg.right)
        self.fail(f"{kind.value}(...) must be applied to "
                  "channels |-> (src |-> dst) |-> msg", span, E_BAD_CHANNEL_EXPR)

    def atom(self) -> Expr:
        t = self.tok()
        if t.kind == "INT":
            self.pos += 1
            return IntLit(int(t.text))
        if t.kind == "TRUE":
            self.pos += 1
            return BoolLit(True)
        if t.kind == "FALSE":
            self.pos += 1
            return BoolLit(False)
        if t.kind == "NAT":
            self.pos += 1
            return NatSet()
        if t.kind == "EMPTYSET":
            self.pos += 1
            return SetExt(())
        if t.kind == "card":
            self.pos += 1
            self.take("(")
            inner = self.expr()
            self.take(")")
            return Card(inner)
        if t.kind == "POW":
            self.pos += 1
            self.take("(")
            inner = self.expr()
            self.take(")")
            return Pow(inner)
        if t.kind == "partition":
            self.pos += 1
            self.take("(")
            args = [self.expr()]
            while self.at(","):
                self.take(",")
                args.append(self.expr())
            self.take(")")
            return Partition(tuple(args))
        if t.kind == "IDENT":
            self.pos += 1
            return Var(t.text)
        if t.kind == "(":
            self.take("(")
            inner = self.expr()
            self.take(")")
            return inner
        if t.kind == "{":
            return self.braced()
        if t.kind in ("!", "#"):
            return self.quantifier()
        if t.kind == "-" and self.tok(1).kind == "INT":
            self.pos += 2
            return IntLit(-int(self.tok(-1).text))
        self.fail(f"expected expression, found {t.text or 'end of input'!r}")

    def braced(self) -> Expr:
        self.take("{")
        if self.at("}"):
            self.take("}")
            return SetExt(())
        if self.tok().kind == "IDENT" and self.tok(1).kind == ".":
            binder = self.take_ident().text
            self.take(".")
            pred_span = self.tok().span
            pred = self.expr()
            self.take("|")
            body = self.expr()
            self.take("}")
            domain, leftover = self.peel_membership(pred, binder, pred_span)
            return SetComprehension(binder, domain, leftover, body)
        elems = [self.expr()]
        while self.at(","):
            self.take(",")
            elems.append(self.expr())
        self.take("}")
        return SetExt(tuple(elems))

    def quantifier(self) -> Expr:
        kind = QuantKind.FORALL if self.tok().kind == "!" else QuantKind.EXISTS
        self.pos += 1
        names = [self.take_ident("binder").text]
        while self.at(","):
            self.take(",")
            names.append(self.take_ident("binder").text)
        self.take(".")
        pred_span = self.tok().span
        pred = self.expr()
        if kind is QuantKind.FORALL:
            if not (isinstance(pred, Binary) and pred.op is BinOp.IMPLIES):
                self.fail("a universal quantifier needs the form "
                          "!x . x in S => P", pred_span, E_BAD_QUANTIFIER)
            ante, body = pred.left, pred.right
            binders, leftover = self.peel_memberships(ante, names, pred_span)
            if leftover is not None:
                body = Binary(BinOp.IMPLIES, leftover, body)
            return Quantifier(kind, binders, body)
        binders, leftover = self.peel_memberships(pred, names, pred_span)
        body = leftover if leftover is not None else BoolLit(True)
        return Quantifier(kind, binders, body)

    def peel_memberships(self, pred: Expr, names: list[str], span: SourceSpan):
        """Split a conjunction into per-binder typing memberships + leftover."""
        chain = conjuncts(pred)
        if len(chain) < len(names):
            self.fail("each quantifier binder needs a typing membership "
                      "x in S", span, E_BAD_QUANTIFIER)
        binders = []
        for name, conj in zip(names, chain):
            if not (isinstance(conj, Binary) and conj.op is BinOp.IN
                    and conj.left == Var(name)):
                self.fail(f"expected typing membership for binder {name!r}",
                          span, E_BAD_QUANTIFIER)
            binders.append((name, conj.right))
        rest = chain[len(names):]
        leftover = None
        for c in rest:
            leftover = c if leftover is None else Binary(BinOp.AND, leftover, c)
        return tuple(binders), leftover

    def peel_membership(self, pred: Expr, binder: str, span: SourceSpan):
        binders, leftover = self.peel_memberships(pred, [binder], span)
        return binders[0][1], leftover

    # -- context ------------------------------------------------------------

    def context(self) -> ContextModel:
        self.take("CONTEXT")
        name = self.take_ident("context name")
        extends: list[str] = []
        if self.at("EXTENDS"):
            self.take("EXTENDS")
            extends.append(self.take_ident().text)
            while self.at("IDENT"):
                extends.append(self.take_ident().text)
        sets = self.ident_section("SETS")
        constants = self.ident_section("CONSTANTS")
        axioms: list[Axiom] = []
        if self.at("AXIOMS"):
            self.take("AXIOMS")
            while self.at("@"):
                axioms.append(self.axiom())
        self.take("END")
        self.take("EOF")
        self.check_context_names(sets, constants, axioms)
        return ContextModel(name.text, tuple(extends), tuple(s.text for s in sets),
                            tuple(c.text for c in constants), tuple(axioms),
                            span=name.span)

    def ident_section(self, keyword: str) -> list[Token]:
        idents: list[Token] = []
        if self.at(keyword):
            self.take(keyword)
            while self.at("IDENT"):
                idents.append(self.take_ident())
        return idents

    def axiom(self) -> Axiom:
        at = self.take("@")
        label = self.take_ident("axiom label")
        self.take(":")
        predicate = self.expr()
        annotations: list[str] = []
        # A trailing @Name without a colon is a process-class annotation;
        # @name: starts the next axiom.
        while self.at("@") and self.tok(1).kind == "IDENT" and self.tok(2).kind != ":":
            self.take("@")
            annotations.append(self.take_ident("annotation").text)
        return Axiom(label.text, predicate, tuple(annotations), span=at.span)

    def check_context_names(self, sets, constants, axioms) -> None:
        diags: list[Diagnostic] = []
        seen: dict[str, Token] = {}
        for tok in [*sets, *constants]:
            if tok.text in seen:
                diags.append(error(E_DUPLICATE_DECL,
                                   f"duplicate declaration of {tok.text!r}", tok.span))
            seen[tok.text] = tok
        labels: set[str] = set()
        for ax in axioms:
            if ax.label in labels:
                diags.append(error(E_DUPLICATE_DECL,
                                   f"duplicate axiom label {ax.label!r}", ax.span))
            labels.add(ax.label)
        if diags:
            raise ParseFailure(diags)

    # -- machine ------------------------------------------------------------

    def machine(self) -> MachineModel:
        self.take("MACHINE")
        name = self.take_ident("machine name")
        self.take("SEES")
        sees = self.take_ident("context name")
        variables = self.ident_section("VARIABLES")
        invariants: list[tuple[str, Expr]] = []
        inv_labels: set[str] = set()
        if self.at("INVARIANTS"):
            self.take("INVARIANTS")
            while self.at("@"):
                span = self.take("@").span
                label = self.take_ident("invariant label")
                self.take(":")
                if label.text in inv_labels:
                    raise ParseFailure([error(E_DUPLICATE_DECL,
                                              f"duplicate invariant label {label.text!r}",
                                              span)])
                inv_labels.add(label.text)
                invariants.append((label.text, self.expr()))
        self.take("EVENTS")
        self.take("initialisation")
        self.take("begin")
        initialisation: list[InitAssign] = []
        while self.at("@"):
            span = self.take("@").span
            label = self.take_ident("action label")
            self.take(":")
            var = self.take_ident("variable")
            self.take(":=")
            initialisation.append(InitAssign(label.text, var.text, self.expr(), span=span))
        self.take("end")
        events: list[EventDecl] = []
        while self.at("event"):
            events.append(self.event())
        self.take("END")
        self.take("EOF")
        self.check_machine_names(variables, events)
        return MachineModel(name.text, sees.text, tuple(v.text for v in variables),
                            tuple(invariants), tuple(initialisation), tuple(events),
                            span=name.span)

    def event(self) -> EventDecl:
        self.take("event")
        name = self.take_ident("event name")
        params: list[str] = []
        if self.at("any"):
            self.take("any")
            while self.at("IDENT"):
                params.append(self.take_ident().text)
        guards: list[tuple[str, Expr]] = []
        if self.at("where"):
            self.take("where")
            while self.at("@"):
                self.take("@")
                label = self.take_ident("guard label")
                self.take(":")
                guards.append((label.text, self.expr()))
        actions: list = []
        if self.at("then") or self.at("begin"):
            self.pos += 1
            while self.at("@"):
                actions.append(self.action())
        self.take("end")
        return EventDecl(name.text, tuple(params), tuple(guards), tuple(actions),
                         span=name.span)

    def action(self):
        span = self.take("@").span
        label = self.take_ident("action label")
        self.take(":")
        target = self.take_ident("assignment target")
        if target.text == "channels":
            self.take(":=")
            rhs = self.expr()
            if isinstance(rhs, ChannelCall) and rhs.kind in (ChannelKind.SEND,
                                                             ChannelKind.RECEIVE):
                return ChannelAssign(label.text, rhs.kind, rhs.src, rhs.dst, rhs.msg)
            self.fail("channels may only be assigned send(...) or receive(...)",
                      span, E_BAD_ACTION)
        proc = None
        if self.at("("):
            self.take("(")
            proc = self.take_ident("process parameter").text
            self.take(")")
        self.take(":=")
        rhs = self.expr()
        return LocalAssign(label.text, target.text, proc, rhs)

    def check_machine_names(self, variables, events) -> None:
        diags: list[Diagnostic] = []
        seen: set[str] = set()
        for tok in variables:
            if tok.text in seen:
                diags.append(error(E_DUPLICATE_DECL,
                                   f"duplicate variable {tok.text!r}", tok.span))
            seen.add(tok.text)
        names: set[str] = set()
        for ev in events:
            if ev.name in names:
                diags.append(error(E_DUPLICATE_DECL,
                                   f"duplicate event {ev.name!r}", ev.span))
            names.add(ev.name)
        if diags:
            raise ParseFailure(diags)


def conjuncts(e: Expr) -> list[Expr]:
    """Flatten a left-associated conjunction into its operands."""
    if isinstance(e, Binary) and e.op is BinOp.AND:
        return conjuncts(e.left) + [e.right]
    return [e]


def parse_expr(text: str, file: str = "<expr>") -> Expr:
    parser = _Parser(tokenize(text, file))
    out = parser.expr()
    parser.take("EOF")
    return out


def parse_context(text: str, file: str = "<context>") -> ContextModel:
    return _Parser(tokenize(text, file)).context()


def parse_machine(text: str, file: str = "<machine>") -> MachineModel:
    return _Parser(tokenize(text, file)).machine()
