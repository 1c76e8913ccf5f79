"""Reader and writer for ``.tdve`` files.

The language is a DVE-like subset: constants, ranged integer globals,
rendezvous channels, processes with guarded transitions and an optional
property process. Transitions may carry a ``time [lb, ub] [observe];`` clause,
which becomes an entry in ``TimedModel.bounds``. See ``docs/language.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .model import (
    TRUE,
    Binary,
    BoolLit,
    Channel,
    Index,
    InLocation,
    IntLit,
    MinActiveTimer,
    Model,
    Name,
    Process,
    Sync,
    TimedModel,
    Transition,
    Unary,
    VarDecl,
)

INT_RANGE = (-32768, 32767)
BYTE_RANGE = (0, 255)

KEYWORDS = {
    "process", "state", "init", "accept", "trans", "guard", "sync", "effect",
    "time", "observe", "const", "int", "byte", "channel", "property", "system",
    "async", "true", "false", "and", "or", "not",
}


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, path: Optional[str] = None):
        self.message = message
        self.line = line
        self.col = col
        self.path = path
        super().__init__(str(self))

    def __str__(self) -> str:
        prefix = f"{self.path}:" if self.path else ""
        return f"{prefix}{self.line}:{self.col}: {self.message}"


@dataclass(frozen=True)
class SourceFile:
    text: str
    path: Optional[str] = None

    @classmethod
    def read(cls, path) -> "SourceFile":
        with open(path, encoding="utf-8") as fh:
            return cls(fh.read(), str(path))


@dataclass(frozen=True)
class Token:
    kind: str  # 'int', 'ident', 'kw', 'op', 'eof'
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|\.\.|==|!=|<=|>=|&&|\|\||[{}\[\](),;=<>+\-*%!?.])
    """,
    re.VERBOSE,
)


def tokenize(text: str, path: Optional[str] = None) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, path)
        kind = m.lastgroup
        value = m.group()
        col = pos - line_start + 1
        if kind == "ident" and value in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, src: SourceFile):
        self.path = src.path
        self.tokens = tokenize(src.text, src.path)
        self.i = 0
        self.constants: dict = {}

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Optional[Token] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col, self.path)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "op")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident":
            found = tok.text or "end of input"
            raise self.error(f"expected identifier, found {found!r}")
        self.i += 1
        return tok.text

    def int_value(self) -> int:
        """An integer literal, optionally negated, or a declared constant."""
        neg = self.accept("-") is not None
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            value = int(tok.text)
        elif tok.kind == "ident" and tok.text in self.constants:
            self.i += 1
            value = self.constants[tok.text]
        else:
            raise self.error("expected integer")
        return -value if neg else value

    # -- top level

    def model(self) -> TimedModel:
        globals_, channels, processes = [], [], []
        bounds: dict = {}
        observe = set()
        property_name = None
        property_tok = None
        while self.tok.kind != "eof":
            if self.at("const"):
                self.const_decl()
            elif self.at("int") or self.at("byte"):
                globals_.append(self.var_decl())
            elif self.at("channel"):
                channels.extend(self.channel_decl())
            elif self.at("process"):
                proc, pb, po = self.process()
                processes.append(proc)
                for k, v in pb.items():
                    bounds[(proc.name, k)] = v
                observe.update((proc.name, k) for k in po)
            elif self.at("system"):
                self.i += 1
                self.accept("async")
                if self.at("property"):
                    property_tok = self.tok
                    self.i += 1
                    property_name = self.ident()
                self.expect(";")
            elif self.at("property"):
                property_tok = self.tok
                self.i += 1
                property_name = self.ident()
                self.expect(";")
            else:
                raise self.error(f"unexpected {self.tok.text!r} at top level")
        prop_index = None
        if property_name is not None:
            names = [p.name for p in processes]
            if property_name not in names:
                raise self.error(f"unknown property process {property_name!r}", property_tok)
            prop_index = names.index(property_name)
        base = Model(
            constants=dict(self.constants),
            globals=tuple(globals_),
            channels=tuple(channels),
            processes=tuple(processes),
            property=prop_index,
        )
        return TimedModel(base, bounds, frozenset(observe))

    def const_decl(self) -> None:
        self.expect("const")
        if not self.accept("int"):
            self.accept("byte")
        tok = self.tok
        name = self.ident()
        if name in self.constants:
            raise self.error(f"duplicate constant {name!r}", tok)
        self.expect("=")
        self.constants[name] = self.int_value()
        self.expect(";")

    def var_decl(self) -> VarDecl:
        start = self.tok
        if self.accept("byte"):
            lo, hi = BYTE_RANGE
        else:
            self.expect("int")
            lo, hi = INT_RANGE
            if self.accept("["):
                lo = self.int_value()
                self.expect("..")
                hi = self.int_value()
                self.expect("]")
        name = self.ident()
        length = None
        if self.accept("["):
            length = self.int_value()
            self.expect("]")
        init = 0
        if self.accept("="):
            if self.accept("{"):
                items = [self.int_value()]
                while self.accept(","):
                    items.append(self.int_value())
                self.expect("}")
                init = tuple(items)
            else:
                init = self.int_value()
        elif lo > 0 or hi < 0:
            init = lo
        self.expect(";")
        return VarDecl(name, lo, hi, init, length, pos=(start.line, start.col))

    def channel_decl(self) -> list:
        self.expect("channel")
        arity = 0
        if self.accept("int") or self.accept("byte"):
            arity = 1
        out = []
        while True:
            tok = self.tok
            out.append(Channel(self.ident(), arity, pos=(tok.line, tok.col)))
            if not self.accept(","):
                break
        self.expect(";")
        return out

    def process(self):
        start = self.expect("process")
        name = self.ident()
        self.expect("{")
        locals_ = []
        while self.at("int") or self.at("byte"):
            locals_.append(self.var_decl())
        self.expect("state")
        locations = self.ident_list()
        self.expect(";")
        self.expect("init")
        initial = self.ident()
        self.expect(";")
        accepting = frozenset()
        if self.accept("accept"):
            accepting = frozenset(self.ident_list())
            self.expect(";")
        self.expect("trans")
        transitions, bounds, observe = [], {}, set()
        if self.tok.kind == "ident":
            while True:
                t, b, obs = self.transition()
                if b is not None:
                    bounds[len(transitions)] = b
                if obs:
                    observe.add(len(transitions))
                transitions.append(t)
                if not self.accept(","):
                    break
        self.accept(";")
        self.expect("}")
        proc = Process(
            name=name,
            locations=tuple(locations),
            initial=initial,
            transitions=tuple(transitions),
            locals=tuple(locals_),
            accepting=accepting,
            pos=(start.line, start.col),
        )
        return proc, bounds, observe

    def ident_list(self) -> list:
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        return out

    def transition(self):
        start = self.tok
        src = self.ident()
        self.expect("->")
        dst = self.ident()
        self.expect("{")
        guard = TRUE
        sync = None
        effects = []
        bound = None
        observe = False
        if self.accept("guard"):
            guard = self.expr()
            self.expect(";")
        if self.accept("sync"):
            chan = self.ident()
            if self.accept("!"):
                direction = "send"
            elif self.accept("?"):
                direction = "recv"
            else:
                raise self.error("expected '!' or '?'")
            payload = None
            if not self.at(";"):
                payload = self.lvalue() if direction == "recv" else self.expr()
            sync = Sync(chan, direction, payload)
            self.expect(";")
        if self.accept("effect"):
            effects.append(self.assignment())
            while self.accept(","):
                effects.append(self.assignment())
            self.expect(";")
        if self.accept("time"):
            self.expect("[")
            lb = ub = None
            if not self.at(","):
                lb = self.int_value()
            self.expect(",")
            if not self.at("]"):
                ub = self.int_value()
            self.expect("]")
            if lb is None and ub is None:
                raise self.error("time clause needs at least one bound", start)
            bound = (lb, ub)
            observe = self.accept("observe") is not None
            self.expect(";")
        self.expect("}")
        t = Transition(src, dst, guard, sync, tuple(effects), pos=(start.line, start.col))
        return t, bound, observe

    def assignment(self):
        lhs = self.lvalue()
        self.expect("=")
        return (lhs, self.expr())

    def lvalue(self):
        name = self.ident()
        if self.accept("["):
            index = self.expr()
            self.expect("]")
            return Index(name, index)
        return Name(name)

    # -- expressions, lowest precedence first

    def expr(self):
        left = self.and_expr()
        while self.accept("or") or self.accept("||"):
            left = Binary("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.accept("and") or self.accept("&&"):
            left = Binary("and", left, self.not_expr())
        return left

    def not_expr(self):
        if self.accept("not") or self.accept("!"):
            return Unary("not", self.not_expr())
        return self.comparison()

    def comparison(self):
        left = self.additive()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.accept(op):
                return Binary(op, left, self.additive())
        return left

    def additive(self):
        left = self.multiplicative()
        while True:
            if self.accept("+"):
                left = Binary("+", left, self.multiplicative())
            elif self.accept("-"):
                left = Binary("-", left, self.multiplicative())
            else:
                return left

    def multiplicative(self):
        left = self.unary()
        while True:
            if self.accept("*"):
                left = Binary("*", left, self.unary())
            elif self.accept("%"):
                left = Binary("%", left, self.unary())
            else:
                return left

    def unary(self):
        if self.accept("-"):
            if self.tok.kind == "int":
                value = int(self.tok.text)
                self.i += 1
                return IntLit(-value)
            return Unary("-", self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return IntLit(int(tok.text))
        if self.accept("true"):
            return BoolLit(True)
        if self.accept("false"):
            return BoolLit(False)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.i += 1
            if tok.text == "MIN_ACTIVE_TIMER":
                return MinActiveTimer()
            if self.accept("["):
                index = self.expr()
                self.expect("]")
                return Index(tok.text, index)
            if self.accept("."):
                return InLocation(tok.text, self.ident())
            return Name(tok.text)
        found = tok.text or "end of input"
        raise self.error(f"expected expression, found {found!r}")


def parse(src, path: Optional[str] = None) -> TimedModel:
    """Parse ``.tdve`` text (a ``SourceFile`` or a plain string)."""
    if isinstance(src, str):
        src = SourceFile(src, path)
    parser = _Parser(src)
    try:
        return parser.model()
    except RecursionError:
        tok = parser.tok
        raise ParseError("expression nested too deeply", tok.line, tok.col, src.path) from None


def parse_expr(text: str):
    """Parse a standalone expression, e.g. a safety predicate."""
    parser = _Parser(SourceFile(text))
    try:
        e = parser.expr()
    except RecursionError:
        raise ParseError("expression nested too deeply", 1, 1) from None
    if parser.tok.kind != "eof":
        raise parser.error(f"unexpected {parser.tok.text!r} after expression")
    return e


# ---------------------------------------------------------------------------
# Printing

_PREC = {"or": 1, "and": 2, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "%": 6}
_NOT_PREC = 3
_NEG_PREC = 7


def show_expr(e, prec: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Index):
        return f"{e.name}[{show_expr(e.index)}]"
    if isinstance(e, InLocation):
        return f"{e.process}.{e.location}"
    if isinstance(e, MinActiveTimer):
        return "MIN_ACTIVE_TIMER"
    if isinstance(e, Unary):
        if e.op == "not":
            text = "not " + show_expr(e.operand, _NOT_PREC)
            return f"({text})" if prec > _NOT_PREC else text
        if isinstance(e.operand, IntLit) and e.operand.value >= 0:
            inner = f"({e.operand.value})"
        else:
            inner = show_expr(e.operand, _NEG_PREC)
        # "- -x" keeps the lexer from seeing a single token
        text = "-" + inner if not inner.startswith("-") else "- " + inner
        return f"({text})" if prec > _NEG_PREC else text
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left_prec = p + 1 if p == 4 else p
        text = f"{show_expr(e.left, left_prec)} {e.op} {show_expr(e.right, p + 1)}"
        return f"({text})" if prec > p else text
    raise TypeError(f"cannot print {e!r}")


def _show_decl(v: VarDecl) -> str:
    text = f"int[{v.lo}..{v.hi}] {v.name}"
    if v.length is not None:
        text += f"[{v.length}]"
    if isinstance(v.init, tuple):
        text += " = {" + ", ".join(str(x) for x in v.init) + "}"
    else:
        text += f" = {v.init}"
    return text + ";"


def _show_transition(t: Transition, bound=None, observe=False) -> str:
    parts = []
    if t.guard != TRUE:
        parts.append(f"guard {show_expr(t.guard)};")
    if t.sync is not None:
        mark = "!" if t.sync.direction == "send" else "?"
        payload = "" if t.sync.payload is None else show_expr(t.sync.payload)
        parts.append(f"sync {t.sync.channel}{mark}{payload};")
    if t.effects:
        assigns = ", ".join(f"{show_expr(l)} = {show_expr(r)}" for l, r in t.effects)
        parts.append(f"effect {assigns};")
    if bound is not None:
        lb, ub = bound
        lbs = "" if lb is None else str(lb)
        ubs = "" if ub is None else str(ub)
        parts.append(f"time [{lbs}, {ubs}]" + (" observe" if observe else "") + ";")
    body = " ".join(parts)
    return f"{t.src} -> {t.dst} {{ {body} }}" if body else f"{t.src} -> {t.dst} {{ }}"


def _show_model(model: Model, bounds, observe) -> list:
    lines = []
    for name, value in model.constants.items():
        lines.append(f"const int {name} = {value};")
    for g in model.globals:
        lines.append(_show_decl(g))
    for c in model.channels:
        lines.append(f"channel int {c.name};" if c.arity else f"channel {c.name};")
    for p in model.processes:
        if lines:
            lines.append("")
        lines.append(f"process {p.name} {{")
        for v in p.locals:
            lines.append("  " + _show_decl(v))
        lines.append("  state " + ", ".join(p.locations) + ";")
        lines.append(f"  init {p.initial};")
        if p.accepting:
            acc = [loc for loc in p.locations if loc in p.accepting]
            acc += sorted(set(p.accepting) - set(acc))
            lines.append("  accept " + ", ".join(acc) + ";")
        lines.append("  trans")
        items = [
            _show_transition(t, bounds.get((p.name, k)), (p.name, k) in observe)
            for k, t in enumerate(p.transitions)
        ]
        for k, item in enumerate(items):
            sep = "," if k < len(items) - 1 else ";"
            lines.append(f"    {item}{sep}")
        lines.append("}")
    if model.property is not None:
        lines.append("")
        lines.append(f"property {model.processes[model.property].name};")
    return lines


def pretty(tm: TimedModel) -> str:
    return "\n".join(_show_model(tm.base, tm.bounds, tm.observe)) + "\n"


def pretty_lowered(model: Model) -> str:
    """Render a lowered model; the native Tick process appears as comments.

    Lowered text is for reading, not re-parsing: the Tick's effect cannot be
    written in the surface language.
    """
    base = "\n".join(_show_model(model, {}, frozenset())) + "\n"
    tick = model.tick
    if tick is None:
        return base
    n = len(model.system_processes())
    inf = tick.infinity
    lines = ["", "// process Tick (native; evaluated by the checker)", "//   state tick;",
             "//   init tick;", "//   trans"]
    now = f"{tick.now} = ({tick.now} + {{step}}) % {tick.maximal}, " if tick.now else ""
    if tick.mode == "ledm":
        ub, lb = tick.timers
        guard = " and ".join(f"{ub}[{i}] > 0" for i in range(n)) or "true"
        lines.append(f"//     tick -> tick {{ guard {guard};")
        lines.append(
            f"//       effect {now.format(step=1)}decrement every non-INFINITY {ub} "
            f"and every non-zero {lb} by 1; }};"
        )
    else:
        (timer,) = tick.timers
        base_guard = " and ".join(
            [f"{timer}[{i}] > 0" for i in range(n)]
            + ["(" + " or ".join(f"{timer}[{i}] != {inf}" for i in range(n)) + ")"]
        ) if n else "false"
        loops = [("MIN_ACTIVE_TIMER", "all", "==", "0")]
        if tick.signals:
            loops.append(("1", "any", "==", "1"))
        for k, (step, quant, op, val) in enumerate(loops):
            guard = base_guard
            if tick.signals:
                join = " and " if quant == "all" else " or "
                sig = join.join(f"{tick.signals}[{i}] {op} {val}" for i in range(n))
                guard += f" and ({sig})"
            sep = "," if k < len(loops) - 1 else ";"
            lines.append(f"//     tick -> tick {{ guard {guard};")
            lines.append(
                f"//       effect {now.format(step=step)}decrement every non-INFINITY "
                f"{timer} by {step}; }}{sep}"
            )
    lines.append("// }")
    lines.append(f"// INFINITY = {inf}, MAXIMAL = {tick.maximal}")
    return base + "\n".join(lines) + "\n"
