"""Intermediate representation for untimed and timed guarded-command models.

Everything here is immutable. ``Model`` is what the engine explores;
``TimedModel`` wraps a ``Model`` with per-transition time bounds and is what
the parser produces and the lowering passes consume.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

DEFAULT_INFINITY = 1_000_000
DEFAULT_MAXIMAL = 2**30

# Positions are (line, column), both 1-based.
Pos = Optional[tuple]


class ModelError(Exception):
    """A modeling error that aborts a run."""


class EvaluationError(ModelError):
    def __init__(self, message: str, state: "State | None" = None):
        super().__init__(message)
        self.state = state


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Name:
    """A scalar variable or a named constant."""

    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class InLocation:
    """True when ``process`` currently sits in ``location``."""

    process: str
    location: str


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or 'not'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class MinActiveTimer:
    """Smallest value in the timer array; only legal inside a TickSpec."""


Expr = Union[IntLit, BoolLit, Name, Index, InLocation, Unary, Binary, MinActiveTimer]
LValue = Union[Name, Index]

ARITH_OPS = ("+", "-", "*", "%")
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_OPS = ("and", "or")

TRUE = BoolLit(True)


def conj(*parts: Optional[Expr]) -> Expr:
    """Left-nested conjunction, dropping ``None`` and literal ``true``."""
    kept = [p for p in parts if p is not None and p != TRUE]
    if not kept:
        return TRUE
    out = kept[0]
    for p in kept[1:]:
        out = Binary("and", out, p)
    return out


def names_in(expr: Expr) -> set:
    """Variable/constant names syntactically referenced by ``expr``."""
    out: set = set()

    def walk(e):
        if isinstance(e, Name):
            out.add(e.name)
        elif isinstance(e, Index):
            out.add(e.name)
            walk(e.index)
        elif isinstance(e, Unary):
            walk(e.operand)
        elif isinstance(e, Binary):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out


def widen_locations(expr: Expr, phases: dict) -> Expr:
    """Replace ``P.l`` by ``P.l or P.l2`` for every ``(P, l) -> l2`` in ``phases``."""
    if not phases:
        return expr

    def walk(e):
        if isinstance(e, InLocation):
            extra = phases.get((e.process, e.location))
            if extra is None:
                return e
            return Binary("or", e, InLocation(e.process, extra))
        if isinstance(e, Index):
            return Index(e.name, walk(e.index))
        if isinstance(e, Unary):
            return Unary(e.op, walk(e.operand))
        if isinstance(e, Binary):
            return Binary(e.op, walk(e.left), walk(e.right))
        return e

    return walk(expr)


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: int
    hi: int
    init: Union[int, tuple] = 0
    length: Optional[int] = None
    pos: Pos = field(default=None, compare=False)

    def initial_values(self) -> tuple:
        if self.length is None:
            return (self.init,)
        if isinstance(self.init, tuple):
            return self.init
        return (self.init,) * self.length

    @property
    def width(self) -> int:
        return 1 if self.length is None else self.length


@dataclass(frozen=True)
class Channel:
    name: str
    arity: int = 0
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Sync:
    channel: str
    direction: str  # 'send' or 'recv'
    payload: Optional[Expr] = None  # an expression for send, an lvalue for recv


@dataclass(frozen=True)
class Transition:
    src: str
    dst: str
    guard: Expr = TRUE
    sync: Optional[Sync] = None
    effects: tuple = ()  # ((LValue, Expr), ...)
    pos: Pos = field(default=None, compare=False)


@dataclass(frozen=True)
class Process:
    name: str
    locations: tuple
    initial: str
    transitions: tuple = ()
    locals: tuple = ()
    accepting: frozenset = frozenset()
    pos: Pos = field(default=None, compare=False)

    def outgoing(self, location: str) -> list:
        return [i for i, t in enumerate(self.transitions) if t.src == location]


@dataclass(frozen=True)
class TickSpec:
    """Native clock process installed by lowering.

    For ``ledm`` the timers are the pair ``(ubtimer, lbtimer)``; for ``eedm``
    a single array name ``(timer,)``. ``signals`` only exists for eedm.
    """

    mode: str
    timers: tuple
    signals: Optional[str] = None
    now: Optional[str] = None
    infinity: int = DEFAULT_INFINITY
    maximal: int = DEFAULT_MAXIMAL
    # ((process, location, second phase), ...) for locations eedm split in two
    phases: tuple = ()


@dataclass(frozen=True)
class Model:
    constants: Mapping = field(default_factory=dict)
    globals: tuple = ()
    channels: tuple = ()
    processes: tuple = ()
    property: Optional[int] = None
    tick: Optional[TickSpec] = None

    def process(self, name: str) -> Process:
        for p in self.processes:
            if p.name == name:
                return p
        raise KeyError(name)

    def process_index(self, name: str) -> int:
        for i, p in enumerate(self.processes):
            if p.name == name:
                return i
        raise KeyError(name)

    def system_processes(self) -> list:
        return [p for i, p in enumerate(self.processes) if i != self.property]

    def global_decl(self, name: str) -> Optional[VarDecl]:
        for g in self.globals:
            if g.name == name:
                return g
        return None


@dataclass(frozen=True)
class TimedModel:
    base: Model
    bounds: Mapping = field(default_factory=dict)  # (process, transition index) -> (lb, ub)
    observe: frozenset = frozenset()  # {(process, transition index)}

    def bound_of(self, process: str, index: int):
        return self.bounds.get((process, index))


# ---------------------------------------------------------------------------
# Runtime states


class Layout:
    """Slot assignment for flat state vectors.

    A state is a tuple of ints: globals first (arrays laid out contiguously),
    then for each process its location index followed by its locals.
    """

    def __init__(self, model: Model):
        self.model = model
        self.constants = dict(model.constants)
        self.globals: dict = {}
        slot = 0
        for g in model.globals:
            self.globals[g.name] = (slot, g)
            slot += g.width
        self.n_globals = slot
        self.loc_slot: list = []
        self.locals: list = []
        self.loc_index: list = []
        for p in model.processes:
            self.loc_slot.append(slot)
            slot += 1
            table = {}
            for v in p.locals:
                table[v.name] = (slot, v)
                slot += v.width
            self.locals.append(table)
            self.loc_index.append({name: k for k, name in enumerate(p.locations)})
        self.size = slot
        self._ranges = [None] * slot
        for start, g in self.globals.values():
            for k in range(g.width):
                self._ranges[start + k] = (g.lo, g.hi)
        for i, p in enumerate(model.processes):
            self._ranges[self.loc_slot[i]] = (0, len(p.locations) - 1)
            for start, v in self.locals[i].values():
                for k in range(v.width):
                    self._ranges[start + k] = (v.lo, v.hi)

    def initial(self) -> tuple:
        values = [0] * self.size
        for start, g in self.globals.values():
            for k, v in enumerate(g.initial_values()):
                values[start + k] = v
        for i, p in enumerate(self.model.processes):
            values[self.loc_slot[i]] = self.loc_index[i][p.initial]
            for start, v in self.locals[i].values():
                for k, x in enumerate(v.initial_values()):
                    values[start + k] = x
        return tuple(values)

    def lookup(self, name: str, process: Optional[int] = None):
        """Return ``(slot, decl)`` for a variable visible from ``process``."""
        if process is not None and name in self.locals[process]:
            return self.locals[process][name]
        if name in self.globals:
            return self.globals[name]
        return None

    def valid(self, values: Sequence[int]) -> bool:
        if len(values) != self.size:
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(values, self._ranges))

    def text(self, values: Sequence[int]) -> str:
        """Canonical human-readable rendering of a state."""
        parts = []
        for name, (start, g) in self.globals.items():
            parts.append(f"{name}={_fmt_var(values, start, g)}")
        for i, p in enumerate(self.model.processes):
            loc = p.locations[values[self.loc_slot[i]]]
            inner = ",".join(
                f"{n}={_fmt_var(values, s, v)}" for n, (s, v) in self.locals[i].items()
            )
            parts.append(f"{p.name}@{loc}" + (f"{{{inner}}}" if inner else ""))
        return " ".join(parts)


def _fmt_var(values, start, decl: VarDecl) -> str:
    if decl.length is None:
        return str(values[start])
    return "[" + ",".join(str(x) for x in values[start : start + decl.length]) + "]"


_SIGN = 1 << 63


def encode(values: Sequence[int]) -> bytes:
    """Canonical byte encoding; byte order agrees with numeric tuple order."""
    return struct.pack(f">{len(values)}Q", *((v + _SIGN) for v in values))


def decode(data: bytes) -> tuple:
    n = len(data) // 8
    return tuple(v - _SIGN for v in struct.unpack(f">{n}Q", data))


@dataclass(frozen=True)
class State:
    layout: Layout = field(compare=False, repr=False)
    values: tuple

    @classmethod
    def initial(cls, model: Model) -> "State":
        layout = Layout(model)
        return cls(layout, layout.initial())

    def encode(self) -> bytes:
        return encode(self.values)

    def __getitem__(self, name: str):
        hit = self.layout.lookup(name)
        if hit is None:
            raise KeyError(name)
        start, decl = hit
        if decl.length is None:
            return self.values[start]
        return self.values[start : start + decl.length]

    def local(self, process: str, name: str):
        i = self.layout.model.process_index(process)
        start, decl = self.layout.locals[i][name]
        if decl.length is None:
            return self.values[start]
        return self.values[start : start + decl.length]

    def location(self, process: str) -> str:
        i = self.layout.model.process_index(process)
        p = self.layout.model.processes[i]
        return p.locations[self.values[self.layout.loc_slot[i]]]

    def __str__(self) -> str:
        return self.layout.text(self.values)


# ---------------------------------------------------------------------------
# Reference evaluator


def evaluate(expr: Expr, state: State, process: Optional[int] = None):
    """Evaluate ``expr`` in ``state``, resolving locals of ``process`` first."""
    layout = state.layout
    values = state.values

    def ev(e):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Name):
            hit = layout.lookup(e.name, process)
            if hit is not None:
                return values[hit[0]]
            if e.name in layout.constants:
                return layout.constants[e.name]
            raise EvaluationError(f"unresolved identifier {e.name!r}", state)
        if isinstance(e, Index):
            hit = layout.lookup(e.name, process)
            if hit is None or hit[1].length is None:
                raise EvaluationError(f"{e.name!r} is not an array", state)
            k = ev(e.index)
            if not 0 <= k < hit[1].length:
                raise EvaluationError(
                    f"index {k} out of range for {e.name}[{hit[1].length}]", state
                )
            return values[hit[0] + k]
        if isinstance(e, InLocation):
            i = layout.model.process_index(e.process)
            p = layout.model.processes[i]
            return p.locations[values[layout.loc_slot[i]]] == e.location
        if isinstance(e, Unary):
            v = ev(e.operand)
            return -v if e.op == "-" else not v
        if isinstance(e, Binary):
            op = e.op
            if op == "and":
                return bool(ev(e.left)) and bool(ev(e.right))
            if op == "or":
                return bool(ev(e.left)) or bool(ev(e.right))
            a, b = ev(e.left), ev(e.right)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "%":
                if b == 0:
                    raise EvaluationError("modulo by zero", state)
                return a % b
            if op == "==":
                return a == b
            if op == "!=":
                return a != b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            if op == ">=":
                return a >= b
            raise EvaluationError(f"unknown operator {op!r}", state)
        if isinstance(e, MinActiveTimer):
            tick = layout.model.tick
            if tick is None:
                raise EvaluationError("MIN_ACTIVE_TIMER outside a tick", state)
            start, decl = layout.globals[tick.timers[-1]]
            return min(values[start : start + decl.length])
        raise EvaluationError(f"cannot evaluate {e!r}", state)

    return ev(expr)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    message: str
    pos: Pos = None

    def __str__(self) -> str:
        if self.pos is None:
            return self.message
        return f"{self.pos[0]}:{self.pos[1]}: {self.message}"


RESERVED = {"MIN_ACTIVE_TIMER"}


def validate(model: Union[Model, TimedModel]) -> list:
    """Check every structural invariant; returns diagnostics, empty when clean."""
    if isinstance(model, TimedModel):
        return _validate_model(model.base) + _validate_timing(model)
    return _validate_model(model)


def _validate_model(model: Model) -> list:
    out: list = []

    def diag(msg, pos=None):
        out.append(Diagnostic(msg, pos))

    seen: dict = {}
    for name in model.constants:
        seen[name] = "constant"
    for g in model.globals:
        if g.name in seen:
            diag(f"duplicate name {g.name!r}", g.pos)
        seen[g.name] = "global"
        _check_decl(g, diag)
    chans = {}
    for c in model.channels:
        if c.name in seen or c.name in chans:
            diag(f"duplicate name {c.name!r}", c.pos)
        chans[c.name] = c
    procs: dict = {}
    for p in model.processes:
        if p.name in procs:
            diag(f"duplicate name {p.name!r}", p.pos)
        procs[p.name] = p

    if model.property is not None and not 0 <= model.property < len(model.processes):
        diag(f"property index {model.property} out of range")

    for i, p in enumerate(model.processes):
        is_property = i == model.property
        locals_ = {}
        for v in p.locals:
            if v.name in locals_ or v.name in seen:
                diag(f"duplicate name {v.name!r}", v.pos)
            locals_[v.name] = v
            _check_decl(v, diag)
        if len(set(p.locations)) != len(p.locations):
            diag(f"duplicate location in process {p.name!r}", p.pos)
        if not p.locations:
            diag(f"process {p.name!r} has no locations", p.pos)
        if p.initial not in p.locations:
            diag(f"initial location {p.initial!r} not declared", p.pos)
        for a in p.accepting:
            if a not in p.locations:
                diag(f"accepting location {a!r} not declared", p.pos)
        if p.accepting and not is_property:
            diag(f"accepting locations outside the property process {p.name!r}", p.pos)

        def scope_lookup(name):
            if name in locals_:
                return "var", locals_[name]
            g = model.global_decl(name)
            if g is not None:
                return "var", g
            if name in model.constants:
                return "const", None
            return None, None

        def typeof(e, pos):
            return _type_of(e, scope_lookup, procs, diag, pos)

        for t in p.transitions:
            pos = t.pos or p.pos
            for end in (t.src, t.dst):
                if end not in p.locations:
                    diag(f"location {end!r} not declared in {p.name!r}", pos)
            if typeof(t.guard, pos) not in ("bool", None):
                diag("guard must be boolean", pos)
            if t.sync is not None:
                if is_property:
                    diag("property process transitions cannot synchronise", pos)
                ch = chans.get(t.sync.channel)
                if ch is None:
                    diag(f"unresolved identifier {t.sync.channel!r}", pos)
                elif (t.sync.payload is not None) != (ch.arity >= 1):
                    diag(f"payload arity mismatch on channel {ch.name!r}", pos)
                if t.sync.payload is not None:
                    if t.sync.direction == "recv":
                        _check_lvalue(t.sync.payload, scope_lookup, diag, pos)
                    if typeof(t.sync.payload, pos) not in ("int", None):
                        diag("channel payload must be an integer", pos)
            if is_property and t.effects:
                diag("property process transitions cannot have effects", pos)
            for lhs, rhs in t.effects:
                _check_lvalue(lhs, scope_lookup, diag, pos)
                if typeof(lhs, pos) not in ("int", None):
                    diag("assignment target must be an integer", pos)
                if typeof(rhs, pos) not in ("int", None):
                    diag("assigned value must be an integer", pos)
    return out


def _check_decl(v: VarDecl, diag) -> None:
    if v.lo > v.hi:
        diag(f"empty range for {v.name!r}", v.pos)
    if v.length is not None and v.length < 1:
        diag(f"array {v.name!r} must have positive length", v.pos)
    if isinstance(v.init, tuple) and v.length is not None and len(v.init) != v.length:
        diag(f"initialiser length mismatch for {v.name!r}", v.pos)
    for x in v.initial_values():
        if not v.lo <= x <= v.hi:
            diag(f"initial value {x} of {v.name!r} outside [{v.lo}, {v.hi}]", v.pos)
            break


def _check_lvalue(e, scope_lookup, diag, pos) -> None:
    if isinstance(e, (Name, Index)):
        kind, _ = scope_lookup(e.name)
        if kind == "const":
            diag(f"cannot assign to constant {e.name!r}", pos)
    else:
        diag("assignment target must be a variable", pos)


def _type_of(e, scope_lookup, procs, diag, pos):
    """Return 'int', 'bool' or None (already diagnosed)."""

    def ty(e):
        if isinstance(e, IntLit):
            return "int"
        if isinstance(e, BoolLit):
            return "bool"
        if isinstance(e, Name):
            if e.name in RESERVED:
                diag(f"{e.name} is not allowed in models", pos)
                return None
            kind, decl = scope_lookup(e.name)
            if kind is None:
                diag(f"unresolved identifier {e.name!r}", pos)
                return None
            if kind == "var" and decl.length is not None:
                diag(f"array {e.name!r} used without index", pos)
                return None
            return "int"
        if isinstance(e, Index):
            kind, decl = scope_lookup(e.name)
            it = ty(e.index)
            if kind is None:
                diag(f"unresolved identifier {e.name!r}", pos)
                return None
            if kind != "var" or decl.length is None:
                diag(f"{e.name!r} is not an array", pos)
                return None
            if it not in ("int", None):
                diag("array index must be an integer", pos)
            return "int"
        if isinstance(e, InLocation):
            p = procs.get(e.process)
            if p is None:
                diag(f"unresolved identifier {e.process!r}", pos)
                return None
            if e.location not in p.locations:
                diag(f"unresolved identifier {e.process}.{e.location}", pos)
                return None
            return "bool"
        if isinstance(e, MinActiveTimer):
            diag("MIN_ACTIVE_TIMER is not allowed in models", pos)
            return None
        if isinstance(e, Unary):
            t = ty(e.operand)
            want = "int" if e.op == "-" else "bool"
            if t not in (want, None):
                diag(f"operand of {e.op!r} must be {want}", pos)
                return None
            return want
        if isinstance(e, Binary):
            lt, rt = ty(e.left), ty(e.right)
            if e.op in BOOL_OPS:
                want, res = "bool", "bool"
            elif e.op in COMPARE_OPS:
                want, res = "int", "bool"
            else:
                want, res = "int", "int"
            if e.op in ("==", "!=") and lt == rt == "bool":
                return "bool"
            for t in (lt, rt):
                if t not in (want, None):
                    diag(f"operands of {e.op!r} must be {want}", pos)
                    return None
            return res
        diag(f"unknown expression {e!r}", pos)
        return None

    return ty(e)


def _validate_timing(tm: TimedModel) -> list:
    out: list = []
    m = tm.base
    for key, (lb, ub) in tm.bounds.items():
        pname, ti = key
        try:
            p = m.process(pname)
        except KeyError:
            out.append(Diagnostic(f"bound on unknown process {pname!r}"))
            continue
        if not 0 <= ti < len(p.transitions):
            out.append(Diagnostic(f"bound on unknown transition {pname}.{ti}"))
            continue
        pos = p.transitions[ti].pos
        if lb is None and ub is None:
            out.append(Diagnostic("time clause with neither bound", pos))
        if lb is not None and lb < 0:
            out.append(Diagnostic("lower bound must be non-negative", pos))
        if ub is not None and ub < 1:
            out.append(Diagnostic("upper bound must be at least 1", pos))
        if lb is not None and ub is not None and lb > ub:
            out.append(Diagnostic(f"lower bound {lb} exceeds upper bound {ub}", pos))
        if p.transitions[ti].sync is not None:
            out.append(Diagnostic("a bounded transition cannot synchronise", pos))
        if m.property is not None and m.processes[m.property].name == pname:
            out.append(Diagnostic("the property process cannot carry time bounds", pos))
    for pname, ti in tm.observe:
        if (pname, ti) not in tm.bounds:
            out.append(Diagnostic(f"observe without time bounds on {pname}.{ti}"))
    for p in m.processes:
        per_loc: dict = {}
        for (pname, ti) in tm.bounds:
            if pname == p.name and 0 <= ti < len(p.transitions):
                per_loc.setdefault(p.transitions[ti].src, []).append(ti)
        for loc, tis in per_loc.items():
            if len(tis) > 1:
                out.append(
                    Diagnostic(
                        f"location {p.name}.{loc} sources {len(tis)} bounded transitions",
                        p.transitions[tis[1]].pos,
                    )
                )
    return out
