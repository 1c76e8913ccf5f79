"""Successor semantics, state-space exploration and safety checking.

Models are compiled to a Python successor function (generated source, one
branch per transition) for speed; ``reference_successors`` is a slow
interpreter over the same semantics used as an independent oracle in tests.

Successor order is deterministic: local transitions by process index and
transition order, then rendezvous pairs by channel, sender, receiver, then
the Tick self-loops. With a property process every system step is paired
with each enabled property transition (evaluated in the pre-state), and a
system with no enabled step stutters in place so finite runs stay visible
to the claim.
"""

from __future__ import annotations

import re
import resource
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import (
    BoolLit,
    Binary,
    EvaluationError,
    Expr,
    Index,
    InLocation,
    IntLit,
    Layout,
    MinActiveTimer,
    Model,
    ModelError,
    Name,
    State,
    Unary,
    encode,
    evaluate,
    widen_locations,
)


class ResourceError(Exception):
    def __init__(self, message: str, stats: "ExplorationStats"):
        super().__init__(message)
        self.stats = stats


class TraceError(Exception):
    pass


# ---------------------------------------------------------------------------
# Compilation


STUTTER = "stutter"


def _label_text(parts) -> str:
    return "|".join(p if isinstance(p, str) else f"{p[0]}.{p[1]}" for p in parts)


class _Emitter:
    def __init__(self, layout: Layout):
        self.layout = layout
        self.lines: list = []

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def expr(self, e: Expr, proc: Optional[int], var: str = "s") -> str:
        lay = self.layout
        if isinstance(e, IntLit):
            return repr(e.value)
        if isinstance(e, BoolLit):
            return "True" if e.value else "False"
        if isinstance(e, Name):
            hit = lay.lookup(e.name, proc)
            if hit is not None:
                return f"{var}[{hit[0]}]"
            if e.name in lay.constants:
                return repr(lay.constants[e.name])
            raise ModelError(f"unresolved identifier {e.name!r}")
        if isinstance(e, Index):
            start, decl = lay.lookup(e.name, proc)
            if isinstance(e.index, IntLit) and 0 <= e.index.value < decl.length:
                return f"{var}[{start + e.index.value}]"
            idx = self.expr(e.index, proc, var)
            return f"{var}[{start} + _ix({idx}, {decl.length}, {e.name!r}, {var})]"
        if isinstance(e, InLocation):
            i = lay.model.process_index(e.process)
            loc = lay.loc_index[i][e.location]
            return f"({var}[{lay.loc_slot[i]}] == {loc})"
        if isinstance(e, Unary):
            inner = self.expr(e.operand, proc, var)
            return f"(-{inner})" if e.op == "-" else f"(not {inner})"
        if isinstance(e, Binary):
            a = self.expr(e.left, proc, var)
            b = self.expr(e.right, proc, var)
            if e.op == "%":
                if isinstance(e.right, IntLit) and e.right.value != 0:
                    return f"({a} % {b})"
                return f"_mod({a}, {b}, {var})"
            if e.op in ("and", "or"):
                return f"(bool({a}) {e.op} bool({b}))"
            return f"({a} {e.op} {b})"
        if isinstance(e, MinActiveTimer):
            tick = lay.model.tick
            start, decl = lay.globals[tick.timers[-1]]
            return f"min({var}[{start}:{start + decl.length}])"
        raise ModelError(f"cannot compile {e!r}")

    def assignments(self, depth, effects, proc, var, tag, label_var):
        """Emit evaluation of ``effects`` against ``var``; return write lines."""
        writes = []
        for k, (lhs, rhs) in enumerate(effects):
            start, decl = self.layout.lookup(lhs.name, proc)
            self.emit(depth, f"v{tag}{k} = {self.expr(rhs, proc, var)}")
            self.emit(
                depth,
                f"if not {decl.lo} <= v{tag}{k} <= {decl.hi}: "
                f"_range({label_var}, {lhs.name!r}, v{tag}{k}, {var})",
            )
            if isinstance(lhs, Index):
                idx = self.expr(lhs.index, proc, var)
                self.emit(depth, f"k{tag}{k} = _ix({idx}, {decl.length}, {lhs.name!r}, {var})")
                writes.append(f"n[{start} + k{tag}{k}] = v{tag}{k}")
            else:
                writes.append(f"n[{start}] = v{tag}{k}")
        return writes


def _raise_index(k, n, name, s):
    raise EvaluationError(f"index {k} out of range for {name}[{n}]", s)


def _ix(k, n, name, s):
    if 0 <= k < n:
        return k
    _raise_index(k, n, name, s)


def _mod(a, b, s):
    if b == 0:
        raise EvaluationError("modulo by zero", s)
    return a % b


class CompiledModel:
    """A model with its successor function generated as Python source."""

    def __init__(self, model: Model):
        self.model = model
        self.layout = Layout(model)
        self.initial = self.layout.initial()
        self.labels: list = []
        self.source = self._generate()
        namespace = {
            "_ix": _ix,
            "_mod": _mod,
            "_range": self._range_error,
            "LABELS": self.labels,
        }
        exec(compile(self.source, f"<successors:{id(self)}>", "exec"), namespace)
        self._succ = namespace["successors"]

    def _range_error(self, label, name, value, s):
        raise EvaluationError(
            f"assignment {name} = {value} out of range in transition {self.labels[label]}",
            State(self.layout, tuple(s)),
        )

    def successors(self, s: tuple) -> list:
        """Return ``[(label_id, successor_values), ...]``."""
        try:
            return self._succ(s)
        except EvaluationError as exc:
            if exc.state is None or not isinstance(exc.state, State):
                exc.state = State(self.layout, tuple(s))
            raise

    def label(self, lid: int) -> str:
        return self.labels[lid]

    # -- code generation

    def _generate(self) -> str:
        m, lay = self.model, self.layout
        em = _Emitter(lay)
        prop = m.property
        # system steps as (label parts, emitter callback)
        sys_steps = []
        for i, p in enumerate(m.processes):
            if i == prop:
                continue
            for j, t in enumerate(p.transitions):
                if t.sync is None:
                    sys_steps.append(((p.name, j),))
        pairs = []
        for ch in m.channels:
            for i, p in enumerate(m.processes):
                if i == prop:
                    continue
                for j, t in enumerate(p.transitions):
                    if t.sync is None or t.sync.channel != ch.name or t.sync.direction != "send":
                        continue
                    for k, q in enumerate(m.processes):
                        if k == prop or k == i:
                            continue
                        for r, u in enumerate(q.transitions):
                            if u.sync and u.sync.channel == ch.name and u.sync.direction == "recv":
                                pairs.append((i, j, k, r))
                                sys_steps.append(((p.name, j), (q.name, r)))
        tick_loops = []
        if m.tick is not None:
            tick_loops = [0, 1] if (m.tick.mode == "eedm" and m.tick.signals) else [0]
            for loop in tick_loops:
                sys_steps.append((("tick", loop),))

        prop_moves = []
        if prop is not None:
            # a deadlocked system idles so the claim can still close a cycle
            sys_steps.append((STUTTER,))
            pp = m.processes[prop]
            prop_moves = [(pp.name, j) for j in range(len(pp.transitions))]
            for sp in sys_steps:
                for pm in prop_moves:
                    self.labels.append(_label_text(sp + (pm,)))
        else:
            for sp in sys_steps:
                self.labels.append(_label_text(sp))
        n_prop = len(prop_moves)
        step_id = {sp: k for k, sp in enumerate(sys_steps)}

        em.emit(0, "def successors(s):")
        em.emit(1, "out = []")
        if prop is not None:
            pp = m.processes[prop]
            slot = lay.loc_slot[prop]
            em.emit(1, "pm = []")
            em.emit(1, f"pl = s[{slot}]")
            for j, t in enumerate(pp.transitions):
                src = lay.loc_index[prop][t.src]
                dst = lay.loc_index[prop][t.dst]
                em.emit(1, f"if pl == {src} and {em.expr(t.guard, prop)}:")
                em.emit(2, f"pm.append(({j}, {dst}))")
            em.emit(1, "if not pm:")
            em.emit(2, "return out")

        def finish(depth, sp):
            sid = step_id[sp]
            if prop is None:
                em.emit(depth, f"out.append(({sid}, tuple(n)))")
            else:
                slot = lay.loc_slot[prop]
                em.emit(depth, "for pj, pd in pm:")
                em.emit(depth + 1, f"n[{slot}] = pd")
                em.emit(depth + 1, f"out.append(({sid * n_prop} + pj, tuple(n)))")

        for i, p in enumerate(m.processes):
            if i == prop:
                continue
            slot = lay.loc_slot[i]
            em.emit(1, f"l{i} = s[{slot}]")
            for j, t in enumerate(p.transitions):
                if t.sync is not None:
                    continue
                sp = ((p.name, j),)
                sid = step_id[sp]
                lid = sid * n_prop if prop is not None else sid
                em.emit(1, f"if l{i} == {lay.loc_index[i][t.src]} and {em.expr(t.guard, i)}:")
                writes = em.assignments(2, t.effects, i, "s", "a", lid)
                em.emit(2, "n = list(s)")
                em.emit(2, f"n[{slot}] = {lay.loc_index[i][t.dst]}")
                for w in writes:
                    em.emit(2, w)
                finish(2, sp)

        for i, j, k, r in pairs:
            p, q = m.processes[i], m.processes[k]
            t, u = p.transitions[j], q.transitions[r]
            sp = ((p.name, j), (q.name, r))
            sid = step_id[sp]
            lid = sid * n_prop if prop is not None else sid
            cond = (
                f"s[{lay.loc_slot[i]}] == {lay.loc_index[i][t.src]} and "
                f"s[{lay.loc_slot[k]}] == {lay.loc_index[k][u.src]} and "
                f"{em.expr(t.guard, i)} and {em.expr(u.guard, k)}"
            )
            em.emit(1, f"if {cond}:")
            rvar = "s"
            if t.sync.payload is not None:
                target = u.sync.payload
                start, decl = lay.lookup(target.name, k)
                em.emit(2, f"pv = {em.expr(t.sync.payload, i)}")
                em.emit(
                    2,
                    f"if not {decl.lo} <= pv <= {decl.hi}: _range({lid}, {target.name!r}, pv, s)",
                )
                em.emit(2, "r = list(s)")
                if isinstance(target, Index):
                    idx = em.expr(target.index, k)
                    em.emit(2, f"r[{start} + _ix({idx}, {decl.length}, {target.name!r}, s)] = pv")
                else:
                    em.emit(2, f"r[{start}] = pv")
                em.emit(2, "r = tuple(r)")
                rvar = "r"
            w1 = em.assignments(2, t.effects, i, "s", "a", lid)
            w2 = em.assignments(2, u.effects, k, rvar, "b", lid)
            em.emit(2, f"n = list({rvar})")
            em.emit(2, f"n[{lay.loc_slot[i]}] = {lay.loc_index[i][t.dst]}")
            em.emit(2, f"n[{lay.loc_slot[k]}] = {lay.loc_index[k][u.dst]}")
            for w in w1 + w2:
                em.emit(2, w)
            finish(2, sp)

        if m.tick is not None:
            self._emit_tick(em, finish, tick_loops)
        if prop is not None:
            em.emit(1, "if not out:")
            em.emit(2, "n = list(s)")
            finish(2, (STUTTER,))
        em.emit(1, "return out")
        return "\n".join(em.lines) + "\n"

    def _emit_tick(self, em, finish, loops) -> None:
        m, lay = self.model, self.layout
        tick = m.tick
        inf = tick.infinity
        now = lay.globals[tick.now][0] if tick.now else None
        if tick.mode == "ledm":
            if tick.timers[0] not in lay.globals:
                em.emit(1, "if True:")
                em.emit(2, "n = list(s)")
            else:
                ub, decl = lay.globals[tick.timers[0]]
                lb, _ = lay.globals[tick.timers[1]]
                n = decl.length
                guard = " and ".join(f"s[{ub + k}] > 0" for k in range(n))
                em.emit(1, f"if {guard}:")
                em.emit(2, "n = list(s)")
                for k in range(n):
                    em.emit(2, f"if s[{ub + k}] != {inf}: n[{ub + k}] = s[{ub + k}] - 1")
                    em.emit(2, f"if s[{lb + k}]: n[{lb + k}] = s[{lb + k}] - 1")
            if now is not None:
                em.emit(2, f"n[{now}] = (s[{now}] + 1) % {tick.maximal}")
            finish(2, (("tick", 0),))
            return
        if tick.timers[0] not in lay.globals:
            return  # no system processes: every timer is absent, Tick never fires
        base, decl = lay.globals[tick.timers[0]]
        n = decl.length
        em.emit(1, f"tm = s[{base}:{base + n}]")
        em.emit(1, "mt = min(tm)")
        em.emit(1, f"if 0 < mt < {inf}:")
        if tick.signals:
            sb, _ = lay.globals[tick.signals]
            em.emit(2, f"sg = s[{sb}:{sb + n}]")
        for loop in loops:
            step = "mt" if loop == 0 else "1"
            depth = 2
            if tick.signals:
                cond = "not any(sg)" if loop == 0 else "1 in sg"
                em.emit(2, f"if {cond}:")
                depth = 3
            em.emit(depth, "n = list(s)")
            for k in range(n):
                em.emit(depth, f"if tm[{k}] != {inf}: n[{base + k}] = tm[{k}] - {step}")
            if now is not None:
                em.emit(depth, f"n[{now}] = (s[{now}] + {step}) % {tick.maximal}")
            finish(depth, (("tick", loop),))


_compiled_cache: dict = {}


def compiled(model: Model) -> CompiledModel:
    hit = _compiled_cache.get(id(model))
    if hit is not None and hit.model is model:
        return hit
    if len(_compiled_cache) > 64:
        _compiled_cache.clear()
    cm = CompiledModel(model)
    _compiled_cache[id(model)] = cm
    return cm


def successors(model: Model, state: State) -> list:
    """Public successor relation: ``[(label, State), ...]``."""
    cm = compiled(model)
    return [(cm.labels[lid], State(cm.layout, v)) for lid, v in cm.successors(state.values)]


def compile_predicate(model: Model, expr: Expr) -> Callable:
    cm = compiled(model)
    em = _Emitter(cm.layout)
    src = f"def pred(s):\n    return bool({em.expr(expr, None)})\n"
    ns = {"_ix": _ix, "_mod": _mod}
    exec(compile(src, "<predicate>", "exec"), ns)
    return ns["pred"]


# ---------------------------------------------------------------------------
# Reference interpreter (slow; the oracle for the compiled path)


def reference_successors(model: Model, state: State) -> list:
    layout = state.layout
    s = state.values
    prop = model.property

    def at(i, t):
        return s[layout.loc_slot[i]] == layout.loc_index[i][t.src]

    def apply(vals, proc, effects, ctx: State, label):
        writes = []
        for lhs, rhs in effects:
            v = evaluate(rhs, ctx, proc)
            start, decl = layout.lookup(lhs.name, proc)
            if not decl.lo <= v <= decl.hi:
                raise EvaluationError(f"assignment {lhs.name} = {v} out of range in {label}", ctx)
            if isinstance(lhs, Index):
                k = evaluate(lhs.index, ctx, proc)
                if not 0 <= k < decl.length:
                    raise EvaluationError(f"index {k} out of range for {lhs.name}", ctx)
                writes.append((start + k, v))
            else:
                writes.append((start, v))
        return writes

    steps = []
    for i, p in enumerate(model.processes):
        if i == prop:
            continue
        for j, t in enumerate(p.transitions):
            if t.sync is None and at(i, t) and evaluate(t.guard, state, i):
                label = f"{p.name}.{j}"
                n = list(s)
                n[layout.loc_slot[i]] = layout.loc_index[i][t.dst]
                for slot, v in apply(n, i, t.effects, state, label):
                    n[slot] = v
                steps.append((label, n))
    for ch in model.channels:
        for i, p in enumerate(model.processes):
            if i == prop:
                continue
            for j, t in enumerate(p.transitions):
                if not (t.sync and t.sync.channel == ch.name and t.sync.direction == "send"):
                    continue
                for k, q in enumerate(model.processes):
                    if k in (i, prop):
                        continue
                    for r, u in enumerate(q.transitions):
                        if not (u.sync and u.sync.channel == ch.name and u.sync.direction == "recv"):
                            continue
                        if not (at(i, t) and at(k, u)):
                            continue
                        if not (evaluate(t.guard, state, i) and evaluate(u.guard, state, k)):
                            continue
                        label = f"{p.name}.{j}|{q.name}.{r}"
                        mid = list(s)
                        if t.sync.payload is not None:
                            pv = evaluate(t.sync.payload, state, i)
                            start, decl = layout.lookup(u.sync.payload.name, k)
                            if not decl.lo <= pv <= decl.hi:
                                raise EvaluationError(f"payload out of range in {label}", state)
                            if isinstance(u.sync.payload, Index):
                                idx = evaluate(u.sync.payload.index, state, k)
                                if not 0 <= idx < decl.length:
                                    raise EvaluationError("payload index out of range", state)
                                start += idx
                            mid[start] = pv
                        rstate = State(layout, tuple(mid))
                        n = list(mid)
                        n[layout.loc_slot[i]] = layout.loc_index[i][t.dst]
                        n[layout.loc_slot[k]] = layout.loc_index[k][u.dst]
                        for slot, v in apply(n, i, t.effects, state, label):
                            n[slot] = v
                        for slot, v in apply(n, k, u.effects, rstate, label):
                            n[slot] = v
                        steps.append((label, n))
    tick = model.tick
    if tick is not None:
        steps.extend(_reference_tick(model, layout, s))

    if prop is None:
        return [(label, State(layout, tuple(n))) for label, n in steps]
    pp = model.processes[prop]
    moves = [
        (j, t) for j, t in enumerate(pp.transitions) if at(prop, t) and evaluate(t.guard, state, prop)
    ]
    if not steps:
        steps = [(STUTTER, list(s))]
    out = []
    for label, n in steps:
        for j, t in moves:
            n2 = list(n)
            n2[layout.loc_slot[prop]] = layout.loc_index[prop][t.dst]
            out.append((f"{label}|{pp.name}.{j}", State(layout, tuple(n2))))
    return out


def _reference_tick(model, layout, s) -> list:
    tick = model.tick
    inf = tick.infinity

    def arr(name):
        start, decl = layout.globals[name]
        return start, list(s[start : start + decl.length])

    out = []
    if tick.mode == "ledm":
        n = list(s)
        if tick.timers[0] in layout.globals:
            ub_at, ub = arr(tick.timers[0])
            lb_at, lb = arr(tick.timers[1])
            if not all(x > 0 for x in ub):
                return out
            for k, x in enumerate(ub):
                n[ub_at + k] = x if x == inf else x - 1
            for k, x in enumerate(lb):
                n[lb_at + k] = x - 1 if x > 0 else 0
        if tick.now:
            at = layout.globals[tick.now][0]
            n[at] = (s[at] + 1) % tick.maximal
        out.append(("tick.0", n))
        return out
    if tick.timers[0] not in layout.globals:
        return out
    t_at, timers = arr(tick.timers[0])
    if not (all(x > 0 for x in timers) and any(x != inf for x in timers)):
        return out
    signals = arr(tick.signals)[1] if tick.signals else [0] * len(timers)
    modes = []
    if all(x == 0 for x in signals):
        modes.append((0, min(timers)))
    if tick.signals and any(x == 1 for x in signals):
        modes.append((1, 1))
    for loop, step in modes:
        n = list(s)
        for k, x in enumerate(timers):
            n[t_at + k] = x if x == inf else x - step
        if tick.now:
            at = layout.globals[tick.now][0]
            n[at] = (s[at] + step) % tick.maximal
        out.append((f"tick.{loop}", n))
    return out


# ---------------------------------------------------------------------------
# Exploration


@dataclass
class ExplorationStats:
    states: int = 0
    transitions: int = 0
    time_ms: float = 0.0
    mem_bytes: int = 0
    deadlocks: int = 0
    levels: int = 0


@dataclass
class StateGraph:
    states: list  # index -> state vector
    edges: list  # index -> [(target, label id)]
    labels: list  # label id -> text
    accepting: bytearray
    parent: list = field(default_factory=list)  # index -> (pred, label id) or None
    layout: Optional[Layout] = None
    initial: int = 0
    stats: Optional[ExplorationStats] = None

    def __len__(self) -> int:
        return len(self.states)

    def encoding(self, i: int) -> bytes:
        return encode(self.states[i])

    def state(self, i: int) -> State:
        return State(self.layout, self.states[i])

    @property
    def edge_count(self) -> int:
        return sum(len(e) for e in self.edges)

    def edge_set(self) -> set:
        return {
            (self.states[u], self.labels[lid], self.states[v])
            for u, out in enumerate(self.edges)
            for v, lid in out
        }

    @classmethod
    def from_edges(cls, n: int, edges, accepting, initial: int = 0) -> "StateGraph":
        """Build an abstract graph (states are ``(i,)``) for detector tests."""
        adj = [[] for _ in range(n)]
        for u, v in edges:
            adj[u].append((v, 0))
        acc = bytearray(n)
        for a in accepting:
            acc[a] = 1
        return cls([(i,) for i in range(n)], adj, ["e"], acc, [None] * n, None, initial)


def _peak_rss() -> int:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def _explore(
    model: Model,
    workers: int = 1,
    max_states: Optional[int] = None,
    bad: Optional[Callable] = None,
    exhaustive: bool = False,
):
    """Level-synchronous BFS with states hash-partitioned among workers.

    Each worker expands the frontier states it owns and routes successors to
    their owning partition; owners deduplicate against their own seen-set.
    New states are numbered by (frontier position, successor ordinal) of the
    first discovery, so numbering equals a sequential BFS for any worker
    count. The level barrier doubles as termination detection.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    t0 = time.perf_counter()
    cm = compiled(model)
    W = workers
    seen = [dict() for _ in range(W)]
    init = cm.initial
    states = [init]
    parent: list = [None]
    edges: list = [None]
    seen[hash(init) % W][init] = 0
    stats = ExplorationStats()
    found = None
    if bad is not None and bad(init):
        found = 0
    frontier = [0]
    pool = ThreadPoolExecutor(max_workers=W) if W > 1 else None

    def run(fn, items):
        if pool is None:
            return [fn(x) for x in items]
        return list(pool.map(fn, items))

    try:
        while frontier and (found is None or exhaustive):
            stats.levels += 1
            owned = [[] for _ in range(W)]
            for pos, idx in enumerate(frontier):
                owned[hash(states[idx]) % W].append(pos)

            def expand(w):
                outbox = [[] for _ in range(W)]
                expanded = []
                for pos in owned[w]:
                    succ = cm.successors(states[frontier[pos]])
                    expanded.append((pos, succ))
                    for k, (lid, v) in enumerate(succ):
                        outbox[hash(v) % W].append((pos, k, v))
                return expanded, outbox

            results = run(expand, range(W))

            def dedup(w):
                mine = seen[w]
                fresh = {}
                for _, outbox in results:
                    for pos, k, v in outbox[w]:
                        if v in mine:
                            continue
                        key = (pos, k)
                        old = fresh.get(v)
                        if old is None or key < old:
                            fresh[v] = key
                return fresh

            fresh_parts = run(dedup, range(W))
            new = sorted(
                ((key, v, w) for w, part in enumerate(fresh_parts) for v, key in part.items()),
                key=lambda item: item[0],
            )
            succ_at = {}
            for expanded, _ in results:
                for pos, succ in expanded:
                    succ_at[pos] = succ
            next_frontier = []
            for (pos, k), v, w in new:
                idx = len(states)
                states.append(v)
                parent.append((frontier[pos], succ_at[pos][k][0]))
                edges.append(None)
                seen[w][v] = idx
                next_frontier.append(idx)
                if found is None and bad is not None and bad(v):
                    found = idx
            for pos, succ in succ_at.items():
                out = []
                for lid, v in succ:
                    out.append((seen[hash(v) % W][v], lid))
                edges[frontier[pos]] = out
                stats.transitions += len(out)
                if not out:
                    stats.deadlocks += 1
            if max_states is not None and len(states) > max_states:
                stats.states = len(states)
                stats.time_ms = (time.perf_counter() - t0) * 1000
                stats.mem_bytes = _peak_rss()
                raise ResourceError(f"state budget of {max_states} exceeded", stats)
            frontier = next_frontier
    finally:
        if pool is not None:
            pool.shutdown()
    for i, e in enumerate(edges):
        if e is None:
            edges[i] = []
    stats.states = len(states)
    stats.time_ms = (time.perf_counter() - t0) * 1000
    stats.mem_bytes = _peak_rss()
    accepting = bytearray(len(states))
    if model.property is not None:
        pi = model.property
        slot = cm.layout.loc_slot[pi]
        acc = {cm.layout.loc_index[pi][a] for a in model.processes[pi].accepting}
        for i, v in enumerate(states):
            if v[slot] in acc:
                accepting[i] = 1
    graph = StateGraph(states, edges, cm.labels, accepting, parent, cm.layout, 0)
    return graph, stats, found


def explore(model: Model, workers: int = 1, max_states: Optional[int] = None) -> StateGraph:
    graph, stats, _ = _explore(model, workers, max_states)
    graph.stats = stats
    return graph


# ---------------------------------------------------------------------------
# Verdicts and traces


@dataclass
class Verdict:
    result: str  # 'holds' or 'violated'
    trace: Optional[list] = None  # [(State, label of the edge taken next or None)]
    stats: ExplorationStats = field(default_factory=ExplorationStats)
    loop_start: Optional[int] = None  # for lassos: index the last state loops back to

    @property
    def holds(self) -> bool:
        return self.result == "holds"


def path_to(graph: StateGraph, target: int) -> list:
    """BFS-tree path from the initial state: ``[(index, label id into it)]``."""
    out = []
    i = target
    while i is not None:
        p = graph.parent[i]
        if p is None:
            out.append((i, None))
            break
        out.append((i, p[1]))
        i = p[0]
    out.reverse()
    return out


def _steps_to_trace(graph: StateGraph, indices, labels) -> list:
    """``indices[k]`` reached by ``labels[k]``; returns (State, outgoing label)."""
    trace = []
    for k, idx in enumerate(indices):
        nxt = graph.labels[labels[k + 1]] if k + 1 < len(indices) else None
        trace.append((graph.state(idx), nxt))
    return trace


def check_safety(
    model: Model,
    bad: Expr,
    workers: int = 1,
    max_states: Optional[int] = None,
    exhaustive: bool = False,
) -> Verdict:
    """Holds iff no reachable state satisfies ``bad``; BFS gives a shortest trace.

    With ``exhaustive`` the whole reachable graph is built even after a
    violation, so the stats describe the full state space.
    """
    if model.tick is not None and model.tick.phases:
        bad = widen_locations(bad, {(p, l): s for p, l, s in model.tick.phases})
    pred = compile_predicate(model, bad)
    graph, stats, found = _explore(model, workers, max_states, pred, exhaustive)
    if found is None:
        return Verdict("holds", None, stats)
    path = path_to(graph, found)
    trace = _steps_to_trace(graph, [i for i, _ in path], [lid for _, lid in path])
    return Verdict("violated", trace, stats)


_TRACE_LINE = re.compile(r"^#(\d+) (.*?)(?: --\((.*)\)-->)?$")


def format_trace(verdict: Verdict) -> str:
    lines = []
    for k, (state, label) in enumerate(verdict.trace or []):
        line = f"#{k} {state}"
        if label is not None:
            line += f" --({label})-->"
        lines.append(line)
    if verdict.loop_start is not None:
        lines.append(f"# cycle: last state steps back to #{verdict.loop_start}")
    return "\n".join(lines) + "\n"


def write_trace(verdict: Verdict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_trace(verdict))


def replay_trace(model: Model, text: str) -> list:
    """Re-execute a trace file against ``model``; returns the replayed states.

    Raises ``TraceError`` when a recorded step is not a successor or a
    recorded state does not match.
    """
    cm = compiled(model)
    rows = []
    loop_back = None
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if raw.startswith("# cycle:"):
            loop_back = int(raw.rsplit("#", 1)[1])
            continue
        m = _TRACE_LINE.match(raw)
        if m is None:
            raise TraceError(f"malformed trace line: {raw!r}")
        rows.append((int(m.group(1)), m.group(2), m.group(3)))
    if not rows:
        raise TraceError("empty trace")
    cur = cm.initial
    if cm.layout.text(cur) != rows[0][1]:
        raise TraceError("trace does not start in the initial state")
    replayed = [State(cm.layout, cur)]
    for k, (_, _, label) in enumerate(rows):
        if label is None:
            if k != len(rows) - 1:
                raise TraceError(f"step #{k} has no edge label")
            break
        target_text = rows[k + 1][1] if k + 1 < len(rows) else None
        if target_text is None and loop_back is not None:
            target_text = rows[loop_back][1]
        options = [v for lid, v in cm.successors(cur) if cm.labels[lid] == label]
        match = [v for v in options if cm.layout.text(v) == target_text]
        if not match:
            raise TraceError(f"step #{k} --({label})--> does not reproduce the recorded state")
        cur = match[0]
        replayed.append(State(cm.layout, cur))
    return replayed
