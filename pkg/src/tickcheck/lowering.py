"""Compile timed models into untimed ones with an explicit clock process.

Two methods are provided:

``ledm``
    Each system process ``i`` owns a count-down pair ``ubtimer[i]`` /
    ``lbtimer[i]``; the Tick advances time one unit per step and is disabled
    while any ``ubtimer`` is zero.

``eedm``
    Each process owns one ``timer[i]``. A transition with both bounds gets a
    two-phase source location: the first phase waits out the lower bound, a
    bridge transition loads ``ub - lb`` and the bounded transition leaves
    from the second phase. The Tick leaps by the smallest active timer, or
    steps by one while some ``signal[i]`` is raised (observed windows).

Both passes install timers on every transition *entering* a location that
sources a bounded transition (and on the initial state), and clear them on
transitions leaving such a location for an untimed one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .model import (
    DEFAULT_INFINITY,
    DEFAULT_MAXIMAL,
    Binary,
    IntLit,
    Index,
    Model,
    ModelError,
    Process,
    TickSpec,
    TimedModel,
    Transition,
    VarDecl,
    conj,
    validate,
    widen_locations,
)


class LoweringError(ModelError):
    pass


@dataclass(frozen=True)
class LoweringConfig:
    method: str = "eedm"
    include_now: Optional[bool] = None  # None: only when observe flags exist
    infinity: int = DEFAULT_INFINITY
    maximal: int = DEFAULT_MAXIMAL

    def wants_now(self, tm: TimedModel) -> bool:
        if self.include_now is None:
            return bool(tm.observe)
        return self.include_now


def lower(tm: TimedModel, cfg: Optional[LoweringConfig] = None) -> Model:
    cfg = cfg or LoweringConfig()
    if cfg.method == "ledm":
        return lower_ledm(tm, cfg)
    if cfg.method == "eedm":
        return lower_eedm(tm, cfg)
    raise LoweringError(f"unknown lowering method {cfg.method!r}")


@dataclass
class _Bound:
    index: int
    lb: Optional[int]
    ub: Optional[int]
    observe: bool


def _check(tm: TimedModel, cfg: LoweringConfig) -> None:
    diags = validate(tm)
    if diags:
        raise LoweringError("; ".join(str(d) for d in diags))
    if cfg.maximal <= cfg.infinity:
        raise LoweringError(f"MAXIMAL ({cfg.maximal}) must exceed INFINITY ({cfg.infinity})")
    for (pname, ti), (lb, ub) in tm.bounds.items():
        for b in (lb, ub):
            if b is not None and b >= cfg.infinity:
                raise LoweringError(
                    f"bound {b} on {pname}.{ti} is not below INFINITY ({cfg.infinity})"
                )


def _bounded_locations(tm: TimedModel, p: Process) -> dict:
    out = {}
    for k, t in enumerate(p.transitions):
        b = tm.bound_of(p.name, k)
        if b is not None:
            out[t.src] = _Bound(k, b[0], b[1], (p.name, k) in tm.observe)
    return out


def _timer_slots(m: Model) -> dict:
    """Map process index -> timer index (system processes only)."""
    slots = {}
    for i in range(len(m.processes)):
        if i != m.property:
            slots[i] = len(slots)
    return slots


def _reserve(m: Model, names) -> None:
    for name in names:
        if m.global_decl(name) is not None or name in m.constants:
            raise LoweringError(f"model already declares reserved name {name!r}")


def _set(array: str, i: int, value) -> tuple:
    rhs = value if not isinstance(value, int) else IntLit(value)
    return (Index(array, IntLit(i)), rhs)


def _now_decl(cfg: LoweringConfig) -> VarDecl:
    return VarDecl("now", 0, cfg.maximal - 1, 0)


# ---------------------------------------------------------------------------


def lower_ledm(tm: TimedModel, cfg: Optional[LoweringConfig] = None) -> Model:
    cfg = cfg or LoweringConfig(method="ledm")
    _check(tm, cfg)
    m = tm.base
    include_now = cfg.wants_now(tm)
    _reserve(m, ["ubtimer", "lbtimer"] + (["now"] if include_now else []))
    inf = cfg.infinity
    slots = _timer_slots(m)
    n = len(slots)

    ub_init = [inf] * n
    lb_init = [0] * n
    lb_max = 0
    processes = []
    for pi, p in enumerate(m.processes):
        if pi not in slots:
            processes.append(p)
            continue
        k = slots[pi]
        timed = _bounded_locations(tm, p)

        def install(loc):
            b = timed[loc]
            return (
                _set("ubtimer", k, inf if b.ub is None else b.ub),
                _set("lbtimer", k, 0 if b.lb is None else b.lb),
            )

        clear = (_set("ubtimer", k, inf), _set("lbtimer", k, 0))
        for b in timed.values():
            lb_max = max(lb_max, b.lb or 0)
        if p.initial in timed:
            (_, ub), (_, lb) = install(p.initial)
            ub_init[k], lb_init[k] = ub.value, lb.value

        new = []
        for j, t in enumerate(p.transitions):
            guard = t.guard
            b = timed.get(t.src)
            if b is not None and b.index == j:
                guard = conj(guard, Binary("==", Index("lbtimer", IntLit(k)), IntLit(0)))
            extra = ()
            if t.dst in timed:
                extra = install(t.dst)
            elif t.src in timed:
                extra = clear
            new.append(replace(t, guard=guard, effects=t.effects + extra))
        processes.append(replace(p, transitions=tuple(new)))

    globals_ = list(m.globals)
    if n:
        globals_.append(VarDecl("ubtimer", 0, inf, tuple(ub_init), n))
        globals_.append(VarDecl("lbtimer", 0, lb_max, tuple(lb_init), n))
    if include_now:
        globals_.append(_now_decl(cfg))
    tick = TickSpec(
        mode="ledm",
        timers=("ubtimer", "lbtimer"),
        now="now" if include_now else None,
        infinity=inf,
        maximal=cfg.maximal,
    )
    return replace(m, globals=tuple(globals_), processes=tuple(processes), tick=tick)


# ---------------------------------------------------------------------------


def _adopt(m: Model, name: str, n: int, lo: int, hi: int) -> Optional[VarDecl]:
    """Accept a user-declared clock array (models that drive timers by hand)."""
    decl = m.global_decl(name)
    if decl is None:
        return None
    if decl.length != n or decl.lo != lo or decl.hi < hi:
        raise LoweringError(
            f"declared {name!r} must be an array of {n} over [{lo}, {hi}] to be adopted"
        )
    return decl


def widen_transition(t: Transition, phases: dict) -> Transition:
    """Make location tests in ``t`` also accept the split second phases."""
    if not phases:
        return t
    w = lambda e: widen_locations(e, phases)  # noqa: E731
    sync = t.sync
    if sync is not None and sync.payload is not None:
        sync = replace(sync, payload=w(sync.payload))
    effects = tuple((w(lhs), w(rhs)) for lhs, rhs in t.effects)
    return replace(t, guard=w(t.guard), sync=sync, effects=effects)


def _fresh(name: str, taken: set) -> str:
    candidate = name
    k = 2
    while candidate in taken:
        candidate = f"{name}{k}"
        k += 1
    taken.add(candidate)
    return candidate


def lower_eedm(tm: TimedModel, cfg: Optional[LoweringConfig] = None) -> Model:
    cfg = cfg or LoweringConfig(method="eedm")
    _check(tm, cfg)
    m = tm.base
    inf = cfg.infinity
    slots = _timer_slots(m)
    n = len(slots)

    adopted_timer = _adopt(m, "timer", n, 0, inf)
    adopted_signal = _adopt(m, "signal", n, 0, 1)
    adopted_now = m.global_decl("now")
    if adopted_signal is not None and adopted_signal.hi != 1:
        raise LoweringError("declared 'signal' must range over [0, 1]")
    if adopted_now is not None and (adopted_now.lo, adopted_now.hi) != (0, cfg.maximal - 1):
        raise LoweringError(f"declared 'now' must range over [0, {cfg.maximal - 1}]")
    include_now = adopted_now is not None or cfg.wants_now(tm)
    has_signals = adopted_signal is not None or bool(tm.observe)
    for name in ("timer", "signal"):
        if name in m.constants:
            raise LoweringError(f"model already declares reserved name {name!r}")

    timer_init = list(adopted_timer.initial_values()) if adopted_timer else [inf] * n
    signal_init = list(adopted_signal.initial_values()) if adopted_signal else [0] * n
    processes = []
    phases = {}
    for pi, p in enumerate(m.processes):
        if pi not in slots:
            processes.append(p)
            continue
        k = slots[pi]
        timed = _bounded_locations(tm, p)
        observing = any(b.observe for b in timed.values())
        taken = set(p.locations)
        second = {}  # location -> its second (window) phase
        for loc, b in timed.items():
            if b.lb is not None:
                second[loc] = _fresh(f"{loc}_open", taken)
                phases[(p.name, loc)] = second[loc]

        def sig(value):
            return (_set("signal", k, value),) if observing else ()

        def install(loc):
            b = timed[loc]
            if loc in second:
                return (_set("timer", k, b.lb),) + sig(0)
            return (_set("timer", k, b.ub),) + sig(1 if b.observe else 0)

        clear = (_set("timer", k, inf),) + sig(0)

        def rewrite(t, src):
            extra = ()
            if t.dst in timed:
                extra = install(t.dst)
            elif t.src in timed:
                extra = clear
            return replace(t, src=src, effects=t.effects + extra)

        if p.initial in timed:
            b = timed[p.initial]
            if p.initial in second:
                timer_init[k] = b.lb
            else:
                timer_init[k] = b.ub
                if b.observe:
                    signal_init[k] = 1

        new = []
        for j, t in enumerate(p.transitions):
            b = timed.get(t.src)
            if b is not None and b.index == j and t.src in second:
                window = inf if b.ub is None else b.ub - b.lb
                bridge = Transition(
                    t.src,
                    second[t.src],
                    Binary("==", Index("timer", IntLit(k)), IntLit(0)),
                    effects=(_set("timer", k, window),) + (sig(1) if b.observe else ()),
                )
                new.append(bridge)
                new.append(rewrite(t, second[t.src]))
            else:
                new.append(rewrite(t, t.src))
                if t.src in second:
                    new.append(rewrite(t, second[t.src]))
        locations = []
        for loc in p.locations:
            locations.append(loc)
            if loc in second:
                locations.append(second[loc])
        accepting = p.accepting | {second[a] for a in p.accepting if a in second}
        processes.append(
            replace(p, locations=tuple(locations), transitions=tuple(new), accepting=accepting)
        )

    # a test for a split location must hold in either phase
    processes = [
        replace(p, transitions=tuple(widen_transition(t, phases) for t in p.transitions))
        for p in processes
    ]
    globals_ = [g for g in m.globals if g.name not in ("timer", "signal", "now")]
    if n:
        hi = adopted_timer.hi if adopted_timer else inf
        globals_.append(VarDecl("timer", 0, hi, tuple(timer_init), n))
        if has_signals:
            globals_.append(VarDecl("signal", 0, 1, tuple(signal_init), n))
    if include_now:
        globals_.append(adopted_now or _now_decl(cfg))
    tick = TickSpec(
        mode="eedm",
        timers=("timer",),
        signals="signal" if (has_signals and n) else None,
        now="now" if include_now else None,
        infinity=inf,
        maximal=cfg.maximal,
        phases=tuple((p, l, s) for (p, l), s in sorted(phases.items())),
    )
    return replace(m, globals=tuple(globals_), processes=tuple(processes), tick=tick)


def observe_all(tm: TimedModel, processes=None, predicate=None) -> TimedModel:
    """Return ``tm`` with observe set on the selected bounded transitions."""
    keys = set(tm.observe)
    for (pname, ti), (lb, ub) in tm.bounds.items():
        if processes is not None and pname not in processes:
            continue
        if predicate is not None and not predicate(pname, ti, lb, ub):
            continue
        keys.add((pname, ti))
    return replace(tm, observe=frozenset(keys))


__all__ = [
    "LoweringConfig",
    "LoweringError",
    "lower",
    "lower_ledm",
    "lower_eedm",
    "observe_all",
]
