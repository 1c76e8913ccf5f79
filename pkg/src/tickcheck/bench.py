"""Benchmark model generators and the two state-space experiments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional

from .engine import ResourceError, check_safety
from .frontend import parse_expr
from .lowering import LoweringConfig, lower, observe_all
from .model import (
    DEFAULT_INFINITY,
    Binary,
    Channel,
    Index,
    IntLit,
    Model,
    Name,
    Process,
    Sync,
    TimedModel,
    Transition,
    VarDecl,
)

CSV_FIELDS = [
    "method", "mode", "n", "db_u", "dc_l", "dc_u",
    "states", "transitions", "time_ms", "mem_bytes", "verdict",
]

MUTEX_BAD = "c >= 2"


@dataclass(frozen=True)
class FischerParams:
    n: int
    db_u: int
    dc_l: int
    dc_u: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("Fischer needs at least two threads")
        if min(self.db_u, self.dc_l, self.dc_u) < 1:
            raise ValueError("all Fischer bounds must be >= 1")
        if self.dc_l > self.dc_u:
            raise ValueError("dc_l must not exceed dc_u")


def _e(text: str):
    return parse_expr(text)


def gen_fischer(n, db_u=None, dc_l=None, dc_u=None) -> TimedModel:
    """Fischer's mutual exclusion for ``n`` threads with ids ``1..n``.

    Locations: ``ncs`` (idle), ``a`` (has read ``x == 0``), ``b`` (has
    written ``x := t``), ``c`` (delay elapsed, testing), ``cs``, ``d``.
    The write ``a -> b`` must happen within ``db_u`` of the read; the test
    may start no earlier than ``dc_l`` and no later than ``dc_u`` after the
    write. A thread that loses the test waits for ``x == 0`` again.
    """
    p = n if isinstance(n, FischerParams) else FischerParams(n, db_u, dc_l, dc_u)
    globals_ = (
        VarDecl("x", 0, p.n, 0),
        VarDecl("c", 0, p.n, 0),
    )
    processes = []
    bounds = {}
    for t in range(1, p.n + 1):
        name = f"P{t}"
        trans = (
            Transition("ncs", "a", _e("x == 0")),
            Transition("a", "b", effects=((Name("x"), IntLit(t)),)),
            Transition("b", "c"),
            Transition("c", "cs", _e(f"x == {t}"), effects=((Name("c"), _e("c + 1")),)),
            Transition("c", "a", _e("x == 0")),
            Transition("cs", "d"),
            Transition("d", "ncs", effects=((Name("x"), IntLit(0)), (Name("c"), _e("c - 1")))),
        )
        processes.append(
            Process(name, ("ncs", "a", "b", "c", "cs", "d"), "ncs", trans)
        )
        bounds[(name, 1)] = (None, p.db_u)
        bounds[(name, 2)] = (p.dc_l, p.dc_u)
    base = Model(globals=globals_, processes=tuple(processes))
    return TimedModel(base, bounds, frozenset())


def observe_step_c(tm: TimedModel) -> TimedModel:
    """Mark the [dc_l, dc_u]-bounded delay of every thread as observed."""
    return observe_all(tm, predicate=lambda p, ti, lb, ub: lb is not None)


def gen_preemptive(exec_units, infinity: int = DEFAULT_INFINITY) -> TimedModel:
    """Tasks sharing one deprivable resource; a higher index means a higher priority.

    Timing is driven by hand through ``timer``/``signal`` as in the EEDM
    pre-emptive example, so the model must be lowered with ``eedm`` (which
    adopts the declared arrays). Deprivation is a rendezvous on ``preempt``
    between the arriving task and the running one, so the running task
    stops its clock in the same step the resource changes hands.
    """
    exec_units = list(exec_units)
    n = len(exec_units)
    if n < 1 or min(exec_units) < 1:
        raise ValueError("every task needs at least one execution unit")
    inf = infinity
    globals_ = (
        VarDecl("isROccupied", 0, n, 0),
        VarDecl("timer", 0, inf, inf, n),
        VarDecl("signal", 0, 1, 0, n),
    )
    processes = []
    for k, units in enumerate(exec_units):
        tag = k + 1
        timer = Index("timer", IntLit(k))
        signal = Index("signal", IntLit(k))
        ttg = Name("timeToGo")
        trans = [
            Transition(
                "s_i", "s_Exec", _e("isROccupied == 0"),
                effects=((Name("isROccupied"), IntLit(tag)), (timer, ttg), (signal, IntLit(1))),
            ),
        ]
        if k > 0:
            # seize the resource from a lower-priority owner
            trans.append(
                Transition(
                    "s_i", "s_Exec",
                    _e(f"isROccupied != 0 and isROccupied < {tag}"),
                    Sync("preempt", "send"),
                    effects=((Name("isROccupied"), IntLit(tag)), (timer, ttg), (signal, IntLit(1))),
                )
            )
        if k < n - 1:
            trans.append(
                Transition(
                    "s_Exec", "s_Deprived",
                    Binary(">", timer, IntLit(0)),
                    Sync("preempt", "recv"),
                    effects=((ttg, timer), (timer, Name("INFINITY")), (signal, IntLit(0))),
                )
            )
            trans.append(
                Transition(
                    "s_Deprived", "s_Exec", _e("isROccupied == 0"),
                    effects=((Name("isROccupied"), IntLit(tag)), (timer, ttg), (signal, IntLit(1))),
                )
            )
        trans.append(
            Transition(
                "s_Exec", "s_Next", Binary("==", timer, IntLit(0)),
                effects=(
                    (Name("isROccupied"), IntLit(0)),
                    (signal, IntLit(0)),
                    (timer, Name("INFINITY")),
                    (ttg, IntLit(0)),
                ),
            )
        )
        processes.append(
            Process(
                f"T{tag}",
                ("s_i", "s_Exec", "s_Deprived", "s_Next"),
                "s_i",
                tuple(trans),
                locals=(VarDecl("timeToGo", 0, units, units),),
            )
        )
    channels = (Channel("preempt"),) if n > 1 else ()
    base = Model(
        constants={"INFINITY": inf},
        globals=globals_,
        channels=channels,
        processes=tuple(processes),
    )
    return TimedModel(base, {}, frozenset())


# ---------------------------------------------------------------------------
# Experiments


@dataclass
class ExperimentRow:
    method: str
    mode: str
    n: int
    db_u: int
    dc_l: int
    dc_u: int
    states: int
    transitions: int
    time_ms: float
    mem_bytes: int
    verdict: str

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in CSV_FIELDS}


VARIANTS = (("ledm", "unit"), ("eedm", "standard"), ("eedm", "leaping"))


def lowered_fischer(p: FischerParams, method: str, mode: str, include_now: bool = False) -> Model:
    tm = gen_fischer(p)
    if mode == "standard":
        tm = observe_step_c(tm)
    return lower(tm, LoweringConfig(method=method, include_now=include_now))


def run_row(p: FischerParams, method: str, mode: str, workers: int = 1,
            max_states: Optional[int] = None) -> ExperimentRow:
    model = lowered_fischer(p, method, mode)
    try:
        v = check_safety(
            model, parse_expr(MUTEX_BAD), workers=workers, max_states=max_states, exhaustive=True
        )
        stats, verdict = v.stats, v.result
    except ResourceError as exc:
        stats, verdict = exc.stats, "resource-limit"
    return ExperimentRow(
        method, mode, p.n, p.db_u, p.dc_l, p.dc_u,
        stats.states, stats.transitions, round(stats.time_ms, 1), stats.mem_bytes, verdict,
    )


def run_experiment1(n: int = 3, t_range: Iterable[int] = range(2, 10), workers: int = 1,
                    variants=VARIANTS, csv_path=None, max_states=None) -> list:
    """All three bounds equal to T."""
    rows = []
    for T in t_range:
        for method, mode in variants:
            rows.append(run_row(FischerParams(n, T, T, T), method, mode, workers, max_states))
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows


def run_experiment2(n: int = 3, dc_u_range: Iterable[int] = range(5, 13), workers: int = 1,
                    db_u: int = 4, dc_l: int = 4, variants=VARIANTS, csv_path=None,
                    max_states=None) -> list:
    """db_u = dc_l = 4, varying dc_u."""
    rows = []
    for dc_u in dc_u_range:
        for method, mode in variants:
            rows.append(run_row(FischerParams(n, db_u, dc_l, dc_u), method, mode, workers, max_states))
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r.as_dict())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
