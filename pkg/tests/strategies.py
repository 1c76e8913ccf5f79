"""Hypothesis strategies for random, well-formed timed models.

Models are valid by construction: effects wrap their right-hand side into
the target's range with a positive modulus, so exploration never aborts.
"""

from __future__ import annotations

from hypothesis import strategies as st

from tickcheck.model import (
    Binary,
    BoolLit,
    Channel,
    Index,
    InLocation,
    IntLit,
    Model,
    Name,
    Process,
    Sync,
    TimedModel,
    Transition,
    Unary,
    VarDecl,
)


def int_expr(names, depth=2):
    leaves = st.one_of(
        st.integers(-3, 5).map(IntLit),
        st.sampled_from(names).map(Name) if names else st.integers(0, 2).map(IntLit),
    )
    if depth <= 0:
        return leaves
    sub = int_expr(names, depth - 1)
    return st.one_of(
        leaves,
        st.tuples(st.sampled_from(["+", "-", "*"]), sub, sub).map(lambda t: Binary(*t)),
        st.tuples(sub, st.integers(1, 4)).map(lambda t: Binary("%", t[0], IntLit(t[1]))),
        sub.map(lambda e: Unary("-", e)),
    )


def bool_expr(names, locs, depth=2):
    cmp_ = st.tuples(
        st.sampled_from(["==", "!=", "<", "<=", ">", ">="]),
        int_expr(names, 1),
        int_expr(names, 1),
    ).map(lambda t: Binary(*t))
    atoms = [cmp_, st.booleans().map(BoolLit)]
    if locs:
        atoms.append(st.sampled_from(locs).map(lambda pl: InLocation(*pl)))
    leaves = st.one_of(*atoms)
    if depth <= 0:
        return leaves
    sub = bool_expr(names, locs, depth - 1)
    return st.one_of(
        leaves,
        st.tuples(st.sampled_from(["and", "or"]), sub, sub).map(lambda t: Binary(*t)),
        sub.map(lambda e: Unary("not", e)),
    )


def wrapped(e, lo, hi):
    """``lo + (e % width)`` is always within [lo, hi]."""
    return Binary("+", IntLit(lo), Binary("%", e, IntLit(hi - lo + 1)))


@st.composite
def var_decl(draw, name, allow_array=True):
    lo = draw(st.integers(-2, 0))
    hi = draw(st.integers(1, 3))
    length = draw(st.sampled_from([None, None, 2])) if allow_array else None
    if length is None:
        init = draw(st.integers(lo, hi))
    else:
        init = tuple(draw(st.integers(lo, hi)) for _ in range(length))
        if len(set(init)) == 1 and draw(st.booleans()):
            init = init[0]
    return VarDecl(name, lo, hi, init, length)


@st.composite
def timed_models(draw, max_procs=3, max_trans=4, with_channel=True, with_bounds=True):
    n_glob = draw(st.integers(1, 2))
    globals_ = [draw(var_decl(f"g{k}")) for k in range(n_glob)]
    constants = {}
    if draw(st.booleans()):
        constants["K"] = draw(st.integers(-2, 3))
    channels = []
    if with_channel and draw(st.booleans()):
        channels.append(Channel("ch", draw(st.integers(0, 1))))
    n_proc = draw(st.integers(1, max_procs))
    shapes = []
    for i in range(n_proc):
        n_loc = draw(st.integers(1, 3))
        shapes.append((f"P{i}", [f"l{k}" for k in range(n_loc)]))
    all_locs = [(p, l) for p, locs in shapes for l in locs]

    processes = []
    bounds = {}
    observe = set()
    for pname, locs in shapes:
        locals_ = [VarDecl("v", 0, 3, draw(st.integers(0, 3)))] if draw(st.booleans()) else []
        scalars = [g.name for g in globals_ if g.length is None] + [v.name for v in locals_]
        readable = scalars + list(constants)
        targets = [(g.name, g) for g in globals_] + [(v.name, v) for v in locals_]
        trans = []
        timed_src = set()
        for j in range(draw(st.integers(0, max_trans))):
            src = draw(st.sampled_from(locs))
            dst = draw(st.sampled_from(locs))
            guard = draw(st.one_of(st.just(BoolLit(True)), bool_expr(readable, all_locs, 1)))
            sync = None
            if channels and draw(st.integers(0, 3)) == 0:
                ch = channels[0]
                if draw(st.booleans()):
                    payload = wrapped(draw(int_expr(readable, 1)), 0, 3) if ch.arity else None
                    sync = Sync(ch.name, "send", payload)
                elif ch.arity == 0 or locals_:
                    sync = Sync(ch.name, "recv", Name("v") if ch.arity else None)
            effects = []
            written = set()
            for _ in range(draw(st.integers(0, 2))):
                name, decl = draw(st.sampled_from(targets))
                if name in written:
                    continue
                written.add(name)
                rhs = wrapped(draw(int_expr(readable, 1)), decl.lo, decl.hi)
                if decl.length is not None:
                    lhs = Index(name, wrapped(draw(int_expr(readable, 1)), 0, decl.length - 1))
                else:
                    lhs = Name(name)
                effects.append((lhs, rhs))
            trans.append(Transition(src, dst, guard, sync, tuple(effects)))
            if with_bounds and sync is None and src not in timed_src and draw(st.booleans()):
                kind = draw(st.sampled_from(["both", "lower", "upper"]))
                lb = draw(st.integers(0, 3)) if kind != "upper" else None
                ub = draw(st.integers(max(1, lb or 0), 4)) if kind != "lower" else None
                bounds[(pname, j)] = (lb, ub)
                timed_src.add(src)
                if draw(st.integers(0, 3)) == 0:
                    observe.add((pname, j))
        processes.append(
            Process(pname, tuple(locs), draw(st.sampled_from(locs)), tuple(trans), tuple(locals_))
        )
    base = Model(
        constants=constants,
        globals=tuple(globals_),
        channels=tuple(channels),
        processes=tuple(processes),
    )
    return TimedModel(base, bounds, frozenset(observe))
