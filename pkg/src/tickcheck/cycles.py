"""Accepting-cycle detection on explored product graphs.

``owcty`` and ``map_accepting`` are the two elimination-style detectors;
``oracle_cycle`` answers the same question through SCC decomposition and is
what the tests compare them against. Liveness is checked by composing a
never-claim process (built from a small set of templates) with the model,
exploring the product and asking a detector for an accepting cycle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import networkx as nx

from .engine import StateGraph, Verdict, _steps_to_trace, explore, path_to
from .lowering import widen_transition
from .model import TRUE, Expr, Model, ModelError, Process, Transition, Unary, conj, validate

KINDS = ("always_p", "eventually_p", "response_p_q")


@dataclass(frozen=True)
class PropertyTemplate:
    kind: str
    p: Expr
    q: Optional[Expr] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown property kind {self.kind!r}")
        if (self.q is not None) != (self.kind == "response_p_q"):
            raise ValueError("q is required for response_p_q and only for it")


def _not(e: Expr) -> Expr:
    return Unary("not", e)


def build_property(template: PropertyTemplate, name: str = "claim") -> Process:
    """Never claim accepting exactly the runs that violate ``template``."""
    p, q = template.p, template.q
    if template.kind == "always_p":
        return Process(
            name,
            ("init", "bad"),
            "init",
            (
                Transition("init", "init", TRUE),
                Transition("init", "bad", _not(p)),
                Transition("bad", "bad", TRUE),
            ),
            accepting=frozenset({"bad"}),
        )
    if template.kind == "eventually_p":
        return Process(
            name,
            ("wait",),
            "wait",
            (Transition("wait", "wait", _not(p)),),
            accepting=frozenset({"wait"}),
        )
    return Process(
        name,
        ("init", "wait"),
        "init",
        (
            Transition("init", "init", TRUE),
            Transition("init", "wait", conj(p, _not(q))),
            Transition("wait", "wait", _not(q)),
        ),
        accepting=frozenset({"wait"}),
    )


def compose(model: Model, claim: Process) -> Model:
    """Attach ``claim`` as the property process of ``model``."""
    if model.property is not None:
        raise ModelError("model already has a property process")
    taken = {p.name for p in model.processes}
    name = claim.name
    k = 2
    while name in taken:
        name = f"{claim.name}{k}"
        k += 1
    if model.tick is not None and model.tick.phases:
        phases = {(p, l): s for p, l, s in model.tick.phases}
        trans = tuple(widen_transition(t, phases) for t in claim.transitions)
        claim = replace(claim, transitions=trans)
    out = replace(
        model,
        processes=model.processes + (replace(claim, name=name),),
        property=len(model.processes),
    )
    diags = validate(out)
    if diags:
        raise ModelError("; ".join(str(d) for d in diags))
    return out


# ---------------------------------------------------------------------------
# Detectors


def _reachable(g: StateGraph) -> list:
    seen = [False] * len(g)
    if not len(g):
        return seen
    seen[g.initial] = True
    todo = [g.initial]
    while todo:
        u = todo.pop()
        for v, _ in g.edges[u]:
            if not seen[v]:
                seen[v] = True
                todo.append(v)
    return seen


def owcty(g: StateGraph) -> bool:
    """Topological elimination to a fixpoint.

    Each round first keeps only states reachable from an accepting state of
    the current set, then strips states without a predecessor in the set
    until none is left. A non-empty fixpoint means an accepting cycle.
    """
    alive = _reachable(g)
    while True:
        before = sum(alive)
        # reachability from the accepting states still alive
        reach = [False] * len(g)
        todo = [u for u in range(len(g)) if alive[u] and g.accepting[u]]
        for u in todo:
            reach[u] = True
        while todo:
            u = todo.pop()
            for v, _ in g.edges[u]:
                if alive[v] and not reach[v]:
                    reach[v] = True
                    todo.append(v)
        alive = reach
        # elimination of states with zero in-degree
        indeg = [0] * len(g)
        for u in range(len(g)):
            if alive[u]:
                for v, _ in g.edges[u]:
                    if alive[v]:
                        indeg[v] += 1
        queue = deque(u for u in range(len(g)) if alive[u] and indeg[u] == 0)
        while queue:
            u = queue.popleft()
            alive[u] = False
            for v, _ in g.edges[u]:
                if alive[v]:
                    indeg[v] -= 1
                    if indeg[v] == 0:
                        queue.append(v)
        after = sum(alive)
        if after == 0:
            return False
        if after == before:
            return True


def _order(g: StateGraph) -> list:
    """Rank of each state in canonical-encoding order."""
    rank = [0] * len(g)
    for r, i in enumerate(sorted(range(len(g)), key=g.encoding)):
        rank[i] = r
    return rank


def map_accepting(g: StateGraph) -> bool:
    """Maximal accepting predecessors.

    Every state learns the largest accepting state among its proper
    predecessors. An accepting state that is its own maximum lies on a
    cycle. Otherwise every state that served as somebody's maximum cannot
    lie on an accepting cycle and loses its accepting mark; repeat.
    """
    live = _reachable(g)
    rank = _order(g)
    by_rank = {r: i for i, r in enumerate(rank)}
    acc = [bool(g.accepting[i]) and live[i] for i in range(len(g))]
    while any(acc):
        best = [-1] * len(g)
        todo = deque(i for i in range(len(g)) if acc[i])
        queued = [acc[i] for i in range(len(g))]
        while todo:
            u = todo.popleft()
            queued[u] = False
            offer = max(best[u], rank[u] if acc[u] else -1)
            if offer < 0:
                continue
            for v, _ in g.edges[u]:
                if offer > best[v]:
                    best[v] = offer
                    if not queued[v]:
                        queued[v] = True
                        todo.append(v)
        for i in range(len(g)):
            if acc[i] and best[i] == rank[i]:
                return True
        values = {by_rank[b] for i, b in enumerate(best) if b >= 0 and live[i]}
        dropped = [i for i in values if acc[i]]
        if not dropped:
            return False
        for i in dropped:
            acc[i] = False
    return False


def _nx_graph(g: StateGraph, live) -> nx.DiGraph:
    G = nx.DiGraph()
    G.add_nodes_from(i for i in range(len(g)) if live[i])
    for u in range(len(g)):
        if live[u]:
            G.add_edges_from((u, v) for v, _ in g.edges[u])
    return G


def _accepting_sccs(g: StateGraph):
    live = _reachable(g)
    G = _nx_graph(g, live)
    for comp in nx.strongly_connected_components(G):
        nontrivial = len(comp) > 1 or any(G.has_edge(u, u) for u in comp)
        if nontrivial and any(g.accepting[u] for u in comp):
            yield comp


def oracle_cycle(g: StateGraph) -> bool:
    return next(_accepting_sccs(g), None) is not None


DETECTORS = {"owcty": owcty, "map": map_accepting, "oracle": oracle_cycle}


def _shortest_path(g: StateGraph, target: int) -> list:
    """``[(index, label id into it)]`` from the initial state, by BFS."""
    if g.parent and g.parent[target] is not None or target == g.initial:
        return path_to(g, target)
    prev = {g.initial: None}
    queue = deque([g.initial])
    while target not in prev:
        u = queue.popleft()
        for v, lid in g.edges[u]:
            if v not in prev:
                prev[v] = (u, lid)
                queue.append(v)
    out = []
    u = target
    while prev[u] is not None:
        p, lid = prev[u]
        out.append((u, lid))
        u = p
    out.append((g.initial, None))
    out.reverse()
    return out


def lasso(g: StateGraph) -> Optional[tuple]:
    """``(stem, loop)`` of state/label steps, or None without an accepting cycle.

    ``stem`` is a BFS-tree path ``[(index, label id into it)]`` from the
    initial state to an accepting state ``a`` on a cycle; ``loop`` is the
    cycle from ``a`` back to ``a`` as ``[(index, label id into it)]`` with
    its last entry being ``a`` again.
    """
    comp = next(_accepting_sccs(g), None)
    if comp is None:
        return None
    target = min(u for u in comp if g.accepting[u])
    stem = _shortest_path(g, target)
    prev = {target: None}
    queue = deque([target])
    back = None
    while queue and back is None:
        u = queue.popleft()
        for v, lid in g.edges[u]:
            if v == target:
                back = (u, lid)
                break
            if v in comp and v not in prev:
                prev[v] = (u, lid)
                queue.append(v)
    chain = []
    u = back[0]
    while u != target:
        p, lid = prev[u]
        chain.append((u, lid))
        u = p
    chain.reverse()
    return stem, chain + [(target, back[1])]


def check_liveness(
    model: Model,
    claim,
    algorithm: str = "owcty",
    workers: int = 1,
    max_states: Optional[int] = None,
) -> Verdict:
    """Explore ``model`` composed with ``claim`` and look for an accepting cycle.

    ``claim`` is a ``PropertyTemplate`` or a ready ``Process``. A violated
    verdict carries a lasso trace whose last state steps back to
    ``loop_start``.
    """
    if algorithm not in DETECTORS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if isinstance(claim, PropertyTemplate):
        claim = build_property(claim)
    product = compose(model, claim)
    g = explore(product, workers=workers, max_states=max_states)
    if not DETECTORS[algorithm](g):
        return Verdict("holds", None, g.stats)
    stem, loop = lasso(g)
    indices = [i for i, _ in stem] + [i for i, _ in loop[:-1]]
    labels = [l for _, l in stem] + [l for _, l in loop]
    trace = _steps_to_trace(g, indices, labels[: len(indices)])
    # the final state closes the cycle back to the accepting state
    last_state, _ = trace[-1]
    trace[-1] = (last_state, g.labels[labels[len(indices)]])
    return Verdict("violated", trace, g.stats, loop_start=len(stem) - 1)


__all__ = [
    "DETECTORS",
    "KINDS",
    "PropertyTemplate",
    "build_property",
    "check_liveness",
    "compose",
    "lasso",
    "map_accepting",
    "oracle_cycle",
    "owcty",
]
