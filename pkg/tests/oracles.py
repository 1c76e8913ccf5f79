"""Independent reference semantics used as test oracles.

Nothing here goes through the lowering passes or the compiled engine.
"""

from __future__ import annotations

from collections import deque


def fischer_mutex_violated(n, db_u, dc_l, dc_u):
    """Direct discrete-time exploration of Fischer's protocol.

    Each thread carries a clock that only matters in ``a`` (time since the
    read of ``x == 0``) and ``b`` (time since the write). Time may advance by
    one unit unless some thread sits at its deadline. Returns True when two
    threads can be in the critical section together.
    """
    init = (0, 0) + (("ncs", 0),) * n
    seen = {init}
    queue = deque([init])
    while queue:
        st = queue.popleft()
        x, c, th = st[0], st[1], st[2:]
        if c >= 2:
            return True
        nxt = []

        def put(i, loc, clk, x2=x, c2=c):
            t = list(th)
            t[i] = (loc, clk)
            nxt.append((x2, c2) + tuple(t))

        for i, (loc, clk) in enumerate(th):
            tid = i + 1
            if loc == "ncs" and x == 0:
                put(i, "a", 0)
            elif loc == "a":
                put(i, "b", 0, x2=tid)
            elif loc == "b" and clk >= dc_l:
                put(i, "c", 0)
            elif loc == "c":
                if x == tid:
                    put(i, "cs", 0, c2=c + 1)
                if x == 0:
                    put(i, "a", 0)
            elif loc == "cs":
                put(i, "d", 0)
            elif loc == "d":
                put(i, "ncs", 0, x2=0, c2=c - 1)
        urgent = any(
            (loc == "a" and clk >= db_u) or (loc == "b" and clk >= dc_u) for loc, clk in th
        )
        if not urgent:
            aged = tuple((loc, clk + 1) if loc in ("a", "b") else (loc, 0) for loc, clk in th)
            nxt.append((x, c) + aged)
        for s in nxt:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return False


def exec_sums(graph, task, now="now"):
    """Per maximal run, total time task ``task`` spends in ``s_Exec``.

    ``graph`` must be acyclic. Returns the set of sums over all paths from
    the initial state to a state without successors.
    """
    slot = graph.layout.loc_slot[task]
    exec_ix = graph.layout.loc_index[task]["s_Exec"]
    at_now = graph.layout.globals[now][0]
    memo = {}

    def sums(u):
        if u in memo:
            return memo[u]
        memo[u] = None  # cycle guard
        s = graph.states[u]
        out = set()
        if not graph.edges[u]:
            out.add(0)
        for v, lid in graph.edges[u]:
            gain = 0
            if graph.labels[lid].startswith("tick") and s[slot] == exec_ix:
                gain = graph.states[v][at_now] - s[at_now]
            rest = sums(v)
            if rest is None:
                raise ValueError("graph has a cycle")
            out |= {gain + r for r in rest}
        memo[u] = frozenset(out)
        return memo[u]

    return set(sums(graph.initial))
