import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from tickcheck.bench import gen_fischer, gen_preemptive
from tickcheck.cycles import (
    DETECTORS,
    PropertyTemplate,
    build_property,
    check_liveness,
    compose,
    lasso,
    map_accepting,
    oracle_cycle,
    owcty,
)
from tickcheck.engine import StateGraph, explore, format_trace, replay_trace
from tickcheck.frontend import parse, parse_expr
from tickcheck.lowering import LoweringConfig, lower
from tickcheck.model import ModelError, validate

from strategies import timed_models

TOGGLE = """
process P { state idle, busy; init idle;
  trans idle -> busy { }, busy -> idle { }, idle -> idle { }; }
"""


def graph(n, edges, accepting):
    return StateGraph.from_edges(n, edges, accepting)


def random_graph(rng, n, density):
    edges = [(u, v) for u in range(n) for v in range(n) if rng.random() < density]
    accepting = [u for u in range(n) if rng.random() < 0.1]
    return graph(n, edges, accepting)


def verdicts(g):
    return {name: fn(g) for name, fn in DETECTORS.items()}


# -- detectors on abstract graphs


@pytest.mark.parametrize(
    "n, edges, accepting, expected",
    [
        (1, [(0, 0)], [0], True),
        (1, [], [0], False),
        (3, [(0, 1), (1, 2)], [0, 1, 2], False),
        (3, [(0, 1), (1, 2), (2, 1)], [2], True),
        (3, [(0, 1), (1, 2), (2, 1)], [0], False),
        (4, [(0, 1), (1, 0), (2, 3), (3, 2)], [2], False),  # cycle unreachable
        (4, [(0, 1), (1, 1), (1, 2), (2, 3)], [2, 3], False),
        (4, [(0, 1), (1, 2), (2, 3), (3, 1)], [3], True),
    ],
)
def test_small_graphs(n, edges, accepting, expected):
    assert verdicts(graph(n, edges, accepting)) == dict.fromkeys(DETECTORS, expected)


def test_detectors_agree_on_random_graphs():
    rng = random.Random(20240611)
    disagreements = 0
    for _ in range(500):
        n = rng.randint(1, 200)
        g = random_graph(rng, n, rng.uniform(0.02, 0.2) if n > 10 else rng.uniform(0.1, 0.5))
        v = verdicts(g)
        disagreements += len(set(v.values())) != 1
    assert disagreements == 0


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n),
        st.lists(st.integers(0, n - 1), max_size=n),
    )
), st.randoms(use_true_random=False))
def test_verdicts_ignore_edge_order(case, rng):
    n, edges, accepting = case
    shuffled = list(edges)
    rng.shuffle(shuffled)
    a, b = graph(n, edges, accepting), graph(n, shuffled, accepting)
    assert verdicts(a) == verdicts(b)
    assert len(set(verdicts(a).values())) == 1


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n),
        st.lists(st.integers(0, n - 1), min_size=1, max_size=n),
    )
))
def test_lasso_is_a_real_accepting_cycle(case):
    n, edges, accepting = case
    g = graph(n, edges, accepting)
    found = lasso(g)
    assert (found is not None) == oracle_cycle(g)
    if found is None:
        return
    stem, loop = found
    es = set(edges)
    assert stem[0][0] == g.initial
    path = [i for i, _ in stem] + [i for i, _ in loop]
    assert all((u, v) in es for u, v in zip(path, path[1:]))
    assert loop[-1][0] == stem[-1][0]
    assert g.accepting[loop[-1][0]]


# -- claims


def test_claim_templates_shape():
    p, q = parse_expr("x > 0"), parse_expr("x == 0")
    always = build_property(PropertyTemplate("always_p", p))
    assert always.accepting == {"bad"} and len(always.transitions) == 3
    ev = build_property(PropertyTemplate("eventually_p", p))
    assert ev.locations == ("wait",) and ev.accepting == {"wait"}
    resp = build_property(PropertyTemplate("response_p_q", p, q))
    assert resp.accepting == {"wait"}
    with pytest.raises(ValueError):
        PropertyTemplate("response_p_q", p)
    with pytest.raises(ValueError):
        PropertyTemplate("until", p)


def test_compose_renames_on_collision_and_rejects_bad_claims():
    m = parse(TOGGLE).base
    claim = build_property(PropertyTemplate("always_p", parse_expr("true")), name="P")
    prod = compose(m, claim)
    assert [p.name for p in prod.processes] == ["P", "P2"] and prod.property == 1
    with pytest.raises(ModelError):
        compose(prod, claim)
    broken = build_property(PropertyTemplate("always_p", parse_expr("nope > 1")))
    with pytest.raises(ModelError):
        compose(m, broken)


@pytest.mark.parametrize("algorithm", sorted(DETECTORS))
def test_response_fails_without_fairness(algorithm):
    m = parse(TOGGLE).base
    prop = PropertyTemplate("response_p_q", parse_expr("P.idle"), parse_expr("P.busy"))
    v = check_liveness(m, prop, algorithm)
    assert v.result == "violated"
    states = replay_trace(compose(m, build_property(prop)), format_trace(v))
    assert len(states) == len(v.trace) + 1


@pytest.mark.parametrize("algorithm", sorted(DETECTORS))
def test_trivially_true_safety_holds(algorithm):
    m = parse(TOGGLE).base
    v = check_liveness(m, PropertyTemplate("always_p", parse_expr("true")), algorithm)
    assert v.holds
    prod = compose(m, build_property(PropertyTemplate("always_p", parse_expr("true"))))
    assert not any(explore(prod).accepting)


def test_finite_runs_are_judged_through_stuttering():
    m = parse("process P { state a, b; init a; trans a -> b { }; }").base
    assert check_liveness(m, PropertyTemplate("eventually_p", parse_expr("P.b"))).holds
    final = check_liveness(m, PropertyTemplate("eventually_p", parse_expr("false")))
    assert final.result == "violated"
    assert final.trace[-1][1].startswith("stutter")


@pytest.mark.parametrize("algorithm", sorted(DETECTORS))
def test_fischer_mutex_as_a_claim(algorithm):
    prop = PropertyTemplate("always_p", parse_expr("c < 2"))
    safe = lower(gen_fischer(2, 2, 3, 4), LoweringConfig("ledm"))
    assert check_liveness(safe, prop, algorithm).holds
    unsafe = lower(gen_fischer(3, 3, 1, 3), LoweringConfig("ledm"))
    v = check_liveness(unsafe, prop, algorithm)
    assert v.result == "violated"
    replay_trace(compose(unsafe, build_property(prop)), format_trace(v))


@pytest.mark.parametrize("method", ["ledm", "eedm"])
def test_benchmark_products_get_one_verdict(method):
    models = [
        lower(gen_fischer(2, 2, 3, 3), LoweringConfig(method)),
        lower(gen_preemptive([3, 2]), LoweringConfig(method, include_now=False)),
    ]
    for m in models:
        p = m.processes[0]
        for prop in (
            PropertyTemplate("eventually_p", parse_expr(f"{p.name}.{p.locations[-1]}")),
            PropertyTemplate("response_p_q", parse_expr(f"{p.name}.{p.locations[0]}"),
                             parse_expr(f"{p.name}.{p.locations[-1]}")),
        ):
            g = explore(compose(m, build_property(prop)))
            assert len(set(verdicts(g).values())) == 1


@settings(max_examples=60, deadline=None, suppress_health_check=list(HealthCheck))
@given(timed_models(max_procs=2), st.sampled_from(["always_p", "eventually_p", "response_p_q"]))
def test_detectors_agree_on_random_products(tm, kind):
    if validate(tm):
        return
    m = lower(tm, LoweringConfig("eedm", include_now=False))
    p = tm.base.processes[-1]
    loc = parse_expr(f"{p.name}.{p.locations[-1]}")
    q = parse_expr(f"{p.name}.{p.locations[0]}") if kind == "response_p_q" else None
    g = explore(compose(m, build_property(PropertyTemplate(kind, loc, q))))
    assert len(set(verdicts(g).values())) == 1


def test_map_and_owcty_are_exported_detectors():
    assert DETECTORS["owcty"] is owcty and DETECTORS["map"] is map_accepting
    with pytest.raises(ValueError):
        check_liveness(parse(TOGGLE).base, PropertyTemplate("always_p", parse_expr("true")), "ndfs")
