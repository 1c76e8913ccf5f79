import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickcheck.frontend import parse, parse_expr
from tickcheck.model import (
    EvaluationError,
    Layout,
    Model,
    Process,
    State,
    TimedModel,
    Transition,
    VarDecl,
    decode,
    encode,
    evaluate,
    names_in,
    validate,
)

from strategies import bool_expr, int_expr, timed_models

TWO_PROCS = """
int[0..3] x = 0;
int[0..1] a[4] = 0;
process P { int[0..2] v = 1; state s, t; init s;
  trans s -> t { guard x == 0; effect x = v + 1; }; }
process Q { state u; init u; trans u -> u { guard P.t; effect a[x] = 1; }; }
"""


def model(text):
    return parse(text).base


def state_of(m, **values):
    s = State.initial(m)
    vals = list(s.values)
    for name, v in values.items():
        start, decl = s.layout.lookup(name)
        if decl.length is None:
            vals[start] = v
        else:
            vals[start : start + decl.length] = v
    return State(s.layout, tuple(vals))


def messages(m):
    return [d.message for d in validate(m)]


def test_well_formed_two_process_model_has_no_diagnostics():
    assert validate(parse(TWO_PROCS)) == []


def test_undeclared_variable_is_one_diagnostic():
    tm = parse("int x; process P { state s; init s; trans s -> s { effect x = y; }; }")
    msgs = messages(tm)
    assert msgs == ["unresolved identifier 'y'"]


def test_duplicate_process_name():
    tm = parse("process P { state s; init s; trans }\nprocess P { state s; init s; trans }")
    msgs = messages(tm)
    assert len(msgs) == 1 and "duplicate name" in msgs[0]


def test_diagnostics_carry_positions():
    tm = parse("int x;\nprocess P { state s; init s;\n trans s -> s { effect x = y; }; }")
    (d,) = validate(tm)
    assert d.pos == (3, 8)
    assert str(d).startswith("3:8: ")


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("process P { state s; init s; trans s -> s { time [3, 2]; }; }", "exceeds upper"),
        ("channel c; process P { state s; init s; trans s -> s { sync c!; time [, 2]; }; }", "sync"),
        ("process P { state s; init s; trans s -> s { time [1, 2]; }, s -> s { time [, 3]; }; }",
         "sources 2 bounded"),
        ("process P { state s; init s; trans s -> s { guard MIN_ACTIVE_TIMER > 0; }; }",
         "MIN_ACTIVE_TIMER"),
        ("process P { state s; init s; accept s; trans }", "outside the property"),
        ("process P { state s; init s; trans s -> s { time [0, 0]; }; }", "upper bound"),
        ("int x; process P { state s; init s; trans s -> s { guard x; }; }", "boolean"),
        ("int[0..2] x = 5; process P { state s; init s; trans }", "outside"),
    ],
)
def test_invalid_models_are_diagnosed(text, fragment):
    msgs = messages(parse(text))
    assert msgs, text
    assert any(fragment in m for m in msgs), msgs


def test_property_process_may_not_carry_bounds_or_effects():
    text = """int x;
    process P { state s; init s; trans s -> s { effect x = 1; }; }
    process C { state a; init a; accept a; trans a -> a { effect x = 0; time [, 2]; }; }
    property C;"""
    msgs = messages(parse(text))
    assert any("effects" in m for m in msgs)
    assert any("property" in m for m in msgs)


@pytest.mark.parametrize(
    "text, value",
    [("3 + 4 % 5", 7), ("-7 % 3", 2), ("7 % -3", -2), ("2 * 3 - 4", 2), ("not (1 < 2) or true", True)],
)
def test_evaluate_constants(text, value):
    m = model("process P { state s; init s; trans }")
    assert evaluate(parse_expr(text), State.initial(m)) == value


def test_evaluate_reads_globals_locals_and_locations():
    m = model(TWO_PROCS)
    s = State.initial(m)
    assert evaluate(parse_expr("x == 0"), s) is True
    assert evaluate(parse_expr("v + 1"), s, process=0) == 2
    assert evaluate(parse_expr("P.s and not P.t"), s) is True


def test_index_out_of_range_carries_the_state():
    m = model(TWO_PROCS)
    s = State.initial(m)
    with pytest.raises(EvaluationError) as info:
        evaluate(parse_expr("a[7]"), s)
    assert info.value.state == s


def test_modulo_by_zero_is_an_error():
    m = model(TWO_PROCS)
    with pytest.raises(EvaluationError):
        evaluate(parse_expr("x % 0"), State.initial(m))


def test_state_text_is_readable():
    m = model(TWO_PROCS)
    assert str(State.initial(m)) == "x=0 a=[0,0,0,0] P@s{v=1} Q@u"


@st.composite
def layouts_and_states(draw):
    tm = draw(timed_models(with_bounds=False))
    lay = Layout(tm.base)
    vals = []
    for lo, hi in lay._ranges:
        vals.append(draw(st.integers(lo, hi)))
    return lay, tuple(vals)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=6),
       st.lists(st.integers(-(2**40), 2**40), min_size=1, max_size=6))
def test_encoding_is_injective_and_order_preserving(a, b):
    assert decode(encode(a)) == tuple(a)
    if len(a) == len(b):
        assert (encode(a) == encode(b)) == (a == b)
        assert (encode(a) < encode(b)) == (tuple(a) < tuple(b))


@settings(max_examples=100, deadline=None)
@given(layouts_and_states())
def test_random_valid_states_round_trip_through_encoding(pair):
    lay, vals = pair
    assert lay.valid(vals)
    assert decode(encode(vals)) == vals


@settings(max_examples=100, deadline=None)
@given(timed_models())
def test_validate_is_idempotent(tm):
    assert validate(tm) == validate(tm)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_evaluation_ignores_unreferenced_variables(data):
    m = model("int[-3..3] x = 0; int[-3..3] y = 0; int[-3..3] z = 0;"
              " process P { state s; init s; trans }")
    names = data.draw(st.lists(st.sampled_from(["x", "y", "z"]), min_size=1, unique=True))
    e = data.draw(st.one_of(int_expr(names, 2), bool_expr(names, [], 2)))
    base = {n: data.draw(st.integers(-3, 3)) for n in ("x", "y", "z")}
    other = dict(base)
    for n in {"x", "y", "z"} - names_in(e):
        other[n] = data.draw(st.integers(-3, 3))
    assert evaluate(e, state_of(m, **base)) == evaluate(e, state_of(m, **other))


def test_untimed_model_dataclasses_compare_structurally():
    p = Process("P", ("s",), "s", (Transition("s", "s"),), pos=(1, 1))
    q = Process("P", ("s",), "s", (Transition("s", "s"),), pos=(9, 9))
    assert p == q
    assert TimedModel(Model(processes=(p,))) == TimedModel(Model(processes=(q,)))
    assert VarDecl("x", 0, 1).initial_values() == (0,)
