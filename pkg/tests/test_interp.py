import pytest

from tracemend.interp import (
    Error,
    EvalError,
    InputSet,
    Ok,
    StepLimit,
    eval_expr,
    final_return,
    run,
    run_all,
)
from tracemend.lower import lower_source, parse_model_expr
from tracemend.model import Memory, UNDEF, primed, values_equal


def ev(text, bindings=None):
    return eval_expr(parse_model_expr(text), Memory(bindings or {}))


def test_eval_arithmetic():
    assert ev("num + 1", {"num": 0}) == 1
    assert ev("2 * 3 + 4") == 10
    assert ev("2 ** 3") == 8
    assert values_equal(ev("7 / 2"), 3.5)
    assert ev("7 % 2") == 1
    assert ev("-x", {"x": 5}) == -5


def test_eval_loop_condition_from_trace():
    # the condition that ends the reference run on the three-element input
    assert ev("num < len(poly) - 1", {"num": 2, "poly": [6.3, 7.6, 12.14]}) is False
    assert ev("num < len(poly) - 1", {"num": 1, "poly": [6.3, 7.6, 12.14]}) is True


def test_eval_index_out_of_range():
    with pytest.raises(EvalError) as err:
        ev("a[5]", {"a": [1]})
    assert "range" in str(err.value)


def test_eval_division_by_zero():
    with pytest.raises(EvalError):
        ev("1 / 0")


def test_eval_type_mismatch():
    with pytest.raises(EvalError):
        ev("x + 1", {"x": [1, 2]})


def test_eval_unbound_is_undef():
    assert ev("nope") is UNDEF
    with pytest.raises(EvalError):
        ev("nope + 1")  # arithmetic on undef errors


def test_eval_lazy_ite():
    # only the taken branch evaluates: no index error on the short list
    assert ev("(len(p) > 0) ? p[0] : 0", {"p": []}) == 0
    assert ev("(len(p) > 0) ? p[0] : 0", {"p": [9]}) == 9


def test_eval_lazy_and_or():
    assert ev("len(p) > 0 and p[0] > 1", {"p": []}) is False
    assert ev("len(p) == 0 or p[0] > 1", {"p": []}) is True


def test_eval_builtins():
    assert ev("append(xs, 4)", {"xs": [1]}) == [1, 4]
    assert ev("insert(xs, 1, 9)", {"xs": [1, 2]}) == [1, 9, 2]
    assert ev("concat(xs, [5])", {"xs": [1]}) == [1, 5]
    assert ev("range(1, 4)") == [1, 2, 3]
    assert ev("range(3)") == [0, 1, 2]
    assert ev("index(xs, 8)", {"xs": [4, 8]}) == 1
    assert ev("list(xs)", {"xs": [1, 2]}) == [1, 2]
    assert ev("xs[1:]", {"xs": [1, 2, 3]}) == [2, 3]
    assert ev("xs[:2]", {"xs": [1, 2, 3]}) == [1, 2]
    assert ev("xs[1:2]", {"xs": [1, 2, 3]}) == [2]
    assert ev("min(3, 1)") == 1
    assert ev("max(xs)", {"xs": [2, 7, 1]}) == 7
    assert ev("abs(-3)") == 3
    assert values_equal(ev("float(2)"), 2.0)
    assert ev("int(2.9)") == 2


def test_append_does_not_mutate():
    xs = [1, 2]
    assert ev("append(xs, 3)", {"xs": xs}) == [1, 2, 3]
    assert xs == [1, 2]


def test_run_c1_paper_trace(derivative):
    _, c1 = derivative["c1"]
    out = run(c1, Memory({"poly": [6.3, 7.6, 12.14]}))
    assert isinstance(out, Ok)
    assert out.trace.locations() == (1, 2, 3, 2, 3, 2, 4)
    assert values_equal(final_return(out), [7.6, 24.28])


def test_run_c1_constant_poly(derivative):
    _, c1 = derivative["c1"]
    out = run(c1, Memory({"poly": [5.0]}))
    assert values_equal(final_return(out), [0.0])


def test_run_step_limit():
    p = lower_source("def f(x):\n    while x == x:\n        x = x\n    return x\n", "t")
    out = run(p, Memory({"x": 1}), step_limit=100)
    assert isinstance(out, StepLimit)


def test_run_error_outcome():
    p = lower_source("def f(xs):\n    y = xs[5]\n    return y\n", "t")
    out = run(p, Memory({"xs": [1]}))
    assert isinstance(out, Error)
    assert "range" in out.message


def test_run_determinism(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    for mem in derivative_inputs:
        a = run(c1, mem)
        b = run(c1, mem)
        assert isinstance(a, Ok) and isinstance(b, Ok)
        assert a.trace.locations() == b.trace.locations()
        for (_, m1), (_, m2) in zip(a.trace, b.trace):
            assert m1 == m2


def test_frame_property(derivative, derivative_inputs):
    """Unassigned variables carry their value through a step."""
    _, c1 = derivative["c1"]
    for mem in derivative_inputs:
        out = run(c1, mem)
        assert isinstance(out, Ok)
        for loc, m in out.trace:
            for v in c1.vars:
                if not c1.has_explicit_label(loc, v):
                    assert values_equal(m.get(v), m.get(primed(v)))


def test_post_values_become_next_pre_values(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    for mem in derivative_inputs:
        out = run(c1, mem)
        steps = out.trace.steps
        for (_, m1), (_, m2) in zip(steps, steps[1:]):
            for v in c1.vars:
                assert values_equal(m1.get(primed(v)), m2.get(v))


def test_run_all_order_and_outcomes(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    _, i1 = derivative["i1"]
    outs = run_all(c1, derivative_inputs)
    assert len(outs) == 5
    assert all(isinstance(o, Ok) for o in outs)
    # the incorrect attempt must disagree with the reference somewhere
    bad = run_all(i1, derivative_inputs)
    disagree = False
    for good, maybe in zip(outs, bad):
        if not isinstance(maybe, Ok):
            disagree = True
        elif not values_equal(final_return(good), final_return(maybe)):
            disagree = True
    assert disagree


def test_empty_input_set_rejected():
    with pytest.raises(ValueError):
        InputSet(())
