import random

import pytest

from tracemend.interp import InputSet, Ok, run, run_all
from tracemend.lower import lower_source
from tracemend.matching import (
    find_full_mapping,
    matches,
    potential_matches,
    structure_match,
    var_matches,
)
from tracemend.model import Memory, UNDEF, primed, values_equal

from conftest import load_attempts, load_inputs


def test_structure_match_c1_c2(derivative):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    kappa = structure_match(c1, c2)
    assert kappa == {1: 1, 2: 2, 3: 3, 4: 4}


def test_structure_match_identity(derivative):
    _, c1 = derivative["c1"]
    kappa = structure_match(c1, c1)
    assert kappa == {loc: loc for loc in c1.locations}


def test_structure_match_count_mismatch():
    one_loop = lower_source(
        "def f(n):\n    s = 0\n    while n > 0:\n        n = n - 1\n"
        "    return s\n", "a")
    two_loops = lower_source(
        "def f(n):\n    s = 0\n    while n > 0:\n        n = n - 1\n"
        "    while s > 0:\n        s = s - 1\n    return s\n", "b")
    assert structure_match(one_loop, two_loops) is None


def test_var_matches_der_res(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    t1 = run(c1, derivative_inputs.inputs[0]).trace
    t2 = run(c2, derivative_inputs.inputs[0]).trace
    assert var_matches(t1, t2, "der", "res")
    assert var_matches(t1, t1, "der", "der")  # reflexive
    assert not var_matches(t1, t2, "num", "res")


def test_var_matches_tolerates_left_undef(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    t1 = run(c1, derivative_inputs.inputs[0]).trace
    # $ret is undefined until the last step on the left, so it matches
    # anything whose final value agrees
    assert var_matches(t1, t1, "$ret", "$ret")


def test_find_full_mapping_c1_c2(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    pairs = potential_matches(c1, c2, derivative_inputs)
    pi = find_full_mapping(pairs, c1.vars, c2.vars)
    assert pi == {
        "poly": "poly", "num": "$iter1", "der": "res",
        "$cond": "$cond", "$ret": "$ret",
    }


def test_find_full_mapping_empty():
    assert find_full_mapping(set(), ("a", "$cond", "$ret"), ("b",)) is None


def test_find_full_mapping_complete_graph():
    spec_vars = ("a", "b", "$cond", "$ret")
    impl_vars = ("x", "y", "$cond", "$ret")
    pairs = {(v1, v2) for v1 in spec_vars for v2 in impl_vars}
    pi = find_full_mapping(pairs, spec_vars, impl_vars)
    assert pi is not None
    assert len(set(pi.values())) == len(pi)
    assert pi["$cond"] == "$cond" and pi["$ret"] == "$ret"


def test_matches_c1_c2(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    w = matches(c1, c2, derivative_inputs)
    assert w is not None
    assert w.pi["num"] == "$iter1"
    assert w.pi["der"] == "res"


def test_matches_c1_c3_none(derivative, derivative_inputs):
    _, c1 = derivative["c1"]
    _, c3 = derivative["c3"]
    assert matches(c1, c3, derivative_inputs) is None


def test_matches_c2_c1_none(derivative, derivative_inputs):
    # the reverse direction fails: the extra variables have no partners
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    assert matches(c2, c1, derivative_inputs) is None


@pytest.mark.parametrize("problem", ["derivative", "odditems", "evalpoly", "fibcount"])
def test_matches_reflexive_on_corpus(problem):
    attempts = load_attempts(problem)
    inputs = load_inputs(problem)
    for name, (_, prog) in attempts.items():
        outs = run_all(prog, inputs)
        if not all(isinstance(o, Ok) for o in outs):
            continue
        w = matches(prog, prog, inputs)
        assert w is not None, name
        assert w.kappa == {loc: loc for loc in prog.locations}
        assert w.pi == {v: v for v in prog.vars}


def test_witness_soundness_replay(derivative, derivative_inputs):
    """A returned witness satisfies the per-variable trace condition."""
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    w = matches(c1, c2, derivative_inputs)
    for mem in derivative_inputs:
        t1 = run(c1, mem).trace
        t2 = run(c2, mem).trace
        assert len(t1) == len(t2)
        for v1, v2 in w.pi.items():
            for (_, m1), (_, m2) in zip(t1, t2):
                left = m1.get(primed(v1))
                assert left is UNDEF or values_equal(left, m2.get(primed(v2)))


def test_kappa_deterministic(derivative):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    assert structure_match(c1, c2) == structure_match(c1, c2)


def test_potential_matches_shrink_with_more_inputs(derivative):
    _, c1 = derivative["c1"]
    _, c2 = derivative["c2"]
    all_inputs = load_inputs("derivative")
    small = InputSet(all_inputs.inputs[:1])
    few = potential_matches(c1, c2, small)
    many = potential_matches(c1, c2, all_inputs)
    assert many <= few
