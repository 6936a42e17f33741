import pytest

from tracemend import ilp
from tracemend.interp import InputSet, run_all
from tracemend.lower import format_expr, lower_source
from tracemend.matching import matches, structure_match
from tracemend.model import Const, Memory, OpApply, PrimedVarRef, VarRef, primed
from tracemend.repair import (
    DELETE,
    DELETED,
    RepairTimeout,
    STAR,
    apply_repair,
    check_order_conflicts,
    collect_memories,
    cond_matchings,
    decode,
    delete_matchings,
    encode,
    fresh_name,
    repair_best,
    repair_one,
)
from tracemend.treedist import node_count

from conftest import load_attempts, load_inputs


@pytest.fixture(scope="module")
def deriv():
    attempts = load_attempts("derivative")
    inputs = load_inputs("derivative")
    return attempts, inputs


def _traces(prog, inputs):
    return [o.trace for o in run_all(prog, inputs)]


def test_cond_matchings_paper_examples(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i1 = attempts["i1"]
    kappa = structure_match(c1, i1)
    traces = _traces(c1, inputs)

    # loop condition: fixing + to - under num->p costs 1; using res costs 2
    cands = cond_matchings(c1, i1, kappa, traces, 2, "$cond")
    by_rho = {(c.rho, c.cost) for c in cands}
    assert any(dict(r).get("num") == "p" and cost == 1 for r, cost in by_rho)
    assert any(dict(r).get("num") == "res" and cost == 2 for r, cost in by_rho)
    assert all(c.rho_dict().get("$cond") == "$cond" for c in cands)

    # the correct matching num ~ p at the initialization location, cost 0
    cands = cond_matchings(c1, i1, kappa, traces, 1, "num")
    assert any(
        c.cost == 0 and c.rho_dict() == {"num": "p"} and c.kind == "correct"
        for c in cands
    )


def test_cond_matchings_self_identity(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    kappa = structure_match(c1, c1)
    traces = _traces(c1, inputs)
    for l1 in c1.locations:
        for v1 in c1.vars:
            cands = cond_matchings(c1, c1, kappa, traces, l1, v1)
            assert any(
                c.cost == 0 and c.rho_dict().get(v1) == v1 for c in cands
            ), (l1, v1)


def test_candidate_completeness_all_star(deriv):
    """The full-replacement candidate always exists (the fallback that makes
    the selection problem feasible): every non-parameter variable onto a
    fresh target, parameters and special variables onto themselves."""
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i2 = attempts["i2"]
    kappa = structure_match(c1, i2)
    traces = _traces(c1, inputs)

    def fallback_pair(u, t):
        if u in ("$cond", "$ret") or u in c1.params:
            return t == u
        return t == STAR

    for l1 in c1.locations:
        for v1 in c1.non_special_vars():
            cands = cond_matchings(c1, i2, kappa, traces, l1, v1)
            assert any(
                all(fallback_pair(u, t) for u, t in c.rho) for c in cands
            ), (l1, v1)


def test_delete_matchings(deriv):
    attempts, _ = deriv
    _, i2 = attempts["i2"]
    # loop body: deriv's assignment costs its node count to delete
    cands = delete_matchings(i2, 3)
    by_var = {c.impl_var: c for c in cands}
    assert set(by_var) == {"deriv", "p"}
    assert by_var["deriv"].cost == node_count(i2.label(3, "deriv")) == 12
    assert by_var["deriv"].rho == ((DELETE, "deriv"),)
    # after the loop only $ret is assigned; special variables are never
    # deletion candidates, so the set is empty
    assert delete_matchings(i2, 4) == []


def test_delete_matchings_single_assignment():
    p = lower_source("def f(x):\n    y = x + 1\n    return y\n", "t")
    cands = delete_matchings(p, 1)
    assert len(cands) == 1 and cands[0].impl_var == "y"


def _encode_for(spec, impl, inputs):
    kappa = structure_match(spec, impl)
    traces = _traces(spec, inputs)
    from tracemend.repair import _Collector

    collector = _Collector(spec, impl, kappa, collect_memories(traces), None)
    groups = {}
    for l1 in spec.locations:
        zero = set()
        pvc = {}
        for v1 in spec.vars:
            c = collector.correct_matchings(l1, v1)
            pvc[v1] = c
            zero |= {p for cc in c for p in cc.rho}
        for v1 in spec.vars:
            from tracemend.repair import _dedup

            groups[(l1, v1)] = _dedup(
                pvc[v1] + collector.modification_matchings(l1, v1, zero))
    deletions = []
    for l1 in spec.locations:
        deletions.extend(collector.delete_matchings(kappa[l1]))
    return kappa, encode(groups, deletions, spec.vars, impl.vars)


def test_encode_objective_i1(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i1 = attempts["i1"]
    _, enc = _encode_for(c1, i1, inputs)
    res = ilp.solve(enc.model)
    assert res.status == ilp.OPTIMAL
    assert res.assignment.objective_value == 1


def test_repair_of_matching_member_costs_zero(deriv):
    """Repairing an attempt the reference already matches yields the empty
    repair with the witness mapping (C2 carries a helper variable st that no
    reference expression can absorb, so the conditional-matching encoding
    alone prices the loop body at 9; the matching fast path answers 0)."""
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, c2 = attempts["c2"]
    result = repair_one(c1, c2, inputs, spec_id="c1")
    assert result.total_cost == 0
    assert result.mods == ()
    assert result.pi["der"] == "res" and result.pi["num"] == "$iter1"
    _, enc = _encode_for(c1, c2, inputs)
    res = ilp.solve(enc.model)
    assert res.assignment.objective_value == 9  # the encoding alone


def test_encode_forces_star_when_impl_has_no_variables():
    from tracemend.model import END, Program

    spec = Program(
        name="s", locations=(1,), init=1,
        vars=("a", "b", "$cond", "$ret"), params=(),
        labels={(1, "a"): Const(1),
                (1, "b"): OpApply("+", (Const(1), Const(1)))},
        succ={(1, True): END, (1, False): END},
    )
    impl = Program(
        name="i", locations=(1,), init=1,
        vars=("$cond", "$ret"), params=(),
        labels={}, succ={(1, True): END, (1, False): END},
    )
    inputs = InputSet((Memory({}),))
    result = repair_one(spec, impl, inputs, spec_id="s")
    assert result.pi["a"] == fresh_name("a")
    assert result.pi["b"] == fresh_name("b")
    # one inserted statement per assigned spec variable, at node-count cost
    assert result.total_cost == 1 + 3
    applied = apply_repair(impl, result)
    assert matches(spec, applied, inputs) is not None


def test_decode_i1(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i1 = attempts["i1"]
    kappa, enc = _encode_for(c1, i1, inputs)
    res = ilp.solve(enc.model)
    result = decode(res.assignment, enc, kappa, i1, "c1")
    assert result.total_cost == 1
    assert len(result.mods) == 1
    mod = result.mods[0]
    assert mod.impl_var == "$cond"
    assert format_expr(mod.old_expr) == "p < len(poly) + 1"
    assert format_expr(mod.new_expr) == "p < len(poly) - 1"
    assert result.pi == {"poly": "poly", "num": "p", "der": "res",
                         "$cond": "$cond", "$ret": "$ret"}


def test_repair_one_i2_inserts_ite(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i2 = attempts["i2"]
    result = repair_one(c1, i2, inputs, spec_id="c1")
    assert result.total_cost == 9
    assert len(result.mods) == 2
    inserted = [m for m in result.mods if m.inserts_statement]
    assert len(inserted) == 1
    text = format_expr(inserted[0].new_expr)
    assert "append(deriv, 0.0)" in text and "len(poly) == 1" in text
    ret_mod = [m for m in result.mods if m.impl_var == "$ret"][0]
    assert ret_mod.new_expr == PrimedVarRef("deriv")
    applied = apply_repair(i2, result)
    assert matches(c1, applied, inputs) is not None


def test_repair_one_self_is_free(deriv):
    attempts, inputs = deriv
    for name in ("c1", "c2", "c3"):
        _, prog = attempts[name]
        result = repair_one(prog, prog, inputs, spec_id=name)
        assert result.total_cost == 0
        assert result.mods == ()


def test_repair_prefers_modification_over_deletion():
    spec = lower_source("def f(x):\n    u = x + 7\n    return u\n", "s")
    impl = lower_source("def f(x):\n    t = x + 9\n    return t\n", "i")
    inputs = InputSet((Memory({"x": 1}), Memory({"x": 5})))
    result = repair_one(spec, impl, inputs, spec_id="s")
    assert result.total_cost == 1
    assert not any(m.is_deletion for m in result.mods)
    assert result.pi["u"] == "t"


def test_order_conflict_fibcount(fibcount, fibcount_inputs):
    _, f1 = fibcount["f1"]
    _, f2 = fibcount["f2"]
    # the first solve picks conflicting orders; the incremental constraints
    # produce a conflict-free repair
    kappa, enc = _encode_for(f1, f2, fibcount_inputs)
    res = ilp.solve(enc.model)
    first = decode(res.assignment, enc, kappa, f2, "f1")
    assert check_order_conflicts(first.selected, f2), \
        "expected an order conflict on the first solve"
    result = repair_one(f1, f2, fibcount_inputs, spec_id="f1")
    assert result.conflict_rounds >= 1
    assert check_order_conflicts(result.selected, f2) == []
    applied = apply_repair(f2, result)
    assert matches(f1, applied, fibcount_inputs) is not None


def test_order_conflicts_empty_for_self_repair(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    result = repair_one(c1, c1, inputs, spec_id="c1")
    assert check_order_conflicts(result.selected, c1) == []


def test_repair_best_picks_cheapest_spec(deriv):
    attempts, inputs = deriv
    specs = [("c1", attempts["c1"][1]), ("c3", attempts["c3"][1])]
    _, i1 = attempts["i1"]
    best = repair_best(specs, i1, inputs)
    assert best.result is not None
    assert best.result.spec_id == "c1"
    assert best.result.total_cost == 1
    assert not best.timed_out


def test_repair_best_member_costs_zero(deriv):
    attempts, inputs = deriv
    specs = [("c1", attempts["c1"][1]), ("c3", attempts["c3"][1])]
    _, c2 = attempts["c2"]
    best = repair_best(specs, c2, inputs)
    assert best.result.total_cost == 0


def test_repair_best_no_structure_match(deriv):
    attempts, inputs = deriv
    specs = [("c1", attempts["c1"][1]), ("c3", attempts["c3"][1])]
    stranger = lower_source(
        "def computeDeriv(poly):\n"
        "    a = 0\n"
        "    while a < len(poly):\n"
        "        a = a + 1\n"
        "    b = 0\n"
        "    while b < a:\n"
        "        b = b + 1\n"
        "    der = [0.0]\n"
        "    return der\n", "stranger")
    best = repair_best(specs, stranger, inputs)
    assert best.result is None
    assert not best.timed_out


def test_repair_one_zero_budget_times_out(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i1 = attempts["i1"]
    with pytest.raises(RepairTimeout):
        repair_one(c1, i1, inputs, budget=0.0, spec_id="c1")


def test_apply_repair_identity(deriv):
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    result = repair_one(c1, c1, inputs, spec_id="c1")
    assert apply_repair(c1, result) == c1


def test_full_replacement_fallback_is_feasible_and_sound(deriv):
    """The all-star selection (replace everything, delete every attempt
    variable's assignments) satisfies the constraints, and its decoded repair
    projects the attempt's traces onto the reference's."""
    attempts, inputs = deriv
    _, c1 = attempts["c1"]
    _, i1 = attempts["i1"]
    kappa, enc = _encode_for(c1, i1, inputs)

    values = {v: 0 for v in enc.model.variables}
    pinned = set(c1.params) | {"$cond", "$ret"}
    for v in pinned:
        values[f"p[{v}|{v}]"] = 1
    for v1 in c1.non_special_vars():
        if v1 not in pinned:
            values[f"p[{v1}|{STAR}]"] = 1
    for v2 in i1.non_special_vars():
        if v2 not in pinned:
            values[f"p[{DELETE}|{v2}]"] = 1
    total = 0
    for idx, cand in enumerate(enc.candidates):
        if cand.kind == "delete" and cand.impl_var not in pinned:
            values[f"m{idx}"] = 1
            total += cand.cost

    def fallback_pair(u, t):
        if u in pinned:
            return t == u
        return t == STAR

    for key, group in enc.groups.items():
        chosen = None
        for idx in group:
            cand = enc.candidates[idx]
            if cand.kind == "modify" and all(
                    fallback_pair(u, t) for u, t in cand.rho):
                chosen = idx
                break
        assert chosen is not None, key
        values[f"m{chosen}"] = 1
        total += enc.candidates[chosen].cost
    assert ilp.check_assignment(enc.model, values)
    assignment = ilp.Assignment(values, total)
    result = decode(assignment, enc, kappa, i1, "c1")
    applied = apply_repair(i1, result)
    assert matches(c1, applied, inputs) is not None


def test_small_repair_model_matches_brute_force():
    spec = lower_source("def f():\n    return 1\n", "s")
    impl = lower_source("def f():\n    return 2\n", "i")
    inputs = InputSet((Memory({}),))
    _, enc = _encode_for(spec, impl, inputs)
    assert len(enc.model.variables) <= 20
    fast = ilp.solve(enc.model)
    slow = ilp.brute_force(enc.model)
    assert fast.assignment.objective_value == slow.assignment.objective_value == 1
    assert fast.assignment == slow.assignment
