"""Representative-based chase and the naive reference fixpoint."""

import pytest

from chasegoal import (
    BodyContractViolation,
    DepthLimitExceeded,
    FactLimitExceeded,
    Limits,
    PipelineConfig,
    chase,
    extract_answers,
    naive_fixpoint,
    parse_program,
    parse_rules,
    run_pipeline,
)
from chasegoal.chase import constant_answers
from chasegoal.kernel import (
    Atom,
    Constant,
    Functional,
    Instance,
    Predicate,
    Program,
    Rule,
    Variable,
    eq,
    occurs_in,
)

from helpers import Q1, running_example

a, b, c = Constant("a"), Constant("b"), Constant("c")
x, y, z = Variable("x"), Variable("y"), Variable("z")
P1, T2 = Predicate("P", 1), Predicate("T", 2)


def final_program(scenario, mode="all"):
    rep = run_pipeline(scenario, PipelineConfig(mode=mode))
    return rep.stages["desg"], rep


# -- the two contract examples ---------------------------------------------


def test_empty_program_is_identity():
    base = [Atom(P1, (a,))]
    result = chase(Program(()), base)
    assert set(result.instance) == set(base)
    assert result.mu == {}
    assert result.stats.derived_facts == 0


def test_single_egd_merges_to_smaller_representative():
    egd = Rule(eq(x, y), (Atom(T2, (x, y)),))
    result = chase(Program((egd,)), [Atom(T2, (a, b))])
    assert set(result.instance) == {Atom(T2, (a, a))}
    assert result.mu == {b: a}
    assert result.classes == {a: frozenset({a, b})}
    assert result.stats.merges == 1


# -- worked example trace ----------------------------------------------------


TRACE = [
    "m_Q#f()",
    "m_A#f()",
    "A(sk_3_y(a1))",
    "fun_sk_3_y(a1,sk_3_y(a1))",
    "m_eq#eqb(sk_3_y(a1))",
    "m_R#bf(sk_3_y(a1))",
    "m_T#bf(sk_3_y(a1))",
    "m_T#fb(sk_3_y(a1))",
    "T(a1,sk_3_y(a1))",
    "a1 = sk_3_y(a1)",
    "R(a1,sk_1_y(a1))",
    "Q(a1)",
]


def test_worked_example_derivation_trace():
    prog, rep = final_program(running_example(3))
    result = chase(prog, running_example(3).instance)
    assert [repr(e) for e in result.derived] == TRACE
    assert result.mu == {Functional("sk_3_y", (Constant("a1"),)): Constant("a1")}
    assert rep.chase_stats.derived_facts == 12


# -- merging semantics -------------------------------------------------------


def test_merge_rewrites_top_level_occurrences():
    prog = Program((Rule(eq(x, y), (Atom(T2, (x, y)),)),))
    base = [Atom(T2, (a, b)), Atom(P1, (b,))]
    result = chase(prog, base)
    assert Atom(P1, (a,)) in result.instance
    assert Atom(P1, (b,)) not in result.instance


def test_merge_chooses_constant_over_function_term():
    # representative order: depth first, so constants always win
    f_b = Functional("f", (b,))
    prog = Program((Rule(eq(x, y), (Atom(T2, (x, y)),)),))
    result = chase(prog, [Atom(T2, (f_b, a))])
    assert result.mu == {f_b: a}


def test_merged_away_term_never_survives_nested():
    # derive U over a Skolem of b, then merge b into a: no surviving fact
    # may mention b at any depth, whichever order the rules fired in
    text = """
    R(?x) -> T(?x,?y)
    T(?x,?y) -> U(?y)
    U(?z) -> V(?z,?w)
    R(?x), R(?y) -> ?x = ?y
    R(?x) -> Q(?x)
    """
    from chasegoal import Scenario

    R1 = Predicate("R", 1)
    sc = Scenario(
        rules=tuple(parse_rules(text)),
        instance=Instance([Atom(R1, (a,)), Atom(R1, (b,))]),
        query=Q1,
        una_known=False,
    )
    for seed in range(8):
        rep = run_pipeline(sc, PipelineConfig(mode="mat", seed=seed))
        for fact in rep.chase_result.instance:
            assert not any(occurs_in(b, t) for t in fact.args), (seed, fact)
        assert rep.answers == (("a",), ("b",))


def test_base_equality_facts_merge_upfront_uncounted():
    result = chase(Program(()), [Atom(P1, (b,)), eq(a, b)])
    assert set(result.instance) == {Atom(P1, (a,))}
    assert result.stats.derived_facts == 0
    assert result.mu == {b: a}


def test_answers_read_through_the_term_map():
    # Q holds of a Skolem term that got merged with a constant: the
    # constants of the class are the answers
    prog, _ = final_program(running_example(3))
    result = chase(prog, running_example(3).instance)
    answers = {tuple(t.name for t in ans) for ans in extract_answers(result, Q1)}
    assert answers == {("a1",)}


def test_determinism_across_seeds_small():
    prog, _ = final_program(running_example(3))
    outcomes = set()
    for seed in range(10):
        r = chase(prog, running_example(3).instance, seed=seed)
        outcomes.add((frozenset(r.instance), tuple(sorted(r.mu.items(), key=repr))))
    assert len(outcomes) == 1


# -- contract checks ---------------------------------------------------------


def test_rejects_equality_in_body():
    rule = Rule(Atom(P1, (x,)), (eq(x, y), Atom(T2, (x, y))))
    with pytest.raises(BodyContractViolation):
        chase(Program((rule,)), [])


def test_rejects_non_variable_body_argument():
    rule = Rule(Atom(P1, (x,)), (Atom(T2, (x, a)),))
    with pytest.raises(BodyContractViolation):
        chase(Program((rule,)), [])


def test_rejects_unbound_head_variable():
    rule = Rule(Atom(P1, (z,)), (Atom(T2, (x, y)),))
    with pytest.raises(BodyContractViolation):
        chase(Program((rule,)), [])


def test_rejects_non_ground_base_fact():
    with pytest.raises(BodyContractViolation):
        chase(Program(()), [Atom(P1, (x,))])


# -- guards -------------------------------------------------------------------


NESTING = """
P(?x) :- fun_f(?x,?y), P(?y).
fun_f(f(?x),?x) :- P(?x).
P(f(?x)) :- P(?x).
"""


def test_depth_guard_trips():
    prog = parse_program(NESTING)
    with pytest.raises(DepthLimitExceeded):
        chase(prog, [Atom(P1, (a,))], Limits(max_depth=4, max_facts=10_000))


def test_fact_guard_trips():
    prog = parse_program(NESTING)
    with pytest.raises(FactLimitExceeded):
        chase(prog, [Atom(P1, (a,))], Limits(max_depth=10_000, max_facts=30))


# -- naive fixpoint -----------------------------------------------------------


def test_naive_fixpoint_is_plain_closure():
    prog = parse_program("T(?x,?z) :- E(?x,?y), T(?y,?z).\nT(?x,?y) :- E(?x,?y).")
    E = Predicate("E", 2)
    base = [Atom(E, (a, b)), Atom(E, (b, c))]
    closed = naive_fixpoint(prog, base)
    T = Predicate("T", 2)
    assert Atom(T, (a, c)) in closed
    assert len(closed.with_predicate(T)) == 3


def test_naive_fixpoint_treats_equality_as_facts():
    # no representative merging: both variants stay in the closure
    prog = parse_program("P(?y) :- P(?x), ?x = ?y.\n?x = ?y :- T(?x,?y).")
    closed = naive_fixpoint(prog, [Atom(T2, (a, b)), Atom(P1, (a,))])
    assert eq(a, b) in closed
    assert Atom(P1, (a,)) in closed and Atom(P1, (b,)) in closed


def test_naive_fixpoint_allows_constants_and_functions_in_bodies():
    prog = parse_program("Q(?x) :- R(?x,c).\nR(?x,c) :- P(?x).")
    closed = naive_fixpoint(prog, [Atom(P1, (a,))])
    assert {t for t, in constant_answers(closed, Q1)} == {a}


def test_naive_fixpoint_rejects_unbound_head_variable():
    rule = Rule(Atom(P1, (z,)), (Atom(T2, (x, y)),))
    with pytest.raises(BodyContractViolation):
        naive_fixpoint([rule], [])


def test_naive_fixpoint_guards():
    prog = parse_program("P(f(?x)) :- P(?x).")
    with pytest.raises(DepthLimitExceeded):
        naive_fixpoint(prog, [Atom(P1, (a,))], Limits(max_depth=3, max_facts=1000))
