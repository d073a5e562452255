"""Brute-force ground truth and its agreement with the static bound."""

import random
from fractions import Fraction

import pytest

from raqdp.analyzer import global_sensitivity
from raqdp.engine import Relation
from raqdp.errors import OracleError
from raqdp.extmath import is_infinite
from raqdp.oracle import (
    SensitiveRelation,
    Universe,
    brute_lipschitz,
    brute_sensitivity,
    brute_sensitivity_ratio,
    build_universe,
    enumerate_tuples,
)
from raqdp.parsing import parse_query, parse_schemas

from helpers import random_case


def universe_for(query_text, schema_text, context=None, cap=12):
    tq = parse_query(query_text)
    schemas = parse_schemas(schema_text)
    return tq, schemas, build_universe(tq, schemas, context, cap=cap)


# ---------------------------------------------------------------------------
# Universe construction


def test_enumerate_tuples_lists_the_grid():
    schema = parse_schemas("relation R { a: int [0, 2] }")["R"]
    assert enumerate_tuples(schema) == (
        (Fraction(0),),
        (Fraction(1),),
        (Fraction(2),),
    )


def test_enumerate_respects_check_constraint():
    schema = parse_schemas(
        "relation R { a: int [0, 5] } check { a <= 1 }"
    )["R"]
    assert enumerate_tuples(schema) == ((Fraction(0),), (Fraction(1),))


def test_universe_cap_enforced():
    with pytest.raises(OracleError):
        universe_for("count of R", "relation R { a: int [0, 50] }")


def test_non_enumerable_universe_rejected():
    with pytest.raises(OracleError):
        universe_for("count of R", "relation R { x: real [0, 1] }")


def test_context_relations_are_not_enumerated():
    schemas = parse_schemas(
        "relation S { a: int [0, 1] }\nrelation T { a: int [0, 50] }"
    )
    tq = parse_query("count of S intersect T")
    t_rel = Relation.from_rows(schemas["T"], [[Fraction(1)]])
    uni = build_universe(tq, schemas, context={"T": t_rel})
    assert [sr.name for sr in uni.sensitive] == ["S"]
    res = brute_sensitivity(tq, uni)
    assert res.value == 1


# ---------------------------------------------------------------------------
# Known exact values


def test_count_brute_is_one():
    tq, _, uni = universe_for("count of R", "relation R { a: int [0, 2] }")
    res = brute_sensitivity(tq, uni)
    assert res.value == 1
    assert res.witness is not None


def test_sum_brute_is_extreme_magnitude():
    tq, _, uni = universe_for("sum(a) of R", "relation R { a: int [-4, 2] }")
    res = brute_sensitivity(tq, uni)
    assert res.value == 4  # adding or removing the tuple (-4,)
    before, after = res.witness
    diff = set(map(tuple, before["R"])) ^ set(map(tuple, after["R"]))
    assert diff == {(Fraction(-4),)}


def test_max_brute_spans_the_range():
    tq, _, uni = universe_for("max(a) of R", "relation R { a: int [0, 10] }")
    assert brute_sensitivity(tq, uni).value == 10


def test_avg_brute_is_half_range():
    tq, _, uni = universe_for("avg(a) of R", "relation R { a: num in {0, 5, 10} }")
    assert brute_sensitivity(tq, uni).value == 5


def test_empty_default_drives_min_sensitivity():
    # min over empty relation defaults to the range supremum; inserting the
    # smallest tuple then swings the answer across the whole range
    tq, _, uni = universe_for("min(a) of R", "relation R { a: num in {0, 5, 10} }")
    assert brute_sensitivity(tq, uni).value == 10


def test_union_witness_changes_both_relations():
    text = "relation R { a: int [0, 2] }\nrelation T { a: int [3, 5] }"
    tq, _, uni = universe_for("count of R union T", text)
    res = brute_sensitivity(tq, uni)
    assert res.value == 2
    before, after = res.witness
    assert before["R"] != after["R"] and before["T"] != after["T"]


# ---------------------------------------------------------------------------
# The two oracle formulations agree


def test_adjacent_equals_ratio_on_random_cases():
    rng = random.Random(424242)
    for _ in range(25):
        tq, schemas, uni = random_case(rng, max_solutions=4, depth=3)
        adjacent = brute_sensitivity(tq, uni).value
        ratio = brute_sensitivity_ratio(tq, uni)
        assert adjacent == ratio


# ---------------------------------------------------------------------------
# Lipschitz form for plans


def test_lipschitz_of_identity_is_one():
    tq, schemas, uni = universe_for("count of R", "relation R { a: int [0, 2] }")
    assert brute_lipschitz(tq.body, uni) == 1


def test_lipschitz_union_reaches_two():
    text = "relation R { a: int [0, 2] }\nrelation T { a: int [3, 5] }"
    tq, schemas, uni = universe_for("count of R union T", text)
    assert brute_lipschitz(tq.body, uni) == 2


def test_lipschitz_bounded_by_static_s():
    from raqdp.query import validate_plan
    from raqdp.analyzer import intermediate_sensitivity

    rng = random.Random(31415)
    for _ in range(15):
        tq, schemas, uni = random_case(rng, max_solutions=4, depth=3)
        memo = validate_plan(tq.body, schemas)
        s = intermediate_sensitivity(tq.body, memo)
        lip = brute_lipschitz(tq.body, uni)
        assert is_infinite(s) or lip <= s


# ---------------------------------------------------------------------------
# Soundness of the full bound


def test_static_bound_dominates_brute_on_random_cases():
    rng = random.Random(8675309)
    for _ in range(40):
        tq, schemas, uni = random_case(rng)
        rep = global_sensitivity(tq, schemas)
        res = brute_sensitivity(tq, uni)
        assert is_infinite(rep.gs) or res.value <= rep.gs


def test_max_size_cap_restricts_databases():
    schema = parse_schemas("relation R { a: int [0, 2] }")["R"]
    capped = Universe(
        (SensitiveRelation("R", schema, enumerate_tuples(schema), max_size=1),)
    )
    tq = parse_query("sum(a) of R")
    res = brute_sensitivity(tq, capped)
    assert res.value == 2
