"""Constraint language: solving, bounds, diameters, satisfiability."""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raqdp.constraints import (
    Attr,
    Bounds,
    Cmp,
    ConstrainedSchema,
    Domain,
    InSet,
    Lit,
    Not,
    Or,
    TRUE,
    FALSE,
    And,
    attribute_bounds,
    constraint_attrs,
    diameter,
    evaluate,
    format_constraint,
    initial_constraint,
    iter_solutions,
    make_and,
    make_or,
    normalize,
    satisfiable,
    solution_count,
)
from raqdp.errors import SchemaError
from raqdp.extmath import INF, NEG_INF
from raqdp.parsing import parse_constraint, parse_schemas


def ints(name, lo, hi):
    return (name, Domain.int_range(lo, hi))


def small_schema():
    return ConstrainedSchema("R", (ints("a", 0, 3), ints("b", 0, 2)))


# ---------------------------------------------------------------------------
# Domains


def test_int_range_rejects_infinite_endpoints():
    with pytest.raises(SchemaError):
        Domain(kind=Domain.int_range(0, 1).kind, lower=NEG_INF, upper=Fraction(3))


def test_empty_range_rejected():
    with pytest.raises(SchemaError):
        Domain.int_range(5, 4)


def test_str_set_rejects_numbers():
    with pytest.raises(SchemaError):
        Domain.str_set({"a", 3})


def test_contains():
    d = Domain.int_range(0, 5)
    assert d.contains(3)
    assert not d.contains(Fraction(1, 2))
    assert not d.contains("x")
    s = Domain.str_set({"x", "y"})
    assert s.contains("x") and not s.contains(0)
    n = Domain.num_set({1, Fraction(5, 2)})
    assert n.contains(Fraction(5, 2)) and not n.contains(2)


def test_schema_rejects_duplicate_and_unknown():
    with pytest.raises(SchemaError):
        ConstrainedSchema("R", (ints("a", 0, 1), ints("a", 0, 1)))
    with pytest.raises(SchemaError):
        ConstrainedSchema("R", (ints("a", 0, 1),), Cmp("<=", Attr("zz"), Lit(Fraction(0))))


# ---------------------------------------------------------------------------
# Enumeration against a hand-rolled oracle


def brute_solutions(schema, constraint):
    """Every grid point of the domains that satisfies the constraint."""
    axes = []
    for _, dom in schema.attributes:
        if dom.members:
            axes.append(list(dom.members))
        else:
            lo, hi = dom.interval()
            axes.append([Fraction(v) for v in range(int(lo), int(hi) + 1)])
    names = schema.attr_names()
    out = set()
    for point in itertools.product(*axes):
        if evaluate(constraint, dict(zip(names, point))):
            out.add(point)
    return out


def test_iter_solutions_matches_brute():
    schema = small_schema()
    c = parse_constraint("a + b <= 3 and not (a = 2)")
    got = set(iter_solutions(make_and([initial_constraint(schema), c]), schema))
    want = brute_solutions(schema, c)
    assert got == want
    assert solution_count(make_and([initial_constraint(schema), c]), schema) == len(want)


def test_solution_count_exceeds_cap():
    schema = ConstrainedSchema("R", (ints("a", 0, 100),))
    n = solution_count(initial_constraint(schema), schema, cap=10)
    assert n == "exceeds-cap"


def test_solution_count_infinite_for_real_interval():
    schema = ConstrainedSchema("R", (("x", Domain.real_range(0, 1)),))
    assert solution_count(initial_constraint(schema), schema) == "infinite"


def test_solution_count_real_pinned_is_finite():
    schema = ConstrainedSchema("R", (("x", Domain.real_range(0, 10)),))
    c = make_and([initial_constraint(schema), Cmp("=", Attr("x"), Lit(Fraction(4)))])
    assert solution_count(c, schema) == 1


def test_unsatisfiable_counts_zero():
    schema = small_schema()
    c = make_and([initial_constraint(schema), parse_constraint("a > 99")])
    assert solution_count(c, schema) == 0
    assert diameter(c, schema) == 0


# ---------------------------------------------------------------------------
# Diameter


def test_diameter_equals_solution_cardinality():
    schema = small_schema()
    c = initial_constraint(schema)
    assert diameter(c, schema) == 12  # 4 * 3 grid points
    narrowed = make_and([c, parse_constraint("a <= 0 and b <= 1")])
    assert diameter(narrowed, schema) == 2


def test_diameter_infinite_cases():
    real = ConstrainedSchema("R", (("x", Domain.real_range(0, 1)),))
    assert diameter(initial_constraint(real), real) == INF
    big = ConstrainedSchema("R", (ints("a", 0, 10**7),))
    assert diameter(initial_constraint(big), big, cap=1000) == INF


# ---------------------------------------------------------------------------
# Bounds


def test_bounds_exact_on_enumerable_grid():
    schema = small_schema()
    c = make_and([initial_constraint(schema), parse_constraint("a + b <= 2")])
    b = attribute_bounds(c, schema, "a")
    assert (b.lower, b.upper) == (0, 2)


def test_bounds_through_linear_narrowing():
    text = """
    relation Items {
      Cost: real [0, 10000];
      Price: real [0, 10000]
    } check { Cost <= Price and Price <= 1000 }
    """
    schema = parse_schemas(text)["Items"]
    c = initial_constraint(schema)
    assert attribute_bounds(c, schema, "Cost").upper == 1000
    assert attribute_bounds(c, schema, "Price").upper == 1000


def test_bounds_empty_flag():
    schema = small_schema()
    c = make_and([initial_constraint(schema), parse_constraint("a > 99")])
    assert attribute_bounds(c, schema, "a").empty


def test_bounds_disjunction_union():
    schema = ConstrainedSchema("R", (ints("a", 0, 100),))
    c = make_and(
        [initial_constraint(schema), parse_constraint("a <= 3 or a >= 97")]
    )
    b = attribute_bounds(c, schema, "a")
    assert (b.lower, b.upper) == (0, 100)
    narrowed = make_and([c, parse_constraint("a <= 50")])
    b2 = attribute_bounds(narrowed, schema, "a")
    assert (b2.lower, b2.upper) == (0, 3)


def test_bounds_open_endpoints_on_reals():
    schema = ConstrainedSchema("R", (("x", Domain.real_range(0, 10)),))
    c = make_and([initial_constraint(schema), parse_constraint("x < 5")])
    b = attribute_bounds(c, schema, "x")
    assert b.upper == 5 and b.upper_open
    assert b.lower == 0 and not b.lower_open


def test_aux_attributes_constrain_visible_ones():
    # b was projected away but still ties down a through a <= b <= 1.
    schema = ConstrainedSchema(
        "R",
        (ints("a", 0, 9),),
        make_and([parse_constraint("a <= b and b <= 1")]),
        aux=(ints("b", 0, 9),),
    )
    c = make_and([initial_constraint(schema)])
    b = attribute_bounds(c, schema, "a")
    assert b.upper == 1


# ---------------------------------------------------------------------------
# Satisfiability


def test_satisfiable_verdicts():
    schema = small_schema()
    c = initial_constraint(schema)
    assert satisfiable(c, schema) == "yes"
    assert satisfiable(make_and([c, parse_constraint("a > 99")]), schema) == "no"


def test_satisfiable_reals_witness_search():
    text = """
    relation Items {
      Cost: real [0, 10000];
      Price: real [0, 10000]
    } check { Cost <= Price and Price <= 1000 and Cost > 0 }
    """
    schema = parse_schemas(text)["Items"]
    assert satisfiable(initial_constraint(schema), schema) == "yes"


# ---------------------------------------------------------------------------
# Normalization properties


@st.composite
def constraint_texts(draw):
    """Random boolean combinations of simple atoms over a and b."""
    atoms = [
        "a <= 1", "a >= 2", "b = 0", "a + b <= 3", "a - b >= 1",
        "a in {0, 2}", "b > 1", "a < 3", "true", "false",
    ]
    def expr(depth):
        if depth == 0:
            return draw(st.sampled_from(atoms))
        form = draw(st.sampled_from(["and", "or", "not", "iff", "atom"]))
        if form == "atom":
            return draw(st.sampled_from(atoms))
        if form == "not":
            return f"not ({expr(depth - 1)})"
        return f"({expr(depth - 1)}) {form} ({expr(depth - 1)})"
    return expr(draw(st.integers(min_value=0, max_value=3)))


@given(constraint_texts())
@settings(max_examples=200, deadline=None)
def test_normalize_preserves_solution_set(text):
    schema = small_schema()
    c = parse_constraint(text)
    n = normalize(c)
    for point in itertools.product(range(4), range(3)):
        env = dict(zip(("a", "b"), (Fraction(v) for v in point)))
        assert evaluate(c, env) == evaluate(n, env)


@given(constraint_texts())
@settings(max_examples=100, deadline=None)
def test_format_parse_round_trip_preserves_meaning(text):
    c = parse_constraint(text)
    again = parse_constraint(format_constraint(c))
    for point in itertools.product(range(4), range(3)):
        env = dict(zip(("a", "b"), (Fraction(v) for v in point)))
        assert evaluate(c, env) == evaluate(again, env)


def test_make_and_or_flattening():
    a = Cmp("<=", Attr("a"), Lit(Fraction(1)))
    b = Cmp(">=", Attr("b"), Lit(Fraction(1)))
    c = make_and([a, make_and([b, TRUE])])
    assert isinstance(c, And) and len(c.items) == 2
    assert make_and([a, FALSE]) is FALSE
    assert make_or([a, TRUE]) is TRUE
    assert make_or([]) is FALSE
    assert make_and([]) is TRUE


def test_constraint_attrs():
    c = parse_constraint("a + b <= 3 and c in {1}")
    assert constraint_attrs(c) == {"a", "b", "c"}
