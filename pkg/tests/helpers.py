"""Shared builders for the test suite: tiny schemas, random plans, oracles."""

from __future__ import annotations

import random
from fractions import Fraction

from raqdp.constraints import (
    Attr,
    Cmp,
    ConstrainedSchema,
    Domain,
    InSet,
    Lit,
    make_and,
    solution_count,
    initial_constraint,
)
from raqdp.engine import Relation
from raqdp.errors import ValidationError
from raqdp.oracle import SensitiveRelation, Universe, enumerate_tuples
from raqdp.parsing import parse_schemas
from raqdp.query import (
    AggFn,
    Difference,
    GroupAggregate,
    Id,
    Intersection,
    ProductOne,
    Projection,
    Restriction,
    TopQuery,
    Union,
    output_schema,
    validate,
)

AGG_KINDS = ("count", "sum", "max", "min", "avg")


def schema_of(text: str) -> dict[str, ConstrainedSchema]:
    return parse_schemas(text)


# ---------------------------------------------------------------------------
# Random generation for the soundness sweep and the monotonicity property.
# Everything is driven by a seeded random.Random so failures replay exactly.


def random_domain(rng: random.Random, width: int) -> Domain:
    kind = rng.randrange(3)
    if kind == 0:
        lo = rng.randint(-3, 3)
        return Domain.int_range(Fraction(lo), Fraction(lo + width - 1))
    if kind == 1:
        values = rng.sample([-2, -1, 0, 1, 2, 3, 5], k=min(width, 7))
        return Domain.num_set(frozenset(Fraction(v) for v in values))
    names = rng.sample(["red", "blue", "green", "amber"], k=min(width, 4))
    return Domain.str_set(frozenset(names))


def random_schema(
    rng: random.Random, name: str = "R", max_solutions: int = 6
) -> ConstrainedSchema:
    """A schema whose admissible-tuple universe has 1..max_solutions members."""
    while True:
        n_attrs = rng.choice([1, 1, 2])
        widths = _split_budget(rng, max_solutions, n_attrs)
        attrs = tuple(
            (f"a{i}", random_domain(rng, w)) for i, w in enumerate(widths)
        )
        schema = ConstrainedSchema(name, attrs)
        n = solution_count(initial_constraint(schema), schema)
        if isinstance(n, int) and 1 <= n <= max_solutions:
            return schema


def _split_budget(rng: random.Random, budget: int, parts: int) -> list[int]:
    if parts == 1:
        return [rng.randint(2, budget)]
    first = rng.randint(2, max(2, budget // 2))
    return [first, max(2, budget // first)]


def random_atom(rng: random.Random, schema: ConstrainedSchema):
    """One satisfiable comparison or membership atom over the schema."""
    attr, domain = rng.choice(list(schema.attributes))
    if domain.is_numeric:
        if domain.members:
            value = rng.choice(domain.members)
        else:
            lo, hi = domain.interval()
            value = Fraction(rng.randint(int(lo), int(hi)))
        op = rng.choice(["<=", ">=", "="])
        return Cmp(op, Attr(attr), Lit(value))
    names = list(domain.members)
    chosen = rng.sample(names, k=rng.randint(1, len(names)))
    return InSet(Attr(attr), frozenset(chosen), negated=rng.random() < 0.3)


def random_plan(rng: random.Random, schema: ConstrainedSchema, depth: int):
    """A plan over Id(schema) and the fixed one-row helper relation K."""
    if depth <= 0 or rng.random() < 0.25:
        return Id(schema.name)
    kind = rng.choice(
        ["restriction", "projection", "union", "intersection",
         "difference", "product-one", "group-aggregate"]
    )
    child = random_plan(rng, schema, depth - 1)
    if kind == "restriction":
        return Restriction(random_atom(rng, schema), child)
    if kind == "projection":
        return Projection((schema.attr_names()[0],), child)
    if kind in ("union", "intersection", "difference"):
        other = random_plan(rng, schema, depth - 1)
        cls = {"union": Union, "intersection": Intersection, "difference": Difference}[kind]
        return cls(child, other)
    if kind == "product-one":
        return ProductOne(Id("K"), child)
    group = schema.attr_names()[0]
    fns = [AggFn("count")]
    numeric = [a for a, d in schema.attributes if d.is_numeric and a != group]
    if numeric and rng.random() < 0.5:
        fns.append(AggFn(rng.choice(["sum", "max", "min", "avg"]), numeric[0]))
    return GroupAggregate((group,), tuple(fns), child)


K_SCHEMA_TEXT = 'relation K { k: int [7, 7] }'


def random_case(rng: random.Random, max_solutions: int = 6, depth: int = 4):
    """A (query, schemas, universe) triple ready for both analyses.

    Rejection-samples until the plan validates and the top aggregation has a
    numeric attribute to work on.
    """
    while True:
        schema = random_schema(rng, max_solutions=max_solutions)
        k_schema = schema_of(K_SCHEMA_TEXT)["K"]
        schemas = {schema.name: schema, "K": k_schema}
        plan = random_plan(rng, schema, rng.randint(1, depth))
        try:
            out = output_schema(plan, schemas)
        except ValidationError:
            continue
        kind = rng.choice(AGG_KINDS)
        if kind == "count":
            fn = AggFn("count")
        else:
            numeric = [a for a in out.attr_names() if out.domain(a).is_numeric]
            if not numeric:
                fn = AggFn("count")
            else:
                fn = AggFn(kind, rng.choice(numeric))
        tq = TopQuery(fn, plan)
        try:
            validate(tq, schemas)
        except ValidationError:
            continue
        universe = Universe(
            (SensitiveRelation(schema.name, schema, enumerate_tuples(schema)),),
            (("K", Relation(k_schema, frozenset({(Fraction(7),)}))),),
        )
        return tq, schemas, universe
