"""Exhaustive sensitivity computation on small finite universes.

The ground truth the static analyzer is judged against: enumerate every
database over the admissible tuple universes, evaluate the query exactly,
and take the worst change across adjacent databases. An adjacency step may
add or remove at most one tuple in each sensitive relation (at least one
relation changes); fixed context relations never change.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .constraints import ConstrainedSchema, initial_constraint, iter_solutions
from .engine import Relation, answer, eval_plan
from .errors import OracleError
from .query import Plan, TopQuery, base_relations, validate, validate_plan

DEFAULT_UNIVERSE_CAP = 12


@dataclass(frozen=True)
class SensitiveRelation:
    name: str
    schema: ConstrainedSchema
    universe: tuple  # all admissible tuples, in a fixed order
    max_size: int | None = None  # admissible relations hold at most this many

    def capacity(self) -> int:
        return len(self.universe) if self.max_size is None else min(self.max_size, len(self.universe))


@dataclass(frozen=True)
class Universe:
    sensitive: tuple[SensitiveRelation, ...]
    context: tuple[tuple[str, Relation], ...] = ()

    def schemas(self) -> dict[str, ConstrainedSchema]:
        out = {sr.name: sr.schema for sr in self.sensitive}
        out.update({name: rel.schema for name, rel in self.context})
        return out

    def context_db(self) -> dict[str, Relation]:
        return {name: rel for name, rel in self.context}


def enumerate_tuples(schema: ConstrainedSchema, cap: int = DEFAULT_UNIVERSE_CAP) -> tuple:
    """All tuples admissible under the schema's domains and check constraint."""
    solutions = iter_solutions(initial_constraint(schema), schema, cap=max(cap * 64, 4096))
    if solutions is None:
        raise OracleError(
            f"relation {schema.name!r} has a non-enumerable tuple universe"
        )
    out = []
    for tup in solutions:
        out.append(tup)
        if len(out) > cap:
            raise OracleError(
                f"relation {schema.name!r} has more than {cap} admissible tuples"
            )
    return tuple(out)


def build_universe(
    tq: TopQuery,
    schemas: dict[str, ConstrainedSchema],
    context: dict[str, Relation] | None = None,
    cap: int = DEFAULT_UNIVERSE_CAP,
) -> Universe:
    """Universe for the query: data-backed relations are fixed context."""
    context = context or {}
    names = sorted(base_relations(tq.body))
    sensitive = []
    total = 0
    for name in names:
        if name in context:
            continue
        if name not in schemas:
            raise OracleError(f"no schema for relation {name!r}")
        tuples = enumerate_tuples(schemas[name], cap)
        total += len(tuples)
        if total > cap:
            raise OracleError(
                f"combined tuple universe exceeds the cap of {cap}; "
                "fix more relations as context data"
            )
        sensitive.append(SensitiveRelation(name, schemas[name], tuples))
    return Universe(tuple(sensitive), tuple(sorted(context.items())))


@dataclass(frozen=True)
class BruteResult:
    value: Fraction
    witness: tuple[dict, dict] | None  # worst adjacent pair, name -> tuple list


def _database_values(tq: TopQuery, universe: Universe, node_schemas: dict) -> dict:
    """Exact query value for every admissible database, keyed by bitmask vector."""
    values: dict[tuple[int, ...], Fraction] = {}
    base = universe.context_db()
    sizes = [len(sr.universe) for sr in universe.sensitive]
    mask_ranges = [
        [m for m in range(1 << n) if m.bit_count() <= sr.capacity()]
        for n, sr in zip(sizes, universe.sensitive)
    ]
    for combo in itertools.product(*mask_ranges):
        db = dict(base)
        for sr, mask in zip(universe.sensitive, combo):
            tuples = frozenset(t for j, t in enumerate(sr.universe) if mask >> j & 1)
            db[sr.name] = Relation(sr.schema, tuples)
        values[combo] = answer(tq, db, node_schemas)
    return values


def _adjacent(combo: tuple[int, ...], universe: Universe):
    """All databases one step away: toggle at most one tuple per relation."""
    per_rel = []
    for sr, mask in zip(universe.sensitive, combo):
        options = [mask] + [mask ^ (1 << j) for j in range(len(sr.universe))]
        per_rel.append(options)
    for neighbor in itertools.product(*per_rel):
        if neighbor != combo:
            yield neighbor


def _witness(universe: Universe, combo: tuple[int, ...]) -> dict:
    out = {}
    for sr, mask in zip(universe.sensitive, combo):
        out[sr.name] = [t for j, t in enumerate(sr.universe) if mask >> j & 1]
    return out


def brute_sensitivity(
    tq: TopQuery, universe: Universe, node_schemas: dict | None = None
) -> BruteResult:
    """Worst |answer difference| over adjacent databases, by full enumeration."""
    if node_schemas is None:
        node_schemas = validate(tq, universe.schemas())
    values = _database_values(tq, universe, node_schemas)
    best = Fraction(0)
    witness = None
    for combo, value in values.items():
        for neighbor in _adjacent(combo, universe):
            other = values.get(neighbor)
            if other is None:
                continue  # neighbor over-filled a size-capped relation
            diff = abs(value - other)
            if diff > best:
                best = diff
                witness = (_witness(universe, combo), _witness(universe, neighbor))
    return BruteResult(best, witness)


def _pair_distance(a: tuple[int, ...], b: tuple[int, ...]) -> int:
    """Database distance: the largest per-relation symmetric difference."""
    return max((x ^ y).bit_count() for x, y in zip(a, b))


def brute_sensitivity_ratio(
    tq: TopQuery, universe: Universe, node_schemas: dict | None = None
) -> Fraction:
    """sup over all database pairs of |answer difference| / distance.

    Equals brute_sensitivity when the adjacency steps generate the distance —
    checked as a property test. Quadratic in the database count.
    """
    if node_schemas is None:
        node_schemas = validate(tq, universe.schemas())
    values = _database_values(tq, universe, node_schemas)
    combos = list(values)
    best = Fraction(0)
    for i, a in enumerate(combos):
        va = values[a]
        for b in combos[i + 1 :]:
            d = _pair_distance(a, b)
            if d == 0:
                continue
            ratio = abs(va - values[b]) / d
            if ratio > best:
                best = ratio
    return best


def brute_lipschitz(
    plan: Plan, universe: Universe, node_schemas: dict | None = None
) -> Fraction:
    """sup over database pairs of (output symmetric difference) / distance."""
    if node_schemas is None:
        node_schemas = validate_plan(plan, universe.schemas())
    outputs: dict[tuple[int, ...], frozenset] = {}
    base = universe.context_db()
    mask_ranges = [
        [m for m in range(1 << len(sr.universe)) if m.bit_count() <= sr.capacity()]
        for sr in universe.sensitive
    ]
    for combo in itertools.product(*mask_ranges):
        db = dict(base)
        for sr, mask in zip(universe.sensitive, combo):
            tuples = frozenset(t for j, t in enumerate(sr.universe) if mask >> j & 1)
            db[sr.name] = Relation(sr.schema, tuples)
        outputs[combo] = eval_plan(plan, db, node_schemas).tuples
    combos = list(outputs)
    best = Fraction(0)
    for i, a in enumerate(combos):
        oa = outputs[a]
        for b in combos[i + 1 :]:
            d = _pair_distance(a, b)
            if d == 0:
                continue
            ratio = Fraction(len(oa ^ outputs[b]), d)
            if ratio > best:
                best = ratio
    return best
