"""Constrained schemas: attribute domains plus a logical constraint over them.

The constraint language is boolean structure (and/or/not/iff) over linear
comparison atoms and finite-set membership atoms. Everything downstream —
attribute bounds, satisfiability, solution counting, diameter — works on
exact rationals. Bounds for interval domains come from a hull-consistency
narrowing fixpoint applied per disjunctive branch; fully enumerable domains
take an exact enumeration path instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterator, Union

from .errors import SchemaError
from .extmath import Ext, INF, NEG_INF, format_ext, is_infinite

DEFAULT_ENUM_CAP = 1_000_000
DEFAULT_DNF_CAP = 64

# Exact-bounds enumeration is only attempted below this many grid points;
# larger finite grids fall back to the (sound) interval path.
_EXACT_BOUNDS_BUDGET = 4096
_NARROW_MAX_PASSES = 32
_WITNESS_CANDIDATE_CAP = 256


# ---------------------------------------------------------------------------
# Domains


class DomainKind(Enum):
    INT_RANGE = "int-range"
    REAL_RANGE = "real-range"
    NUM_SET = "num-set"
    STR_SET = "str-set"


@dataclass(frozen=True)
class Domain:
    """An attribute's value domain.

    Integer ranges have finite integer endpoints; real ranges may be
    unbounded on either side; finite sets are non-empty and homogeneous.
    """

    kind: DomainKind
    lower: Ext = NEG_INF
    upper: Ext = INF
    members: tuple = ()

    def __post_init__(self):
        if self.kind is DomainKind.INT_RANGE:
            if is_infinite(self.lower) or is_infinite(self.upper):
                raise SchemaError("integer ranges need finite endpoints")
            if self.lower.denominator != 1 or self.upper.denominator != 1:
                raise SchemaError("integer range endpoints must be integers")
        if self.kind in (DomainKind.INT_RANGE, DomainKind.REAL_RANGE):
            if self.lower > self.upper:
                raise SchemaError(f"empty range [{self.lower}, {self.upper}]")
        if self.kind in (DomainKind.NUM_SET, DomainKind.STR_SET):
            if not self.members:
                raise SchemaError("finite enumeration domains must be non-empty")

    @classmethod
    def int_range(cls, lower, upper) -> Domain:
        return cls(DomainKind.INT_RANGE, Fraction(lower), Fraction(upper))

    @classmethod
    def real_range(cls, lower=NEG_INF, upper=INF) -> Domain:
        lo = lower if is_infinite(lower) else Fraction(lower)
        hi = upper if is_infinite(upper) else Fraction(upper)
        return cls(DomainKind.REAL_RANGE, lo, hi)

    @classmethod
    def num_set(cls, values) -> Domain:
        members = tuple(sorted({Fraction(v) for v in values}))
        return cls(DomainKind.NUM_SET, members=members)

    @classmethod
    def str_set(cls, values) -> Domain:
        values = set(values)
        if not all(isinstance(v, str) for v in values):
            raise SchemaError("string enumerations may only contain strings")
        return cls(DomainKind.STR_SET, members=tuple(sorted(values)))

    @property
    def is_numeric(self) -> bool:
        return self.kind is not DomainKind.STR_SET

    def interval(self) -> tuple[Ext, Ext]:
        if self.kind is DomainKind.STR_SET:
            raise SchemaError("string domains have no numeric interval")
        if self.kind is DomainKind.NUM_SET:
            return self.members[0], self.members[-1]
        return self.lower, self.upper

    def contains(self, value) -> bool:
        if self.kind is DomainKind.STR_SET:
            return isinstance(value, str) and value in self.members
        if isinstance(value, str):
            return False
        v = Fraction(value)
        if self.kind is DomainKind.NUM_SET:
            return v in self.members
        if self.kind is DomainKind.INT_RANGE and v.denominator != 1:
            return False
        return self.lower <= v <= self.upper


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Attr:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Union[Fraction, str]


@dataclass(frozen=True)
class Arith:
    op: str  # '+', '-', '*'
    left: "Term"
    right: "Term"


Term = Union[Attr, Lit, Arith]


def eval_term(term: Term, asg: dict):
    if isinstance(term, Lit):
        return term.value
    if isinstance(term, Attr):
        return asg[term.name]
    left = eval_term(term.left, asg)
    right = eval_term(term.right, asg)
    if isinstance(left, str) or isinstance(right, str):
        raise SchemaError("arithmetic over string values")
    if term.op == "+":
        return left + right
    if term.op == "-":
        return left - right
    return left * right


def linear_form(term: Term) -> tuple[dict[str, Fraction], Fraction] | None:
    """Decompose into (coefficients, constant); None for string or nonlinear terms."""
    if isinstance(term, Lit):
        if isinstance(term.value, str):
            return None
        return {}, term.value
    if isinstance(term, Attr):
        return {term.name: Fraction(1)}, Fraction(0)
    lf_l = linear_form(term.left)
    lf_r = linear_form(term.right)
    if lf_l is None or lf_r is None:
        return None
    cl, kl = lf_l
    cr, kr = lf_r
    if term.op in ("+", "-"):
        sign = 1 if term.op == "+" else -1
        coeffs = dict(cl)
        for a, c in cr.items():
            coeffs[a] = coeffs.get(a, Fraction(0)) + sign * c
        return {a: c for a, c in coeffs.items() if c != 0}, kl + sign * kr
    # multiplication: at least one side must be constant
    if not cl:
        return {a: kl * c for a, c in cr.items() if kl * c != 0}, kl * kr
    if not cr:
        return {a: kr * c for a, c in cl.items() if kr * c != 0}, kl * kr
    return None


def term_attrs(term: Term) -> set[str]:
    if isinstance(term, Attr):
        return {term.name}
    if isinstance(term, Arith):
        return term_attrs(term.left) | term_attrs(term.right)
    return set()


# ---------------------------------------------------------------------------
# Constraints


@dataclass(frozen=True)
class BoolConst:
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class Cmp:
    op: str  # '<=', '>=', '<', '>', '=', '!='
    left: Term
    right: Term


@dataclass(frozen=True)
class InSet:
    term: Term
    values: frozenset
    negated: bool = False


@dataclass(frozen=True)
class Not:
    arg: "Constraint"


@dataclass(frozen=True)
class And:
    items: tuple["Constraint", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Constraint", ...]


@dataclass(frozen=True)
class Iff:
    left: "Constraint"
    right: "Constraint"


Constraint = Union[BoolConst, Cmp, InSet, Not, And, Or, Iff]

_CMP_COMPLEMENT = {"<=": ">", ">=": "<", "<": ">=", ">": "<=", "=": "!=", "!=": "="}


def make_and(items) -> Constraint:
    flat: list[Constraint] = []
    for c in items:
        if c == TRUE:
            continue
        if c == FALSE:
            return FALSE
        if isinstance(c, And):
            flat.extend(c.items)
        else:
            flat.append(c)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def make_or(items) -> Constraint:
    flat: list[Constraint] = []
    for c in items:
        if c == FALSE:
            continue
        if c == TRUE:
            return TRUE
        if isinstance(c, Or):
            flat.extend(c.items)
        else:
            flat.append(c)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def conjoin(a: Constraint, b: Constraint) -> Constraint:
    return make_and([a, b])


def disjoin(a: Constraint, b: Constraint) -> Constraint:
    return make_or([a, b])


def normalize(c: Constraint) -> Constraint:
    """Rewrite to negation normal form: iff expanded, not pushed onto atoms."""
    if isinstance(c, (BoolConst, Cmp, InSet)):
        return c
    if isinstance(c, Not):
        return _negate_nnf(c.arg)
    if isinstance(c, And):
        return make_and([normalize(x) for x in c.items])
    if isinstance(c, Or):
        return make_or([normalize(x) for x in c.items])
    if isinstance(c, Iff):
        a, b = c.left, c.right
        return normalize(make_or([make_and([a, b]), make_and([Not(a), Not(b)])]))
    raise TypeError(f"not a constraint: {c!r}")


def _negate_nnf(c: Constraint) -> Constraint:
    if isinstance(c, BoolConst):
        return FALSE if c.value else TRUE
    if isinstance(c, Cmp):
        return Cmp(_CMP_COMPLEMENT[c.op], c.left, c.right)
    if isinstance(c, InSet):
        return InSet(c.term, c.values, not c.negated)
    if isinstance(c, Not):
        return normalize(c.arg)
    if isinstance(c, And):
        return make_or([_negate_nnf(x) for x in c.items])
    if isinstance(c, Or):
        return make_and([_negate_nnf(x) for x in c.items])
    if isinstance(c, Iff):
        # not (a iff b)  ==  a iff not b
        return normalize(Iff(c.left, Not(c.right)))
    raise TypeError(f"not a constraint: {c!r}")


def evaluate(c: Constraint, asg: dict) -> bool:
    if isinstance(c, BoolConst):
        return c.value
    if isinstance(c, Cmp):
        left = eval_term(c.left, asg)
        right = eval_term(c.right, asg)
        if isinstance(left, str) or isinstance(right, str):
            if c.op == "=":
                return left == right
            if c.op == "!=":
                return left != right
            raise SchemaError(f"ordered comparison {c.op} over strings")
        return {
            "<=": left <= right,
            ">=": left >= right,
            "<": left < right,
            ">": left > right,
            "=": left == right,
            "!=": left != right,
        }[c.op]
    if isinstance(c, InSet):
        return (eval_term(c.term, asg) in c.values) != c.negated
    if isinstance(c, Not):
        return not evaluate(c.arg, asg)
    if isinstance(c, And):
        return all(evaluate(x, asg) for x in c.items)
    if isinstance(c, Or):
        return any(evaluate(x, asg) for x in c.items)
    if isinstance(c, Iff):
        return evaluate(c.left, asg) == evaluate(c.right, asg)
    raise TypeError(f"not a constraint: {c!r}")


def constraint_attrs(c: Constraint) -> set[str]:
    if isinstance(c, BoolConst):
        return set()
    if isinstance(c, Cmp):
        return term_attrs(c.left) | term_attrs(c.right)
    if isinstance(c, InSet):
        return term_attrs(c.term)
    if isinstance(c, Not):
        return constraint_attrs(c.arg)
    if isinstance(c, (And, Or)):
        return set().union(*(constraint_attrs(x) for x in c.items)) if c.items else set()
    if isinstance(c, Iff):
        return constraint_attrs(c.left) | constraint_attrs(c.right)
    raise TypeError(f"not a constraint: {c!r}")


def rename_attrs(c: Constraint, mapping: dict[str, str]) -> Constraint:
    def rt(t: Term) -> Term:
        if isinstance(t, Attr):
            return Attr(mapping.get(t.name, t.name))
        if isinstance(t, Arith):
            return Arith(t.op, rt(t.left), rt(t.right))
        return t

    if isinstance(c, BoolConst):
        return c
    if isinstance(c, Cmp):
        return Cmp(c.op, rt(c.left), rt(c.right))
    if isinstance(c, InSet):
        return InSet(rt(c.term), c.values, c.negated)
    if isinstance(c, Not):
        return Not(rename_attrs(c.arg, mapping))
    if isinstance(c, And):
        return And(tuple(rename_attrs(x, mapping) for x in c.items))
    if isinstance(c, Or):
        return Or(tuple(rename_attrs(x, mapping) for x in c.items))
    if isinstance(c, Iff):
        return Iff(rename_attrs(c.left, mapping), rename_attrs(c.right, mapping))
    raise TypeError(f"not a constraint: {c!r}")


def term_type(t: Term, domains: dict[str, Domain]) -> str:
    """'num' or 'str'; raises on unknown attributes and string arithmetic."""
    if isinstance(t, Lit):
        return "str" if isinstance(t.value, str) else "num"
    if isinstance(t, Attr):
        if t.name not in domains:
            raise SchemaError(f"unknown attribute {t.name!r}")
        return "num" if domains[t.name].is_numeric else "str"
    if term_type(t.left, domains) != "num" or term_type(t.right, domains) != "num":
        raise SchemaError("arithmetic requires numeric operands")
    return "num"


def check_types(c: Constraint, domains: dict[str, Domain]) -> None:
    """Validate attribute references and type discipline of a constraint."""
    if isinstance(c, BoolConst):
        return
    if isinstance(c, Cmp):
        lt = term_type(c.left, domains)
        rt = term_type(c.right, domains)
        if c.op in ("<", ">", "<=", ">="):
            if lt != "num" or rt != "num":
                raise SchemaError(f"ordered comparison {c.op} requires numeric operands")
        elif lt != rt:
            raise SchemaError("equality between a number and a string")
        return
    if isinstance(c, InSet):
        tt = term_type(c.term, domains)
        kinds = {("str" if isinstance(v, str) else "num") for v in c.values}
        if len(kinds) > 1:
            raise SchemaError("membership sets must be all-numeric or all-string")
        if kinds and kinds != {tt}:
            raise SchemaError("membership set type does not match the tested term")
        return
    if isinstance(c, Not):
        check_types(c.arg, domains)
        return
    if isinstance(c, (And, Or)):
        for x in c.items:
            check_types(x, domains)
        return
    if isinstance(c, Iff):
        check_types(c.left, domains)
        check_types(c.right, domains)
        return
    raise TypeError(f"not a constraint: {c!r}")


# ---------------------------------------------------------------------------
# Text rendering (matches the input grammar; see parsing.py)


def format_value(v) -> str:
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return format_ext(v)


def format_term(t: Term) -> str:
    if isinstance(t, Lit):
        return format_value(t.value)
    if isinstance(t, Attr):
        return t.name
    left = format_term(t.left)
    right = format_term(t.right)
    if isinstance(t.left, Arith) and t.op == "*" and t.left.op in ("+", "-"):
        left = f"({left})"
    if isinstance(t.right, Arith) and (t.op in ("-", "*") or t.right.op in ("+", "-")):
        right = f"({right})"
    return f"{left} {t.op} {right}"


def _fmt_values(values: frozenset) -> str:
    ordered = sorted(values, key=lambda v: (isinstance(v, str), v))
    return "{" + ", ".join(format_value(v) for v in ordered) + "}"


def format_constraint(c: Constraint) -> str:
    def wrap(child: Constraint, strength: int) -> str:
        # strength: 3 = need atom-level, 2 = inside and, 1 = inside or
        text = format_constraint(child)
        rank = {Iff: 0, Or: 1, And: 2}.get(type(child), 3)
        return f"({text})" if rank < strength else text

    if isinstance(c, BoolConst):
        return "true" if c.value else "false"
    if isinstance(c, Cmp):
        if c.op == "!=":
            return f"not ({format_term(c.left)} = {format_term(c.right)})"
        return f"{format_term(c.left)} {c.op} {format_term(c.right)}"
    if isinstance(c, InSet):
        base = f"{format_term(c.term)} in {_fmt_values(c.values)}"
        return f"not ({base})" if c.negated else base
    if isinstance(c, Not):
        return f"not {wrap(c.arg, 3)}"
    if isinstance(c, And):
        return " and ".join(wrap(x, 2) for x in c.items)
    if isinstance(c, Or):
        return " or ".join(wrap(x, 1) for x in c.items)
    if isinstance(c, Iff):
        return f"{wrap(c.left, 1)} iff {wrap(c.right, 1)}"
    raise TypeError(f"not a constraint: {c!r}")


# ---------------------------------------------------------------------------
# Schemas


@dataclass(frozen=True)
class ConstrainedSchema:
    """Named, ordered attributes with domains, plus a constraint.

    `aux` holds attributes that were projected or aggregated away: the
    constraint may still mention them (they are existentially quantified),
    but they are not part of the relation's visible tuples.
    """

    name: str
    attributes: tuple[tuple[str, Domain], ...]
    constraint: Constraint = TRUE
    aux: tuple[tuple[str, Domain], ...] = ()

    def __post_init__(self):
        names = [a for a, _ in self.attributes] + [a for a, _ in self.aux]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names in schema {self.name!r}")
        if not self.attributes:
            raise SchemaError(f"schema {self.name!r} has no attributes")
        loose = constraint_attrs(self.constraint) - set(names)
        if loose:
            raise SchemaError(
                f"constraint of {self.name!r} mentions unknown attributes {sorted(loose)}"
            )

    def attr_names(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.attributes)

    def all_domains(self) -> dict[str, Domain]:
        out = {a: d for a, d in self.attributes}
        out.update({a: d for a, d in self.aux})
        return out

    def domain(self, name: str) -> Domain:
        for a, d in itertools.chain(self.attributes, self.aux):
            if a == name:
                return d
        raise SchemaError(f"schema {self.name!r} has no attribute {name!r}")

    def index(self, name: str) -> int:
        for i, (a, _) in enumerate(self.attributes):
            if a == name:
                return i
        raise SchemaError(f"schema {self.name!r} has no visible attribute {name!r}")


def initial_constraint(schema: ConstrainedSchema) -> Constraint:
    """Domain membership atoms conjoined with the schema's check constraint."""
    atoms: list[Constraint] = []
    for a, dom in schema.attributes:
        if dom.kind in (DomainKind.NUM_SET, DomainKind.STR_SET):
            atoms.append(InSet(Attr(a), frozenset(dom.members)))
        else:
            if not is_infinite(dom.lower):
                atoms.append(Cmp(">=", Attr(a), Lit(dom.lower)))
            if not is_infinite(dom.upper):
                atoms.append(Cmp("<=", Attr(a), Lit(dom.upper)))
    atoms.append(schema.constraint)
    return make_and(atoms)


# ---------------------------------------------------------------------------
# Bounds


@dataclass(frozen=True)
class Bounds:
    """A (possibly open, possibly infinite, possibly empty) numeric interval."""

    lower: Ext = NEG_INF
    upper: Ext = INF
    lower_open: bool = False
    upper_open: bool = False
    empty: bool = False

    @classmethod
    def make_empty(cls) -> Bounds:
        return cls(empty=True)

    @classmethod
    def closed(cls, lower, upper) -> Bounds:
        return cls(Fraction(lower), Fraction(upper))


# ---------------------------------------------------------------------------
# Interval narrowing


class _Box:
    """Per-attribute intervals (numeric) and allowed-value sets (string)."""

    __slots__ = ("nums", "strs", "numset_members", "int_attrs")

    def __init__(self, schema: ConstrainedSchema):
        self.nums: dict[str, list] = {}
        self.strs: dict[str, set] = {}
        self.numset_members: dict[str, tuple] = {}
        self.int_attrs: set[str] = set()
        for a, dom in schema.all_domains().items():
            if dom.kind is DomainKind.STR_SET:
                self.strs[a] = set(dom.members)
            else:
                lo, hi = dom.interval()
                self.nums[a] = [lo, hi, False, False]
                if dom.kind is DomainKind.NUM_SET:
                    self.numset_members[a] = dom.members
                elif dom.kind is DomainKind.INT_RANGE:
                    self.int_attrs.add(a)

    def copy(self) -> "_Box":
        out = object.__new__(_Box)
        out.nums = {a: list(v) for a, v in self.nums.items()}
        out.strs = {a: set(v) for a, v in self.strs.items()}
        out.numset_members = self.numset_members
        out.int_attrs = self.int_attrs
        return out

    def is_empty(self) -> bool:
        for lo, hi, lo_open, hi_open in self.nums.values():
            if lo > hi or (lo == hi and (lo_open or hi_open)):
                return True
        return any(not s for s in self.strs.values())

    def tighten_upper(self, attr: str, value: Ext, strict: bool) -> bool:
        st = self.nums[attr]
        if value < st[1] or (value == st[1] and strict and not st[3]):
            st[1], st[3] = value, strict
            return True
        return False

    def tighten_lower(self, attr: str, value: Ext, strict: bool) -> bool:
        st = self.nums[attr]
        if value > st[0] or (value == st[0] and strict and not st[2]):
            st[0], st[2] = value, strict
            return True
        return False

    def integer_tighten(self) -> bool:
        changed = False
        for a in self.int_attrs:
            st = self.nums[a]
            lo, hi = st[0], st[1]
            if not is_infinite(lo):
                new_lo = Fraction(math.floor(lo)) + 1 if (st[2] and lo.denominator == 1) else Fraction(math.ceil(lo))
                if new_lo != lo or st[2]:
                    st[0], st[2] = new_lo, False
                    changed = changed or new_lo != lo
            if not is_infinite(hi):
                new_hi = Fraction(math.ceil(hi)) - 1 if (st[3] and hi.denominator == 1) else Fraction(math.floor(hi))
                if new_hi != hi or st[3]:
                    st[1], st[3] = new_hi, False
                    changed = changed or new_hi != hi
        for a, members in self.numset_members.items():
            st = self.nums[a]
            kept = [
                v
                for v in members
                if (v > st[0] or (v == st[0] and not st[2]))
                and (v < st[1] or (v == st[1] and not st[3]))
            ]
            if not kept:
                st[0], st[1] = Fraction(1), Fraction(0)  # mark empty
                changed = True
            else:
                if kept[0] != st[0] or kept[-1] != st[1] or st[2] or st[3]:
                    changed = changed or kept[0] != st[0] or kept[-1] != st[1]
                    st[0], st[1], st[2], st[3] = kept[0], kept[-1], False, False
        return changed

    def interval_of(self, attr: str) -> tuple[Ext, Ext, bool, bool]:
        lo, hi, lo_open, hi_open = self.nums[attr]
        return lo, hi, lo_open, hi_open

    def intersect(self, other: "_Box") -> None:
        for a, st in self.nums.items():
            o = other.nums[a]
            self.tighten_lower(a, o[0], o[2])
            self.tighten_upper(a, o[1], o[3])
        for a in self.strs:
            self.strs[a] &= other.strs[a]


def _sum_extreme(coeffs: dict[str, Fraction], box: _Box, skip: str, minimum: bool) -> tuple[Ext, bool] | None:
    """Min (or max) of sum(c_j * x_j) over the box, skipping one variable.

    Returns (value, any_open_endpoint_used) or None when unbounded.
    """
    total: Ext = Fraction(0)
    used_open = False
    for a, c in coeffs.items():
        if a == skip:
            continue
        lo, hi, lo_open, hi_open = box.interval_of(a)
        want_low = (c > 0) == minimum
        end, is_open = (lo, lo_open) if want_low else (hi, hi_open)
        if is_infinite(end):
            return None
        total = total + c * end
        used_open = used_open or is_open
    return total, used_open


def _apply_linear_le(box: _Box, coeffs: dict[str, Fraction], bound: Fraction, strict: bool) -> bool | None:
    """Narrow the box with sum(c_i * x_i) <= bound (< if strict).

    Returns whether anything changed, or None when the atom is contradictory
    on a variable-free form.
    """
    if not coeffs:
        ok = Fraction(0) < bound if strict else Fraction(0) <= bound
        return None if not ok else False
    changed = False
    for a, c in coeffs.items():
        rest = _sum_extreme(coeffs, box, skip=a, minimum=True)
        if rest is None:
            continue
        rest_min, rest_open = rest
        limit = (bound - rest_min) / c
        derived_strict = strict or rest_open
        if c > 0:
            changed = box.tighten_upper(a, limit, derived_strict) or changed
        else:
            changed = box.tighten_lower(a, limit, derived_strict) or changed
    return changed


def _apply_atom(box: _Box, atom: Constraint) -> bool | None:
    """Narrow with one atom; None signals a proven-empty box."""
    if isinstance(atom, BoolConst):
        return None if not atom.value else False
    if isinstance(atom, Cmp):
        return _apply_cmp(box, atom)
    if isinstance(atom, InSet):
        return _apply_inset(box, atom)
    raise TypeError(f"not an atom: {atom!r}")


def _apply_cmp(box: _Box, atom: Cmp) -> bool | None:
    lf_l = linear_form(atom.left)
    lf_r = linear_form(atom.right)
    if lf_l is not None and lf_r is not None:
        coeffs = dict(lf_l[0])
        for a, c in lf_r[0].items():
            coeffs[a] = coeffs.get(a, Fraction(0)) - c
        coeffs = {a: c for a, c in coeffs.items() if c != 0}
        k = lf_r[1] - lf_l[1]  # sum(coeffs * x) OP k
        op = atom.op
        if op in ("<=", "<"):
            return _apply_linear_le(box, coeffs, k, op == "<")
        if op in (">=", ">"):
            neg = {a: -c for a, c in coeffs.items()}
            return _apply_linear_le(box, neg, -k, op == ">")
        if op == "=":
            r1 = _apply_linear_le(box, coeffs, k, False)
            if r1 is None:
                return None
            neg = {a: -c for a, c in coeffs.items()}
            r2 = _apply_linear_le(box, neg, -k, False)
            if r2 is None:
                return None
            return r1 or r2
        return False  # '!=' does not narrow intervals
    # string-typed or nonlinear comparisons
    return _apply_string_cmp(box, atom)


def _apply_string_cmp(box: _Box, atom: Cmp) -> bool | None:
    left, right = atom.left, atom.right
    if atom.op not in ("=", "!="):
        return False
    if isinstance(left, Lit) and isinstance(right, Attr):
        left, right = right, left
    if isinstance(left, Attr) and left.name in box.strs and isinstance(right, Lit):
        allowed = box.strs[left.name]
        if atom.op == "=":
            if right.value in allowed:
                if len(allowed) != 1:
                    box.strs[left.name] = {right.value}
                    return True
                return False
            box.strs[left.name] = set()
            return True
        if right.value in allowed:
            allowed.discard(right.value)
            return True
        return False
    if (
        isinstance(left, Attr)
        and isinstance(right, Attr)
        and left.name in box.strs
        and right.name in box.strs
        and atom.op == "="
    ):
        common = box.strs[left.name] & box.strs[right.name]
        changed = common != box.strs[left.name] or common != box.strs[right.name]
        box.strs[left.name] = set(common)
        box.strs[right.name] = set(common)
        return changed
    return False


def _apply_inset(box: _Box, atom: InSet) -> bool | None:
    term = atom.term
    if isinstance(term, Attr) and term.name in box.strs:
        allowed = box.strs[term.name]
        values = {v for v in atom.values if isinstance(v, str)}
        new = (allowed - values) if atom.negated else (allowed & values)
        if new != allowed:
            box.strs[term.name] = new
            return True
        return False
    if atom.negated:
        return False
    lf = linear_form(term)
    if lf is None or len(lf[0]) != 1:
        if lf is not None and not lf[0]:
            return None if lf[1] not in atom.values else False
        return False
    (a, c), = lf[0].items()
    k = lf[1]
    if a not in box.nums:
        return False
    vals = sorted((Fraction(v) - k) / c for v in atom.values if not isinstance(v, str))
    if not vals:
        return None
    lo, hi, lo_open, hi_open = box.interval_of(a)
    inside = [
        v
        for v in vals
        if (v > lo or (v == lo and not lo_open)) and (v < hi or (v == hi and not hi_open))
    ]
    if not inside:
        box.nums[a][0], box.nums[a][1] = Fraction(1), Fraction(0)
        return True
    changed = box.tighten_lower(a, inside[0], False)
    changed = box.tighten_upper(a, inside[-1], False) or changed
    return changed


def narrow(atoms, schema: ConstrainedSchema, seed: _Box | None = None) -> _Box | None:
    """Hull-consistency fixpoint over a conjunction of atoms; None if empty."""
    box = seed.copy() if seed is not None else _Box(schema)
    box.integer_tighten()
    if box.is_empty():
        return None
    for _ in range(_NARROW_MAX_PASSES):
        changed = False
        for atom in atoms:
            result = _apply_atom(box, atom)
            if result is None:
                return None
            changed = changed or result
        changed = box.integer_tighten() or changed
        if box.is_empty():
            return None
        if not changed:
            break
    return box


# ---------------------------------------------------------------------------
# Disjunctive structure


def dnf_branches(c: Constraint, cap: int = DEFAULT_DNF_CAP) -> list[list[Constraint]] | None:
    """Branches of the disjunctive normal form, or None past the branch cap."""

    def rec(node: Constraint) -> list[list[Constraint]] | None:
        if isinstance(node, BoolConst):
            return [[]] if node.value else []
        if isinstance(node, (Cmp, InSet)):
            return [[node]]
        if isinstance(node, Or):
            out: list[list[Constraint]] = []
            for child in node.items:
                sub = rec(child)
                if sub is None:
                    return None
                out.extend(sub)
                if len(out) > cap:
                    return None
            return out
        if isinstance(node, And):
            acc: list[list[Constraint]] = [[]]
            for child in node.items:
                sub = rec(child)
                if sub is None:
                    return None
                acc = [a + b for a in acc for b in sub]
                if len(acc) > cap:
                    return None
            return acc
        raise TypeError(f"expected negation normal form, found {node!r}")

    return rec(normalize(c))


def _struct_box(c: Constraint, schema: ConstrainedSchema, seed: _Box | None = None) -> _Box | None:
    """Sound per-attribute box for an NNF constraint without full DNF expansion."""
    if isinstance(c, BoolConst):
        if not c.value:
            return None
        return narrow([], schema, seed)
    if isinstance(c, (Cmp, InSet)):
        return narrow([c], schema, seed)
    if isinstance(c, Or):
        joined: _Box | None = None
        for child in c.items:
            sub = _struct_box(child, schema, seed)
            if sub is None:
                continue
            if joined is None:
                joined = sub
            else:
                _join_into(joined, sub)
        return joined
    if isinstance(c, And):
        atoms = [x for x in c.items if isinstance(x, (Cmp, InSet, BoolConst))]
        complexes = [x for x in c.items if not isinstance(x, (Cmp, InSet, BoolConst))]
        box = seed.copy() if seed is not None else _Box(schema)
        for child in complexes:
            sub = _struct_box(child, schema, seed)
            if sub is None:
                return None
            box.intersect(sub)
            if box.is_empty():
                return None
        return narrow(atoms, schema, box)
    raise TypeError(f"expected negation normal form, found {c!r}")


def _join_into(target: _Box, other: _Box) -> None:
    for a, st in target.nums.items():
        o = other.nums[a]
        if o[0] < st[0] or (o[0] == st[0] and not o[2]):
            st[0], st[2] = o[0], (o[2] and st[2]) if o[0] == st[0] else o[2]
        if o[1] > st[1] or (o[1] == st[1] and not o[3]):
            st[1], st[3] = o[1], (o[3] and st[3]) if o[1] == st[1] else o[3]
    for a in target.strs:
        target.strs[a] |= other.strs[a]


# ---------------------------------------------------------------------------
# Finite enumeration


def _pinned_values(c: Constraint, attr: str) -> frozenset | None:
    """A finite superset of the attribute's feasible values, or None."""
    if isinstance(c, BoolConst):
        return frozenset() if not c.value else None
    if isinstance(c, Cmp) and c.op == "=":
        lf_l = linear_form(c.left)
        lf_r = linear_form(c.right)
        if lf_l is None or lf_r is None:
            return None
        coeffs = dict(lf_l[0])
        for a, cc in lf_r[0].items():
            coeffs[a] = coeffs.get(a, Fraction(0)) - cc
        coeffs = {a: cc for a, cc in coeffs.items() if cc != 0}
        if set(coeffs) == {attr}:
            k = lf_r[1] - lf_l[1]
            return frozenset({k / coeffs[attr]})
        return None
    if isinstance(c, InSet) and not c.negated:
        lf = linear_form(c.term)
        if lf is not None and set(lf[0]) == {attr}:
            (_, cc), = lf[0].items()
            return frozenset((Fraction(v) - lf[1]) / cc for v in c.values if not isinstance(v, str))
        return None
    if isinstance(c, And):
        pin: frozenset | None = None
        for child in c.items:
            sub = _pinned_values(child, attr)
            if sub is not None:
                pin = sub if pin is None else (pin & sub)
        return pin
    if isinstance(c, Or):
        out: set = set()
        for child in c.items:
            sub = _pinned_values(child, attr)
            if sub is None:
                return None
            out |= sub
        return frozenset(out)
    return None


def _finite_grid(
    nnf: Constraint, schema: ConstrainedSchema, cap: int
) -> tuple[str, dict[str, list] | None]:
    """Candidate value lists per attribute.

    Returns (status, grid) with status one of 'ok', 'empty', 'infinite',
    'too-big'. The grid covers all solutions; enumeration still filters by
    the constraint.
    """
    box = _struct_box(nnf, schema)
    if box is None:
        return "empty", None
    grid: dict[str, list] = {}
    total = 1
    too_big = False
    infinite = False
    for a, dom in schema.all_domains().items():
        if dom.kind is DomainKind.STR_SET:
            values = sorted(box.strs[a])
        elif dom.kind is DomainKind.NUM_SET:
            lo, hi, lo_open, hi_open = box.interval_of(a)
            values = [
                v
                for v in dom.members
                if (v > lo or (v == lo and not lo_open)) and (v < hi or (v == hi and not hi_open))
            ]
        elif dom.kind is DomainKind.INT_RANGE:
            lo, hi, _, _ = box.interval_of(a)
            lo_i, hi_i = math.ceil(lo), math.floor(hi)
            count = max(0, hi_i - lo_i + 1)
            if count > cap:
                too_big = True
                values = []
            else:
                values = [Fraction(v) for v in range(lo_i, hi_i + 1)]
        else:  # REAL_RANGE
            lo, hi, lo_open, hi_open = box.interval_of(a)
            if lo == hi and not lo_open and not hi_open:
                values = [lo]
            else:
                pinned = _pinned_values(nnf, a)
                if pinned is None:
                    infinite = True
                    values = []
                else:
                    values = sorted(
                        v
                        for v in pinned
                        if dom.contains(v)
                        and (v > lo or (v == lo and not lo_open))
                        and (v < hi or (v == hi and not hi_open))
                    )
        if not infinite and not too_big:
            if not values:
                return "empty", None
            total *= len(values)
            if total > cap:
                too_big = True
        grid[a] = values
    if infinite:
        return "infinite", None
    if too_big:
        return "too-big", None
    return "ok", grid


def _iter_assignments(grid: dict[str, list]) -> Iterator[dict]:
    names = list(grid)
    for combo in itertools.product(*(grid[a] for a in names)):
        yield dict(zip(names, combo))


def iter_solutions(
    c: Constraint, schema: ConstrainedSchema, cap: int = DEFAULT_ENUM_CAP
) -> Iterator[tuple] | None:
    """Iterate distinct visible solution tuples; None when not enumerable."""
    status, grid = _finite_grid(normalize(c), schema, cap)
    if status == "empty":
        return iter(())
    if status != "ok":
        return None
    visible = schema.attr_names()

    def gen() -> Iterator[tuple]:
        seen: set[tuple] = set()
        for asg in _iter_assignments(grid):
            if evaluate(c, asg):
                tup = tuple(asg[a] for a in visible)
                if tup not in seen:
                    seen.add(tup)
                    yield tup

    return gen()


def solution_count(
    c: Constraint, schema: ConstrainedSchema, cap: int = DEFAULT_ENUM_CAP
) -> int | str:
    """Exact count of distinct visible solutions, 'exceeds-cap', or 'infinite'."""
    status, grid = _finite_grid(normalize(c), schema, cap)
    if status == "empty":
        return 0
    if status == "infinite":
        return "infinite"
    if status == "too-big":
        return "exceeds-cap"
    visible = schema.attr_names()
    seen: set[tuple] = set()
    for asg in _iter_assignments(grid):
        if evaluate(c, asg):
            seen.add(tuple(asg[a] for a in visible))
            if len(seen) > cap:
                return "exceeds-cap"
    return len(seen)


def diameter(c: Constraint, schema: ConstrainedSchema, cap: int = DEFAULT_ENUM_CAP) -> Ext:
    """Adjacency-graph diameter over relations on the schema: |solutions|, else +inf."""
    count = solution_count(c, schema, cap)
    if isinstance(count, int):
        return Fraction(count)
    return INF


def attribute_bounds(
    c: Constraint,
    schema: ConstrainedSchema,
    attr: str,
    *,
    enum_cap: int = DEFAULT_ENUM_CAP,
    dnf_cap: int = DEFAULT_DNF_CAP,
) -> Bounds:
    """Sound interval for one numeric attribute over the constraint's solutions.

    Exact (closed) bounds via enumeration on small finite grids; otherwise a
    hull-consistency fixpoint per disjunctive branch, joined across branches.
    """
    dom = schema.domain(attr)
    if not dom.is_numeric:
        raise SchemaError(f"attribute {attr!r} is not numeric")
    nnf = normalize(c)
    status, grid = _finite_grid(nnf, schema, min(enum_cap, _EXACT_BOUNDS_BUDGET))
    if status == "empty":
        return Bounds.make_empty()
    if status == "ok":
        lo = hi = None
        for asg in _iter_assignments(grid):
            if evaluate(c, asg):
                v = asg[attr]
                lo = v if lo is None or v < lo else lo
                hi = v if hi is None or v > hi else hi
        if lo is None:
            return Bounds.make_empty()
        return Bounds(lo, hi)
    branches = dnf_branches(nnf, dnf_cap)
    boxes: list[_Box] = []
    if branches is not None:
        for branch in branches:
            box = narrow(branch, schema)
            if box is not None:
                boxes.append(box)
    else:
        box = _struct_box(nnf, schema)
        if box is not None:
            boxes.append(box)
    if not boxes:
        return Bounds.make_empty()
    lo, hi, lo_open, hi_open = boxes[0].interval_of(attr)
    for box in boxes[1:]:
        l2, h2, lo2, ho2 = box.interval_of(attr)
        if l2 < lo:
            lo, lo_open = l2, lo2
        elif l2 == lo:
            lo_open = lo_open and lo2
        if h2 > hi:
            hi, hi_open = h2, ho2
        elif h2 == hi:
            hi_open = hi_open and ho2
    return Bounds(lo, hi, lo_open, hi_open)


# ---------------------------------------------------------------------------
# Satisfiability


def satisfiable(
    c: Constraint,
    schema: ConstrainedSchema,
    *,
    enum_cap: int = DEFAULT_ENUM_CAP,
    dnf_cap: int = DEFAULT_DNF_CAP,
) -> str:
    """'yes', 'no', or 'unknown'. Definitive on enumerable-within-cap domains."""
    nnf = normalize(c)
    status, grid = _finite_grid(nnf, schema, min(enum_cap, 65536))
    if status == "empty":
        return "no"
    if status == "ok":
        for asg in _iter_assignments(grid):
            if evaluate(c, asg):
                return "yes"
        return "no"
    branches = dnf_branches(nnf, dnf_cap)
    boxes: list[_Box] = []
    if branches is not None:
        for branch in branches:
            box = narrow(branch, schema)
            if box is not None:
                boxes.append(box)
    else:
        box = _struct_box(nnf, schema)
        if box is not None:
            boxes.append(box)
    if not boxes:
        return "no"
    for box in boxes:
        for asg in _witness_candidates(box, schema):
            if evaluate(c, asg):
                return "yes"
    return "unknown"


def _witness_candidates(box: _Box, schema: ConstrainedSchema) -> Iterator[dict]:
    """Deterministic candidate assignments inside a narrowed box."""
    shortlists: list[tuple[str, list]] = []
    for a, dom in schema.all_domains().items():
        if dom.kind is DomainKind.STR_SET:
            allowed = sorted(box.strs[a])
            shortlists.append((a, allowed[:2]))
            continue
        lo, hi, lo_open, hi_open = box.interval_of(a)
        if a in box.numset_members:
            members = [
                v
                for v in box.numset_members[a]
                if (v > lo or (v == lo and not lo_open)) and (v < hi or (v == hi and not hi_open))
            ]
            mid = members[len(members) // 2] if members else None
            cands = [v for v in (members[0] if members else None, mid, members[-1] if members else None) if v is not None]
        elif is_infinite(lo) and is_infinite(hi):
            cands = [Fraction(0), Fraction(1), Fraction(-1)]
        elif is_infinite(lo):
            base = hi if not hi_open else hi - 1
            cands = [base, hi - 1, hi - 10]
        elif is_infinite(hi):
            base = lo if not lo_open else lo + 1
            cands = [base, lo + 1, lo + 10]
        else:
            mid = (lo + hi) / 2
            lo_c = lo if not lo_open else (lo * 3 + hi) / 4
            hi_c = hi if not hi_open else (lo + hi * 3) / 4
            cands = [mid, lo_c, hi_c]
        if dom.kind is DomainKind.INT_RANGE:
            ints: list[Fraction] = []
            for v in cands:
                iv = Fraction(math.floor(v))
                for candidate in (iv, iv + 1):
                    if lo <= candidate <= hi and candidate not in ints:
                        ints.append(candidate)
            cands = ints
        seen: list = []
        for v in cands:
            if v not in seen and dom.contains(v):
                seen.append(v)
        shortlists.append((a, seen))
    if any(not values for _, values in shortlists):
        return
    names = [a for a, _ in shortlists]
    pools = [values for _, values in shortlists]
    for combo in itertools.islice(itertools.product(*pools), _WITNESS_CANDIDATE_CAP):
        yield dict(zip(names, combo))
