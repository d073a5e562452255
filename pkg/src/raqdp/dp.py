"""Laplace mechanism calibrated by the static sensitivity bound.

Noise is drawn through the inverse CDF: for u uniform on (0, 1),

    z = -b * sign(u - 1/2) * ln(1 - 2|u - 1/2|)

has the Laplace density (1/(2b)) * exp(-|z|/b). Sampling uses numpy's
seedable PCG64 generator so every run is reproducible from its seed. This is
a floating-point mechanism - not hardened against bit-level leakage; the
answer record carries that note verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analyzer import AnalysisOptions, SensitivityReport, global_sensitivity
from .constraints import ConstrainedSchema
from .engine import Relation, answer
from .errors import UnboundedSensitivityError
from .extmath import Ext, ext_float, is_infinite
from .query import TopQuery, validate

RNG_NAME = "pcg64"
MECHANISM_NOTE = "floating-point mechanism - not hardened"


@dataclass(frozen=True)
class DpParams:
    epsilon: Fraction
    seed: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class DpAnswer:
    noisy_value: float
    gs_used: Ext
    epsilon: Fraction
    seed: int
    rng_name: str = RNG_NAME
    note: str = MECHANISM_NOTE
    true_value_withheld: bool = True
    warnings: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "noisy_value": self.noisy_value,
            "true_value_withheld": self.true_value_withheld,
            "gs_used": ext_float(self.gs_used),
            "epsilon": float(self.epsilon),
            "seed": self.seed,
            "rng": self.rng_name,
            "note": self.note,
            "warnings": list(self.warnings),
        }


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def laplace_sample(rng: np.random.Generator, scale: float) -> float:
    """One Laplace(0, scale) draw via the inverse CDF."""
    u = rng.random()
    while u == 0.0:  # keep u in the open interval (0, 1)
        u = rng.random()
    half = u - 0.5
    # log1p keeps precision when u is near 1/2 (1 - 2|half| near 1)
    return -scale * math.copysign(1.0, half) * math.log1p(-2.0 * abs(half))


def laplace_samples(rng: np.random.Generator, scale: float, n: int) -> np.ndarray:
    """n independent Laplace(0, scale) draws from one stream."""
    u = rng.random(n)
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    half = u - 0.5
    return -scale * np.sign(half) * np.log1p(-2.0 * np.abs(half))


def laplace_cdf(x, scale: float):
    """Analytic CDF of Laplace(0, scale), for distribution tests."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, 0.5 * np.exp(x / scale), 1 - 0.5 * np.exp(-x / scale))


def dp_answer(
    tq: TopQuery,
    schemas: dict[str, ConstrainedSchema],
    db: dict[str, Relation],
    params: DpParams,
    *,
    options: AnalysisOptions | None = None,
    report: SensitivityReport | None = None,
) -> DpAnswer:
    """Evaluate the query exactly, then release it with calibrated noise."""
    options = options or AnalysisOptions()
    if report is None:
        report = global_sensitivity(tq, schemas, options)
    if is_infinite(report.gs):
        raise UnboundedSensitivityError(
            "unbounded sensitivity: refusing to release a noisy answer"
        )
    node_schemas = validate(tq, schemas, enum_cap=options.enum_cap, dnf_cap=options.dnf_cap)
    true_value = answer(
        tq, db, node_schemas, enum_cap=options.enum_cap, dnf_cap=options.dnf_cap
    )
    warnings = list(report.warnings)
    if report.gs == 0:
        warnings.append(
            "sensitivity is zero; the exact answer is released without noise"
        )
        noisy = float(true_value)
    else:
        scale = ext_float(report.gs) / float(params.epsilon)
        noisy = float(true_value) + laplace_sample(make_rng(params.seed), scale)
    return DpAnswer(
        noisy_value=noisy,
        gs_used=report.gs,
        epsilon=params.epsilon,
        seed=params.seed,
        warnings=tuple(warnings),
    )


def sample_answers(
    tq: TopQuery,
    schemas: dict[str, ConstrainedSchema],
    db: dict[str, Relation],
    params: DpParams,
    n: int,
    *,
    options: AnalysisOptions | None = None,
) -> np.ndarray:
    """n noisy releases from one seeded stream, for distribution checks."""
    options = options or AnalysisOptions()
    report = global_sensitivity(tq, schemas, options)
    if is_infinite(report.gs):
        raise UnboundedSensitivityError(
            "unbounded sensitivity: refusing to release a noisy answer"
        )
    node_schemas = validate(tq, schemas, enum_cap=options.enum_cap, dnf_cap=options.dnf_cap)
    true_value = answer(
        tq, db, node_schemas, enum_cap=options.enum_cap, dnf_cap=options.dnf_cap
    )
    if report.gs == 0:
        return np.full(n, float(true_value))
    scale = ext_float(report.gs) / float(params.epsilon)
    return float(true_value) + laplace_samples(make_rng(params.seed), scale, n)
