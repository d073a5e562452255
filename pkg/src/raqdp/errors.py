"""Exception hierarchy shared across the package."""

from __future__ import annotations


class RaqdpError(Exception):
    """Base class for all package errors."""


class ParseError(RaqdpError):
    """Malformed schema, constraint, or query text."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        loc = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.col = col


class SchemaError(RaqdpError):
    """Invalid domain, attribute, or schema declaration."""


class ValidationError(RaqdpError):
    """Query plan fails static validation against its schemas."""


class DataError(RaqdpError):
    """Input data violates schema typing or constraints."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or []


class EvalError(RaqdpError):
    """Runtime evaluation failure (e.g. cardinality check on a one-sided product)."""


class UnboundedSensitivityError(RaqdpError):
    """The query's global sensitivity is infinite; no noisy answer can be released."""


class OracleError(RaqdpError):
    """Brute-force validation is infeasible (tuple universe too large)."""
