"""Exception hierarchy shared by every module."""

from __future__ import annotations


class QuotaEqError(Exception):
    """Base class for all library errors."""


class EmptyBudget(QuotaEqError):
    pass


class UnboundedDemand(QuotaEqError):
    pass


class UnboundedProfit(QuotaEqError):
    pass


class UnsupportedTechnology(QuotaEqError):
    pass


class RegimeExplosion(QuotaEqError):
    pass


class GridExplosion(QuotaEqError):
    pass


class ZeroQuotaRent(QuotaEqError):
    pass


class ParameterOutOfRange(QuotaEqError):
    pass


class NoEquilibriumAtEmission(QuotaEqError):
    pass


class DimensionMismatch(QuotaEqError, ValueError):
    pass


class NotAnEquilibrium(QuotaEqError):
    """A transform was handed a candidate that does not certify."""


class ParseError(QuotaEqError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ValidationError(QuotaEqError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
