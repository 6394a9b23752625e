"""Small numeric helpers shared by the solver, transforms and oracle."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

SNAP_DENOMINATOR = 10**6
SNAP_TOL = 1e-11


def snap(value: float, tol: float = SNAP_TOL, max_den: int = SNAP_DENOMINATOR) -> float:
    """Replace a float by a nearby simple rational when one is within tol.

    Solver round-off turns 1/2 into 0.49999999999999994; snapping restores
    the value every downstream identity expects.
    """
    if not math.isfinite(value):
        return value
    f = Fraction(value).limit_denominator(max_den)
    fv = float(f)
    if abs(fv - value) <= tol * max(1.0, abs(value)):
        return fv + 0.0
    return value


def snap_array(values, tol: float = SNAP_TOL) -> np.ndarray:
    return np.array([snap(float(v), tol) for v in np.ravel(values)], dtype=float).reshape(np.shape(values))


def exact_sum(values) -> float:
    """Correctly rounded sum of floats, then snapped."""
    total = sum((Fraction(float(v)) for v in values), Fraction(0))
    return snap(float(total))


def parse_number(value) -> float:
    """Accept ints, floats, None (meaning +inf) and 'a/b' rational strings."""
    if value is None:
        return math.inf
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip().replace("−", "-")
        if text in ("inf", "+inf", "Infinity"):
            return math.inf
        return float(Fraction(text))
    raise ValueError(f"not a number: {value!r}")


def fmt(value: float) -> str:
    """12 significant digits, the CSV convention."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    out = f"{value:.12g}"
    return "0" if out == "-0" else out
