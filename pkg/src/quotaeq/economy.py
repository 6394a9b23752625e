"""Domain model: commodities, consumers, firms and the regulatory scheme.

Everything here is immutable value data. Vectors are stored as tuples and
handed out as read-only numpy arrays, so economies can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.optimize import lsq_linear

from .errors import DimensionMismatch

INF = math.inf
FREE = "free"
NO_DISPOSAL = "none"
GOVERNMENT = "0"

EQ_TOL = 1e-9


def _vec(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# -- commodities and consumption -------------------------------------------


@dataclass(frozen=True)
class CommoditySpace:
    labels: tuple[str, ...]
    regulated: int

    @property
    def ell(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return self.regulated


@dataclass(frozen=True)
class BoxSet:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec(self.lo))
        object.__setattr__(self, "hi", _vec(self.hi))

    @property
    def lo_arr(self) -> np.ndarray:
        return frozen_array(self.lo)

    @property
    def hi_arr(self) -> np.ndarray:
        return frozen_array(self.hi)

    def contains(self, z, tol: float = EQ_TOL) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lo_arr - tol) and np.all(z <= self.hi_arr + tol))


@dataclass(frozen=True)
class Linear:
    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _vec(self.coeffs))

    def value(self, x) -> float:
        return float(np.dot(self.coeffs, x))


@dataclass(frozen=True)
class CobbDouglas:
    exponents: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", _vec(self.exponents))

    def value(self, x) -> float:
        out = 1.0
        for a, xi in zip(self.exponents, x):
            if a > 0:
                out *= max(float(xi), 0.0) ** a
        return out


@dataclass(frozen=True)
class UtilitySpec:
    """Consumption utility plus an optional quadratic penalty on emission.

    The penalty depends only on the economy-wide net emission, so it shifts
    every bundle's utility by the same constant.
    """

    consumption: Union[Linear, CobbDouglas]
    externality_gamma: float | None = None

    @property
    def weights(self) -> tuple[float, ...]:
        if isinstance(self.consumption, Linear):
            return self.consumption.coeffs
        return self.consumption.exponents

    def consumption_value(self, x) -> float:
        return self.consumption.value(x)

    def externality(self, v) -> float:
        if self.externality_gamma is None:
            return 0.0
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return -self.externality_gamma * float(np.dot(v, v)) / 2.0

    def __call__(self, x, v) -> float:
        return self.consumption_value(x) + self.externality(v)


@dataclass(frozen=True)
class Consumer:
    id: str
    box: BoxSet
    endowment: tuple[float, ...]
    shares: Mapping[str, float]
    utility: UtilitySpec

    def __post_init__(self):
        object.__setattr__(self, "endowment", _vec(self.endowment))
        object.__setattr__(self, "shares", {str(k): float(v) for k, v in dict(self.shares).items()})

    @property
    def e(self) -> np.ndarray:
        return frozen_array(self.endowment)

    def share(self, firm_id: str) -> float:
        return self.shares.get(firm_id, 0.0)


# -- technologies ------------------------------------------------------------


def _offset_arr(offset, ell: int) -> np.ndarray:
    if offset is None:
        return np.zeros(ell)
    return np.array(offset, dtype=float)


@dataclass(frozen=True)
class Singleton0:
    """A single production point. The government firm uses the origin; a
    quota shift moves the point to the embedded quota vector."""

    offset: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.offset is not None:
            object.__setattr__(self, "offset", _vec(self.offset))

    def point(self, ell: int) -> np.ndarray:
        return _offset_arr(self.offset, ell)

    def contains(self, y, tol: float = EQ_TOL) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.max(np.abs(y - self.point(len(y))), initial=0.0) <= tol)

    def shifted(self, delta) -> "Singleton0":
        return Singleton0(offset=_vec(self.point(len(delta)) + np.asarray(delta, dtype=float)))


@dataclass(frozen=True)
class LinearActivities:
    """Production set {offset + sum_i r_i a_i : 0 <= r_i <= bound_i}."""

    activities: tuple[tuple[float, ...], ...]
    bounds: tuple[float, ...]
    offset: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "activities", tuple(_vec(a) for a in self.activities))
        object.__setattr__(self, "bounds", _vec(self.bounds))
        if self.offset is not None:
            object.__setattr__(self, "offset", _vec(self.offset))

    def matrix(self, ell: int) -> np.ndarray:
        """Activities as columns, shape (ell, n_activities)."""
        if not self.activities:
            return np.zeros((ell, 0))
        return np.array(self.activities, dtype=float).T

    def output(self, levels, ell: int) -> np.ndarray:
        return _offset_arr(self.offset, ell) + self.matrix(ell) @ np.asarray(levels, dtype=float)

    def contains(self, y, tol: float = EQ_TOL) -> bool:
        y = np.asarray(y, dtype=float)
        target = y - _offset_arr(self.offset, len(y))
        A = self.matrix(len(y))
        if A.shape[1] == 0:
            return bool(np.max(np.abs(target), initial=0.0) <= tol)
        ub = np.array(self.bounds, dtype=float)
        res = lsq_linear(A, target, bounds=(np.zeros(A.shape[1]), ub), tol=1e-14, lsmr_tol="auto")
        return bool(np.max(np.abs(A @ res.x - target), initial=0.0) <= tol)

    def shifted(self, delta) -> "LinearActivities":
        off = _offset_arr(self.offset, len(delta)) + np.asarray(delta, dtype=float)
        return replace(self, offset=_vec(off))


@dataclass(frozen=True)
class ConcaveCurve:
    """One scalar activity r >= 0 with quadratic outputs per commodity.

    Output is g(r) with g_n(r) = c0_n + c1_n r + c2_n r^2. When a slack
    commodity is given, an extra amount a in [0, cap * r] of it may be
    consumed as input, subtracting a from that coordinate.
    """

    coeffs: tuple[tuple[float, float, float], ...]
    slack_commodity: int | None = None
    slack_cap: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_vec(c) for c in self.coeffs))
        object.__setattr__(self, "slack_cap", float(self.slack_cap))

    def coeff_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = np.array(self.coeffs, dtype=float)
        return c[:, 0], c[:, 1], c[:, 2]

    def output(self, r: float, a: float = 0.0) -> np.ndarray:
        c0, c1, c2 = self.coeff_arrays()
        out = c0 + c1 * r + c2 * r * r
        if self.slack_commodity is not None:
            out[self.slack_commodity] -= a
        return out

    def contains(self, y, tol: float = EQ_TOL) -> bool:
        y = np.asarray(y, dtype=float)
        c0, c1, c2 = self.coeff_arrays()
        target = y - c0
        s = self.slack_commodity
        roots: list[float] = [0.0]
        for n in range(len(y)):
            eqs = [(c2[n], c1[n], -target[n])]
            if n == s:
                eqs.append((c2[n], c1[n] - self.slack_cap, -target[n]))
            for qa, qb, qc in eqs:
                if abs(qa) > 0:
                    disc = qb * qb - 4 * qa * qc
                    if disc >= -tol:
                        sq = math.sqrt(max(disc, 0.0))
                        roots += [(-qb + sq) / (2 * qa), (-qb - sq) / (2 * qa)]
                elif abs(qb) > 0:
                    roots.append(-qc / qb)
        for r in roots:
            if r < -tol:
                continue
            r = max(r, 0.0)
            g = c0 + c1 * r + c2 * r * r
            diff = g - y
            if s is not None:
                a = diff[s]
                if a < -tol or a > self.slack_cap * r + tol:
                    continue
                diff[s] = 0.0
            if np.max(np.abs(diff)) <= tol:
                return True
        return False

    def shifted(self, delta) -> "ConcaveCurve":
        coeffs = tuple((c[0] + float(d), c[1], c[2]) for c, d in zip(self.coeffs, delta))
        return replace(self, coeffs=coeffs)


Technology = Union[Singleton0, LinearActivities, ConcaveCurve]


@dataclass(frozen=True)
class Firm:
    id: str
    technology: Technology


# -- regulatory schemes ------------------------------------------------------


@dataclass(frozen=True)
class QuotaScheme:
    quotas: Mapping[str, tuple[float, ...]]
    disposal: tuple[str, ...]

    kind = "quota"

    def __post_init__(self):
        object.__setattr__(self, "quotas", {str(j): _vec(m) for j, m in dict(self.quotas).items()})
        object.__setattr__(self, "disposal", tuple(self.disposal))

    def quota(self, firm_id: str, k: int) -> np.ndarray:
        return np.array(self.quotas.get(firm_id, (0.0,) * k), dtype=float)

    def total(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        for m in self.quotas.values():
            out = out + np.array(m, dtype=float)
        return out


@dataclass(frozen=True)
class EmissionTaxScheme:
    rate: tuple[float, ...]
    rebate: Mapping[str, float]
    disposal: tuple[str, ...]

    kind = "tax"

    def __post_init__(self):
        object.__setattr__(self, "rate", _vec(self.rate))
        object.__setattr__(self, "rebate", {str(k): float(v) for k, v in dict(self.rebate).items()})
        object.__setattr__(self, "disposal", tuple(self.disposal))


@dataclass(frozen=True)
class FuelTaxScheme:
    commodity: int
    rate: float
    rebate: Mapping[str, float]
    disposal: tuple[str, ...]

    kind = "fuel"

    def __post_init__(self):
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "rebate", {str(k): float(v) for k, v in dict(self.rebate).items()})
        object.__setattr__(self, "disposal", tuple(self.disposal))


Scheme = Union[QuotaScheme, EmissionTaxScheme, FuelTaxScheme]


@dataclass(frozen=True)
class Economy:
    commodities: CommoditySpace
    consumers: tuple[Consumer, ...]
    firms: tuple[Firm, ...]
    scheme: Scheme

    def __post_init__(self):
        object.__setattr__(self, "consumers", tuple(self.consumers))
        object.__setattr__(self, "firms", tuple(self.firms))

    @property
    def ell(self) -> int:
        return self.commodities.ell

    @property
    def k(self) -> int:
        return self.commodities.k

    def firm_ids(self) -> list[str]:
        return [f.id for f in self.firms]

    def total_endowment(self) -> np.ndarray:
        out = np.zeros(self.ell)
        for c in self.consumers:
            out += c.e
        return out

    def with_scheme(self, scheme: Scheme) -> "Economy":
        return replace(self, scheme=scheme)


# -- candidates --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Candidate:
    """An allocation (x per consumer, y per firm) together with prices p."""

    x: tuple[np.ndarray, ...]
    y: tuple[np.ndarray, ...]
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(frozen_array(v) for v in self.x))
        object.__setattr__(self, "y", tuple(frozen_array(v) for v in self.y))
        if self.p is not None:
            object.__setattr__(self, "p", frozen_array(self.p))

    def flat(self) -> np.ndarray:
        parts = list(self.x) + list(self.y)
        if self.p is not None:
            parts.append(self.p)
        return np.concatenate(parts) if parts else np.zeros(0)

    def distance(self, other: "Candidate") -> float:
        a, b = self.flat(), other.flat()
        if a.shape != b.shape:
            return INF
        return float(np.max(np.abs(a - b), initial=0.0))

    def identical(self, other: "Candidate") -> bool:
        a, b = self.flat(), other.flat()
        return a.shape == b.shape and bool(np.array_equal(a, b))

    def with_prices(self, p) -> "Candidate":
        return Candidate(self.x, self.y, p)


# -- operations ----------------------------------------------------------------


def _check_dims(economy: Economy, x, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([np.asarray(v, dtype=float) for v in x], dtype=float)
    Y = np.array([np.asarray(v, dtype=float) for v in y], dtype=float)
    ell = economy.ell
    if X.shape != (len(economy.consumers), ell):
        raise DimensionMismatch(f"x has shape {X.shape}, expected {(len(economy.consumers), ell)}")
    if Y.shape != (len(economy.firms), ell):
        raise DimensionMismatch(f"y has shape {Y.shape}, expected {(len(economy.firms), ell)}")
    return X, Y


def excess(economy: Economy, x, y) -> np.ndarray:
    """Aggregate excess demand: sum x - sum e - sum y."""
    X, Y = _check_dims(economy, x, y)
    return X.sum(axis=0) - economy.total_endowment() - Y.sum(axis=0)


def total_net_emission(economy: Economy, x, y) -> np.ndarray:
    """Net emission of the regulated commodities: first k of sum e + sum y - sum x."""
    X, Y = _check_dims(economy, x, y)
    net = economy.total_endowment() + Y.sum(axis=0) - X.sum(axis=0)
    return net[: economy.k]


def region_residuals(economy: Economy, z) -> np.ndarray:
    """Per-commodity violation of the compliance region (0 means inside)."""
    z = np.asarray(z, dtype=float)
    k = economy.k
    scheme = economy.scheme
    out = np.zeros(len(z))
    if isinstance(scheme, QuotaScheme):
        out[:k] = np.abs(z[:k] - scheme.total(k))
    else:
        out[:k] = np.maximum(z[:k], 0.0)
    for i, flag in enumerate(scheme.disposal):
        n = k + i
        out[n] = max(z[n], 0.0) if flag == FREE else abs(z[n])
    return out


def in_region(economy: Economy, z, tol: float = EQ_TOL) -> bool:
    return bool(np.max(region_residuals(economy, z), initial=0.0) <= tol)


def validate_economy(economy: Economy) -> list[str]:
    """List every violated side condition; an empty list means valid."""
    out: list[str] = []
    cs = economy.commodities
    ell, k = cs.ell, cs.k
    if not 1 <= k <= ell:
        out.append(f"regulated count {k} outside [1, {ell}]")
    firm_ids = [f.id for f in economy.firms]
    consumer_ids = [c.id for c in economy.consumers]
    if len(set(firm_ids)) != len(firm_ids):
        out.append("duplicate firm ids")
    if len(set(consumer_ids)) != len(consumer_ids):
        out.append("duplicate consumer ids")

    for c in economy.consumers:
        if len(c.endowment) != ell:
            out.append(f"endowment of consumer {c.id} has length {len(c.endowment)}, expected {ell}")
        elif any(v < 0 for v in c.endowment):
            out.append(f"endowment of consumer {c.id} is negative")
        if len(c.box.lo) != ell or len(c.box.hi) != ell:
            out.append(f"consumption box of consumer {c.id} has wrong length")
        else:
            if any(v < 0 for v in c.box.lo):
                out.append(f"consumption box of consumer {c.id} has a negative lower bound")
            if any(lo > hi for lo, hi in zip(c.box.lo, c.box.hi)):
                out.append(f"consumption box of consumer {c.id} has lo > hi")
        w = c.utility.weights
        if len(w) != ell:
            out.append(f"utility of consumer {c.id} has length {len(w)}, expected {ell}")
        if any(v < 0 for v in w):
            out.append(f"utility of consumer {c.id} has a negative weight")
        if not any(v > 0 for v in w):
            out.append(f"utility of consumer {c.id} has no positive weight")
        if c.utility.externality_gamma is not None and c.utility.externality_gamma < 0:
            out.append(f"externality weight of consumer {c.id} is negative")
        for j, s in c.shares.items():
            if j not in firm_ids:
                out.append(f"consumer {c.id} holds shares of unknown firm {j}")
            if s < 0 or s > 1:
                out.append(f"share of consumer {c.id} in firm {j} is {s:.12g}, outside [0, 1]")

    for f in economy.firms:
        total = sum(c.share(f.id) for c in economy.consumers)
        if abs(total - 1.0) > 1e-12:
            out.append(f"shares of firm {f.id} sum to {total:.12g}")
        tech = f.technology
        if isinstance(tech, LinearActivities):
            if any(len(a) != ell for a in tech.activities):
                out.append(f"activity of firm {f.id} has wrong length")
            if len(tech.bounds) != len(tech.activities):
                out.append(f"firm {f.id} has {len(tech.bounds)} bounds for {len(tech.activities)} activities")
            if any(b < 0 for b in tech.bounds):
                out.append(f"firm {f.id} has a negative activity bound")
        elif isinstance(tech, ConcaveCurve):
            if len(tech.coeffs) != ell or any(len(c) != 3 for c in tech.coeffs):
                out.append(f"curve of firm {f.id} needs {ell} coefficient triples")
            if tech.slack_commodity is not None and not 0 <= tech.slack_commodity < ell:
                out.append(f"curve of firm {f.id} has slack commodity out of range")
            if tech.slack_cap < 0:
                out.append(f"curve of firm {f.id} has a negative slack cap")
        if getattr(tech, "offset", None) is not None and len(tech.offset) != ell:
            out.append(f"offset of firm {f.id} has wrong length")

    scheme = economy.scheme
    if len(scheme.disposal) != ell - k:
        out.append(f"disposal flags have length {len(scheme.disposal)}, expected {ell - k}")
    if any(d not in (FREE, NO_DISPOSAL) for d in scheme.disposal):
        out.append("disposal flags must be 'free' or 'none'")

    if isinstance(scheme, QuotaScheme):
        gov = [f for f in economy.firms if f.id == GOVERNMENT]
        if not gov or not isinstance(gov[0].technology, Singleton0):
            out.append("quota economy lacks the government firm 0 with a single-point technology")
        for j, m in scheme.quotas.items():
            if j not in firm_ids:
                out.append(f"quota assigned to unknown firm {j}")
            if len(m) != k:
                out.append(f"quota of firm {j} has length {len(m)}, expected {k}")
            if any(v > 0 for v in m):
                out.append(f"quota of firm {j} has a positive component")
    else:
        total = sum(scheme.rebate.values())
        if abs(total - 1.0) > 1e-12:
            out.append(f"rebate shares sum to {total:.12g}")
        for cid, lam in scheme.rebate.items():
            if cid not in consumer_ids:
                out.append(f"rebate share for unknown consumer {cid}")
            if lam < 0:
                out.append(f"rebate share of consumer {cid} is negative")
        if isinstance(scheme, EmissionTaxScheme):
            if len(scheme.rate) != k:
                out.append(f"tax rate has length {len(scheme.rate)}, expected {k}")
            if any(t < 0 for t in scheme.rate):
                out.append("tax rate has a negative component")
            if sum(scheme.rate) > 1 + 1e-12:
                out.append("tax rate exceeds the price normalization")
        else:
            if not 0 <= scheme.commodity < ell:
                out.append(f"taxed commodity {scheme.commodity} out of range")
            if not 0 <= scheme.rate < 1:
                out.append(f"fuel tax rate {scheme.rate:.12g} outside [0, 1)")
    return out
