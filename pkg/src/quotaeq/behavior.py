"""Consumer and firm optimisation: incomes, demand, supply, cheaper points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .economy import (
    EQ_TOL,
    INF,
    CobbDouglas,
    ConcaveCurve,
    Consumer,
    EmissionTaxScheme,
    Firm,
    FuelTaxScheme,
    LinearActivities,
    QuotaScheme,
    Singleton0,
    Technology,
    frozen_array,
)
from .errors import EmptyBudget, UnboundedDemand, UnboundedProfit, UnsupportedTechnology

# prices this close to zero are treated as zero when classifying goods
PRICE_ZERO = 1e-12


@dataclass(frozen=True)
class Income:
    w: float
    endowment_value: float
    dividends: Mapping[str, float] = field(default_factory=dict)
    quota_rents: Mapping[str, float] = field(default_factory=dict)
    rebate: float = 0.0

    def parts_total(self) -> float:
        return self.endowment_value + sum(self.dividends.values()) + sum(self.quota_rents.values()) + self.rebate


def _lookup(y: Mapping[str, Sequence[float]], firm_id: str) -> np.ndarray:
    try:
        return np.asarray(y[firm_id], dtype=float)
    except KeyError:
        raise KeyError(f"unknown firm id {firm_id!r} in shares") from None


def income_quota(consumer: Consumer, y: Mapping[str, Sequence[float]], p, scheme: QuotaScheme) -> Income:
    p = np.asarray(p, dtype=float)
    ev = float(p @ consumer.e)
    dividends, rents = {}, {}
    for j, theta in consumer.shares.items():
        yj = _lookup(y, j)
        m = np.asarray(scheme.quotas.get(j, ()), dtype=float)
        dividends[j] = theta * float(p @ yj)
        rents[j] = theta * float(p[: len(m)] @ m) if len(m) else 0.0
    w = ev + sum(dividends.values()) + sum(rents.values())
    return Income(w, ev, dividends, rents)


def income_tax(consumer: Consumer, y: Mapping[str, Sequence[float]], p, scheme: EmissionTaxScheme, emission) -> Income:
    """Tax-economy income; `emission` is the economy-wide net emission C(x, y)."""
    p = np.asarray(p, dtype=float)
    ev = float(p @ consumer.e)
    dividends = {j: theta * float(p @ _lookup(y, j)) for j, theta in consumer.shares.items()}
    revenue = float(np.dot(scheme.rate, np.atleast_1d(np.asarray(emission, dtype=float))))
    rebate = scheme.rebate.get(consumer.id, 0.0) * revenue
    return Income(ev + sum(dividends.values()) + rebate, ev, dividends, {}, rebate)


def income_fuel(consumer: Consumer, y: Mapping[str, Sequence[float]], p, scheme: FuelTaxScheme) -> Income:
    """Fuel-tax income p.e + sum_j theta_j p.y_j.

    The breakdown books each firm's after-tax profit as the dividend and the
    tax it paid as a rebate, both by shareholding, so they add back to p.y_j.
    """
    p = np.asarray(p, dtype=float)
    s, t = scheme.commodity, scheme.rate
    ev = float(p @ consumer.e)
    dividends, rebate = {}, 0.0
    for j, theta in consumer.shares.items():
        yj = _lookup(y, j)
        dividends[j] = theta * (float(p @ yj) + t * float(yj[s]))
        rebate += theta * (-t * float(yj[s]))
    return Income(ev + sum(dividends.values()) + rebate, ev, dividends, {}, rebate)


# -- demand --------------------------------------------------------------------


def min_cost(consumer: Consumer, p) -> float:
    """Cheapest bundle value over the consumption box (may be -inf)."""
    total = 0.0
    for pn, lo, hi in zip(np.asarray(p, dtype=float), consumer.box.lo, consumer.box.hi):
        if pn >= 0:
            total += pn * lo
        elif hi == INF:
            return -INF
        else:
            total += pn * hi
    return total


def cheaper_point_exists(consumer: Consumer, w: float, p) -> bool:
    return min_cost(consumer, p) < w - EQ_TOL


@dataclass(frozen=True, eq=False)
class DemandSet:
    """All utility maximisers over {z in box : p.z <= w}.

    `bundle` is one maximiser. `face` lists coordinates that may trade off
    against each other along the budget line (tied bang-per-buck); `indifferent`
    lists free, unwanted coordinates whose level does not matter.
    """

    bundle: np.ndarray
    value: float
    p: np.ndarray
    w: float
    lo: np.ndarray
    hi: np.ndarray
    face: tuple[int, ...] = ()
    indifferent: tuple[int, ...] = ()
    budget_binding: bool = True

    @property
    def is_unique(self) -> bool:
        return not self.face and not self.indifferent

    def contains(self, x, utility, tol: float = EQ_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            return False
        if float(self.p @ x) > self.w + tol:
            return False
        return utility.consumption_value(x) >= self.value - tol

    def vertices(self) -> list[np.ndarray]:
        """Extreme points of the tied face (indifferent coordinates at lo)."""
        if not self.face:
            return [self.bundle.copy()]
        idx = list(self.face)
        budget = float(self.p[idx] @ self.bundle[idx])
        out = []
        for pivot in idx:
            others = [i for i in idx if i != pivot]
            for choice in product(*[(self.lo[i], self.hi[i]) for i in others]):
                if any(math.isinf(c) for c in choice):
                    continue
                z = self.bundle.copy()
                for i, c in zip(others, choice):
                    z[i] = c
                rest = budget - sum(self.p[i] * z[i] for i in others)
                z[pivot] = rest / self.p[pivot]
                if self.lo[pivot] - EQ_TOL <= z[pivot] <= self.hi[pivot] + EQ_TOL:
                    if not any(np.allclose(z, v, atol=1e-12) for v in out):
                        out.append(z)
        return out


def _classify_fixed(c: float, pn: float, lo: float, hi: float, n: int):
    """Level of a good that is not bought at the margin, or None if it is."""
    if c > 0:
        if pn <= PRICE_ZERO:
            if hi == INF:
                raise UnboundedDemand(f"commodity {n} is wanted and costs {pn:.12g}")
            return hi
        return None
    if pn < -PRICE_ZERO:
        if hi == INF:
            raise UnboundedDemand(f"commodity {n} has negative price and no upper bound")
        return hi
    return lo


def demand(consumer: Consumer, w: float, p, v=None) -> DemandSet:
    """Utility maximisers at income w and prices p.

    The externality argument v enters utility only additively, so it is
    accepted for interface symmetry and never changes the result.
    """
    p = np.asarray(p, dtype=float)
    lo = np.array(consumer.box.lo, dtype=float)
    hi = np.array(consumer.box.hi, dtype=float)
    if min_cost(consumer, p) > w + EQ_TOL:
        raise EmptyBudget(f"cheapest bundle costs {min_cost(consumer, p):.12g} > income {w:.12g}")
    utility = consumer.utility
    weights = np.array(utility.weights, dtype=float)
    x = lo.copy()
    marginal = []
    indifferent = []
    for n in range(len(p)):
        level = _classify_fixed(weights[n], p[n], lo[n], hi[n], n)
        if level is None:
            marginal.append(n)
        else:
            x[n] = level
            if weights[n] == 0 and abs(p[n]) <= PRICE_ZERO and hi[n] > lo[n]:
                indifferent.append(n)
    if isinstance(utility.consumption, CobbDouglas):
        x = _cobb_douglas_fill(weights, p, x, lo, hi, marginal, w)
        return DemandSet(frozen_array(x), utility.consumption_value(x), frozen_array(p), float(w),
                         frozen_array(lo), frozen_array(hi), (), tuple(indifferent),
                         bool(abs(float(p @ x) - w) <= EQ_TOL))
    budget = w - float(p @ x)
    ratio = {n: weights[n] / p[n] for n in marginal}
    order = sorted(marginal, key=lambda n: (-ratio[n], n))
    groups: list[list[int]] = []
    for n in order:
        if groups and abs(ratio[groups[-1][0]] - ratio[n]) <= 1e-12 * max(1.0, ratio[n]):
            groups[-1].append(n)
        else:
            groups.append([n])
    face: tuple[int, ...] = ()
    binding = False
    for g in groups:
        cost = sum(p[n] * (hi[n] - lo[n]) for n in g)
        if cost <= budget:
            for n in g:
                x[n] = hi[n]
            budget -= cost
            continue
        binding = True
        for n in g:
            # near-free goods fixed above can leave the budget a hair below zero
            spend = max(0.0, min(budget, p[n] * (hi[n] - lo[n])))
            x[n] = lo[n] + spend / p[n]
            budget -= spend
        if len(g) > 1:
            face = tuple(sorted(g))
        break
    if not binding and groups:
        binding = abs(budget) <= EQ_TOL
    value = utility.consumption_value(x)
    return DemandSet(frozen_array(x), value, frozen_array(p), float(w), frozen_array(lo), frozen_array(hi),
                     face, tuple(indifferent), binding)


def _cobb_douglas_fill(alpha, p, x, lo, hi, marginal, w):
    x = x.copy()
    if not marginal:
        return x
    budget = w - float(p @ x)
    idx = np.array(marginal)

    def spend(log_mu: float) -> float:
        mu = math.exp(log_mu)
        z = np.clip(alpha[idx] / (mu * p[idx]), lo[idx], hi[idx])
        return float(p[idx] @ z) - budget

    if float(p[idx] @ hi[idx]) <= budget:
        x[idx] = hi[idx]
        return x
    if float(p[idx] @ lo[idx]) >= budget:
        x[idx] = lo[idx]
        return x
    a, b = -50.0, 50.0
    log_mu = brentq(spend, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x[idx] = np.clip(alpha[idx] / (math.exp(log_mu) * p[idx]), lo[idx], hi[idx])
    return x


# -- supply --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SupplyFace:
    """Affine description of a set of production plans.

    Plans are offset + M @ lam with lo <= lam <= hi and G @ lam <= h.
    """

    offset: np.ndarray
    M: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    G: np.ndarray
    h: np.ndarray

    @property
    def dim(self) -> int:
        return int(np.sum(self.hi - self.lo > 0))

    def plan(self, lam) -> np.ndarray:
        return self.offset + self.M @ np.asarray(lam, dtype=float)


@dataclass(frozen=True, eq=False)
class SupplyResult:
    profit: float
    kind: str  # "point", "face" or "unbounded"
    face: SupplyFace | None = None

    @property
    def point(self) -> np.ndarray:
        if self.face is None:
            raise UnboundedProfit("no maximiser: profit is unbounded")
        return self.face.plan(self.face.lo)

    def bounded(self) -> bool:
        return self.kind != "unbounded"


def _face(offset, M, lo, hi, G=None, h=None) -> SupplyFace:
    M = np.asarray(M, dtype=float).reshape(len(offset), -1)
    d = M.shape[1]
    G = np.zeros((0, d)) if G is None else np.asarray(G, dtype=float).reshape(-1, d)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float)
    return SupplyFace(np.asarray(offset, dtype=float), M, np.asarray(lo, dtype=float),
                      np.asarray(hi, dtype=float), G, h)


def effective_prices(p, fuel: tuple[int, float] | None = None) -> np.ndarray:
    """Prices a firm faces: the fuel tax adds t to the taxed commodity."""
    q = np.array(p, dtype=float)
    if fuel is not None:
        s, t = fuel
        q[s] += t
    return q


def supply(firm: Union[Firm, Technology], p, fuel: tuple[int, float] | None = None,
           tol: float = EQ_TOL) -> SupplyResult:
    """Profit maximisers of a technology at prices p.

    `fuel` is (taxed commodity, rate); the firm then maximises p.z + t z_s.
    """
    tech = firm.technology if isinstance(firm, Firm) else firm
    q = effective_prices(p, fuel)
    ell = len(q)
    if isinstance(tech, Singleton0):
        pt = tech.point(ell)
        return SupplyResult(float(q @ pt), "point", _face(pt, np.zeros((ell, 0)), [], []))
    if isinstance(tech, LinearActivities):
        return _supply_linear(tech, q, tol)
    if isinstance(tech, ConcaveCurve):
        return _supply_curve(tech, q, tol)
    raise UnsupportedTechnology(f"unknown technology {type(tech).__name__}")


def _supply_linear(tech: LinearActivities, q: np.ndarray, tol: float) -> SupplyResult:
    ell = len(q)
    A = tech.matrix(ell)
    offset = np.zeros(ell) if tech.offset is None else np.array(tech.offset, dtype=float)
    unit = q @ A
    lo = np.zeros(A.shape[1])
    hi = np.zeros(A.shape[1])
    profit = float(q @ offset)
    for i, (u, b) in enumerate(zip(unit, tech.bounds)):
        if u > tol:
            if b == INF:
                return SupplyResult(INF, "unbounded")
            lo[i] = hi[i] = b
            profit += u * b
        elif u >= -tol:
            hi[i] = b
    face = _face(offset, A, lo, hi)
    return SupplyResult(profit, "face" if face.dim else "point", face)


def _supply_curve(tech: ConcaveCurve, q: np.ndarray, tol: float) -> SupplyResult:
    ell = len(q)
    c0, c1, c2 = tech.coeff_arrays()
    s = tech.slack_commodity
    ps = q[s] if s is not None else 0.0
    gain = max(0.0, -ps) * tech.slack_cap if s is not None else 0.0
    A2 = float(q @ c2)
    B = float(q @ c1) + gain
    slack_col = np.zeros((ell, 1))
    if s is not None:
        slack_col[s, 0] = -1.0
    if A2 > tol or (A2 >= -tol and B > tol):
        return SupplyResult(INF, "unbounded")
    if A2 < -tol:
        r = max(0.0, -B / (2.0 * A2))
        profit = float(q @ c0) + B * r + A2 * r * r
        base = c0 + c1 * r + c2 * r * r
        cap = tech.slack_cap * r if s is not None else 0.0
        if s is None or cap == 0.0:
            return SupplyResult(profit, "point", _face(base, np.zeros((ell, 0)), [], []))
        if ps < -tol:
            lo = hi = cap
        elif ps > tol:
            lo = hi = 0.0
        else:
            lo, hi = 0.0, cap
        face = _face(base, slack_col, [lo], [hi])
        return SupplyResult(profit, "face" if hi > lo else "point", face)
    # profit is flat in r up to tolerance
    if B < -tol:
        return SupplyResult(float(q @ c0), "point", _face(c0.copy(), np.zeros((ell, 0)), [], []))
    if np.any(c2 != 0) and not np.any(c1 != 0) and (s is None or ps > tol):
        # slack unused and the path c0 + c2 r^2 is the ray c0 + c2 u, u >= 0
        return SupplyResult(float(q @ c0), "face", _face(c0.copy(), c2.reshape(ell, 1), [0.0], [INF]))
    if np.any(c2 != 0):
        raise UnsupportedTechnology("curve profit is flat along a non-linear output path")
    M = np.hstack([c1.reshape(ell, 1), slack_col])
    cap = tech.slack_cap if s is not None else 0.0
    if s is None or ps > tol:
        G, h, hi = [[0.0, 1.0]], [0.0], [INF, 0.0]
    elif ps < -tol:
        G, h, hi = [[-cap, 1.0], [cap, -1.0]], [0.0, 0.0], [INF, INF]
    else:
        G, h, hi = [[-cap, 1.0]], [0.0], [INF, INF]
    return SupplyResult(float(q @ c0), "face", _face(c0.copy(), M, [0.0, 0.0], hi, G, h))


def max_profit_gap(result: SupplyResult, y, p, fuel=None) -> float:
    """How far a plan falls short of the maximal profit."""
    if not result.bounded():
        return INF
    q = effective_prices(p, fuel)
    return result.profit - float(q @ np.asarray(y, dtype=float))
