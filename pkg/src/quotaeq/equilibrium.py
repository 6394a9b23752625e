"""Certification of candidate equilibria and solvers for all three schemes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _regimes as rg
from ._numeric import fmt, snap_array
from .behavior import (
    cheaper_point_exists,
    demand,
    effective_prices,
    income_fuel,
    income_quota,
    income_tax,
    supply,
)
from .economy import (
    EQ_TOL,
    FREE,
    INF,
    Candidate,
    ConcaveCurve,
    Economy,
    EmissionTaxScheme,
    FuelTaxScheme,
    LinearActivities,
    QuotaScheme,
    excess,
    region_residuals,
    total_net_emission,
)
from .errors import EmptyBudget, QuotaEqError, UnboundedDemand, UnsupportedTechnology

DEDUP_TOL = 1e-7
NO_PRODUCTION_REASON = "positive demand, zero feasible production"


# -- certification ---------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class CertificationReport:
    price_normalized: Check
    demand_optimal: tuple[Check, ...]
    supply_optimal: tuple[Check, ...]
    feasibility_in_region: Check
    region_residuals: tuple[float, ...]
    tax_price_pinned: Check | None
    walras_value: float
    quasi_only: bool
    florenzano_polar: Check

    def mandatory(self) -> list[Check]:
        checks = [self.price_normalized, *self.demand_optimal, *self.supply_optimal, self.feasibility_in_region]
        if self.tax_price_pinned is not None:
            checks.append(self.tax_price_pinned)
        return checks

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.mandatory())

    def failures(self) -> list[Check]:
        return [c for c in self.mandatory() if not c.passed]

    def lines(self) -> list[str]:
        out = []
        for c in self.mandatory():
            verdict = "pass" if c.passed else "fail"
            extra = f" ({c.detail})" if c.detail else ""
            out.append(f"{verdict} {c.name} residual={fmt(c.residual)}{extra}")
        out.append(f"info walrasValue={fmt(self.walras_value)}")
        out.append(f"info quasiOnly={'yes' if self.quasi_only else 'no'}")
        fp = self.florenzano_polar
        out.append(f"info florenzanoPolar={'pass' if fp.passed else 'fail'} residual={fmt(fp.residual)}")
        return out


def _incomes(economy: Economy, cand: Candidate) -> list:
    y_map = {f.id: y for f, y in zip(economy.firms, cand.y)}
    scheme = economy.scheme
    if isinstance(scheme, QuotaScheme):
        return [income_quota(c, y_map, cand.p, scheme) for c in economy.consumers]
    if isinstance(scheme, EmissionTaxScheme):
        v = total_net_emission(economy, cand.x, cand.y)
        return [income_tax(c, y_map, cand.p, scheme, v) for c in economy.consumers]
    return [income_fuel(c, y_map, cand.p, scheme) for c in economy.consumers]


def _fuel(economy: Economy):
    s = economy.scheme
    return (s.commodity, s.rate) if isinstance(s, FuelTaxScheme) else None


def certify(economy: Economy, candidate: Candidate, tol: float = EQ_TOL) -> CertificationReport:
    """Check every equilibrium condition of the economy's scheme."""
    p = np.asarray(candidate.p, dtype=float)
    scheme = economy.scheme
    k = economy.k
    z = excess(economy, candidate.x, candidate.y)

    norm_target = 1.0 - scheme.rate if isinstance(scheme, FuelTaxScheme) else 1.0
    norm_res = abs(float(np.sum(np.abs(p))) - norm_target)
    price_check = Check("priceNormalized", norm_res <= tol, norm_res)

    pinned = None
    if isinstance(scheme, EmissionTaxScheme):
        res = float(np.max(np.abs(p[:k] + np.array(scheme.rate)), initial=0.0))
        pinned = Check("taxPricePinned", res <= tol, res)

    incomes = _incomes(economy, candidate)
    demand_checks = []
    quasi = False
    for c, x, inc in zip(economy.consumers, candidate.x, incomes):
        name = f"demandOptimal[{c.id}]"
        x = np.asarray(x, dtype=float)
        box_viol = max(float(np.max(np.array(c.box.lo) - x, initial=0.0)),
                       float(np.max(x - np.array(c.box.hi), initial=0.0)))
        over = max(0.0, float(p @ x) - inc.w)
        if not cheaper_point_exists(c, inc.w, p) and box_viol <= tol and over <= tol:
            quasi = True
        try:
            ds = demand(c, inc.w, p)
        except EmptyBudget as exc:
            demand_checks.append(Check(name, False, INF, f"empty budget set: {exc}"))
            continue
        except UnboundedDemand as exc:
            demand_checks.append(Check(name, False, INF, f"demand unbounded: {exc}"))
            continue
        gap = ds.value - c.utility.consumption_value(x)
        resid = max(box_viol, over, gap, 0.0)
        demand_checks.append(Check(name, resid <= tol, resid, f"utility gap {fmt(gap)}" if gap > tol else ""))

    fuel = _fuel(economy)
    supply_checks = []
    for f, y in zip(economy.firms, candidate.y):
        name = f"supplyOptimal[{f.id}]"
        try:
            res = supply(f, p, fuel)
        except UnsupportedTechnology as exc:
            supply_checks.append(Check(name, False, INF, str(exc)))
            continue
        q = effective_prices(p, fuel)
        if not res.bounded():
            detail = "profit unbounded"
            tech = f.technology
            if isinstance(tech, LinearActivities) and tech.activities:
                unit = float(np.max(q @ tech.matrix(economy.ell)))
                detail = f"activity profit {fmt(unit)} > 0, profit unbounded"
            supply_checks.append(Check(name, False, INF, detail))
            continue
        gap = res.profit - float(q @ np.asarray(y, dtype=float))
        member = f.technology.contains(y, tol)
        resid = max(gap, 0.0) if member else INF
        detail = "" if member else "plan outside the technology"
        supply_checks.append(Check(name, member and gap <= tol, resid, detail))

    rres = region_residuals(economy, z)
    worst = float(np.max(rres, initial=0.0))
    bad = [str(n) for n, r in enumerate(rres) if r > tol]
    feas = Check("feasibilityInRegion", worst <= tol, worst, f"commodities {','.join(bad)}" if bad else "")

    if isinstance(scheme, QuotaScheme):
        walras = abs(float(p @ z) - float(p[:k] @ scheme.total(k)))
    elif isinstance(scheme, EmissionTaxScheme):
        walras = abs(float(p @ z) - float(p[:k] @ z[:k]))
    else:
        walras = abs(float(p @ z))
    polar = 0.0
    for i, flag in enumerate(scheme.disposal):
        if flag == FREE:
            polar = max(polar, -float(p[k + i]))
    florenzano = Check("florenzanoPolar", polar <= tol, polar)
    return CertificationReport(price_check, tuple(demand_checks), tuple(supply_checks), feas,
                               tuple(float(r) for r in rres), pinned, walras, quasi, florenzano)


# -- equilibrium sets ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Family:
    """Segment of equilibria at one price, parameterised by a scalar.

    The parameter is the net emission of the first regulated commodity when
    it varies along the segment, otherwise a weight in [0, 1].
    """

    parameter: str
    lo: float
    hi: float
    start: Candidate
    end: Candidate

    def member(self, s: float) -> Candidate:
        if self.hi == self.lo:
            w = 0.0
        else:
            w = (s - self.lo) / (self.hi - self.lo)
        if w < -1e-12 or w > 1 + 1e-12:
            raise ValueError(f"parameter {s} outside [{self.lo}, {self.hi}]")
        xs = tuple((1 - w) * a + w * b for a, b in zip(self.start.x, self.end.x))
        ys = tuple((1 - w) * a + w * b for a, b in zip(self.start.y, self.end.y))
        return Candidate(xs, ys, self.start.p)

    def sample(self, n: int = 11) -> list[Candidate]:
        return [self.member(s) for s in np.linspace(self.lo, self.hi, n)]


@dataclass(frozen=True, eq=False)
class EquilibriumSet:
    candidates: tuple[Candidate, ...] = ()
    family: Family | None = None
    reason: str | None = None

    @property
    def empty(self) -> bool:
        return not self.candidates and self.family is None

    def __len__(self) -> int:
        return len(self.candidates)

    def members(self, family_samples: int = 2) -> list[Candidate]:
        out = list(self.candidates)
        if self.family is not None:
            out.extend(self.family.sample(family_samples))
        return out

    def emission_range(self, economy: Economy) -> tuple[float, float] | None:
        vals = [float(total_net_emission(economy, c.x, c.y)[0]) for c in self.members()]
        if not vals:
            return None
        return min(vals), max(vals)


# -- solving --------------------------------------------------------------------


def _to_candidate(model: rg.LinearModel, q: np.ndarray, p: np.ndarray) -> Candidate:
    xs, ys = model.allocation(q)
    return Candidate(tuple(xs), tuple(ys), p)


def _snapped(economy: Economy, cand: Candidate) -> Candidate:
    snapped = Candidate(tuple(snap_array(x) for x in cand.x), tuple(snap_array(y) for y in cand.y),
                        snap_array(cand.p))
    if certify(economy, snapped).passed or not certify(economy, cand).passed:
        return snapped
    return cand


def _quantity_stage(setup: rg.Setup, p: np.ndarray, points: list, segments: list, fails: set):
    supplies, regimes, fail = rg.stage_inputs(setup, p)
    if fail:
        fails.add(fail)
        return
    for combo in product(*regimes):
        model = rg.build_model(setup, p, supplies, list(combo))
        q0 = rg.feasible_point(model)
        if q0 is None:
            fails.add("no-clearing")
            continue
        dim, pts = rg.polytope_points(model, q0)
        if dim == 0:
            points.append(_to_candidate(model, q0, p))
        elif dim == 1:
            a, b = rg.segment_endpoints(model, pts)
            segments.append((_to_candidate(model, a, p), _to_candidate(model, b, p)))
        else:
            points.extend(_to_candidate(model, q, p) for q in pts)


def _on_segment(c: Candidate, a: Candidate, b: Candidate) -> bool:
    u, v, w = a.flat(), b.flat(), c.flat()
    if u.shape != w.shape:
        return False
    d = v - u
    dd = float(d @ d)
    s = 0.0 if dd == 0 else min(1.0, max(0.0, float((w - u) @ d) / dd))
    return float(np.max(np.abs(u + s * d - w), initial=0.0)) <= DEDUP_TOL


def _make_family(economy: Economy, a: Candidate, b: Candidate) -> Family:
    ea = float(total_net_emission(economy, a.x, a.y)[0]) if economy.k else 0.0
    eb = float(total_net_emission(economy, b.x, b.y)[0]) if economy.k else 0.0
    if economy.k and abs(ea - eb) > EQ_TOL:
        if ea > eb:
            a, b, ea, eb = b, a, eb, ea
        return Family("emission", ea, eb, a, b)
    return Family("weight", 0.0, 1.0, a, b)


def _sort_key(c: Candidate):
    return tuple(np.round(c.flat(), 9))


def _max_unit_profit(setup: rg.Setup) -> float:
    """Largest profit rate any production direction can earn over the price region."""
    econ = setup.economy
    ell = econ.ell
    dirs = []
    for f in econ.firms:
        t = f.technology
        if isinstance(t, LinearActivities):
            dirs.extend(np.array(a, dtype=float) for a in t.activities)
        elif isinstance(t, ConcaveCurve):
            _, c1, _ = t.coeff_arrays()
            dirs.append(c1)
            if t.slack_commodity is not None:
                d = c1.copy()
                d[t.slack_commodity] -= t.slack_cap
                dirs.append(d)
    if not dirs:
        return -INF
    best = -INF
    for sigma in product(*setup.sign_options):
        rows, rhs = rg._base_rows(setup, sigma)
        bounds = []
        for s in sigma:
            bounds.append((0, None) if s > 0 else ((None, 0) if s < 0 else (0, 0)))
        for d in dirs:
            c = -d.copy()
            const = 0.0
            if setup.fuel:
                const = setup.fuel[1] * d[setup.fuel[0]]
            res = linprog(c, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=bounds, method="highs")
            if res.status == 0:
                best = max(best, -res.fun + const)
    return best


def _empty_reason(setup: rg.Setup, fails: set) -> str:
    if _max_unit_profit(setup) < -EQ_TOL:
        return NO_PRODUCTION_REASON
    if fails and fails <= {"unbounded-profit", "unbounded-demand"}:
        return "unbounded profit at every candidate price"
    return "no price regime clears the markets"


def _has_curve(economy: Economy) -> bool:
    return any(isinstance(f.technology, ConcaveCurve) for f in economy.firms)


def _candidate_prices(setup: rg.Setup, cap: int, found_any: Callable[[], bool], visit) -> None:
    """Feed every candidate price to visit: arrangement vertices, then edge roots."""
    prices = [snap_array(p) for p in rg.price_vertices(setup, cap)]
    for p in prices:
        visit(p)
    if _has_curve(setup.economy) and (setup.kind == "quota" or not found_any()):
        seen = {tuple(np.round(p, 9)) for p in prices}
        for edge in rg.price_edges(setup):
            for p in rg.edge_search(setup, edge):
                p = snap_array(p)
                key = tuple(np.round(p, 9))
                if key in seen:
                    continue
                seen.add(key)
                visit(p)


def equilibrium_polytopes(economy: Economy, restrict_signs: bool = True,
                          cap: int = rg.DEFAULT_REGIME_CAP) -> list[tuple[np.ndarray, rg.LinearModel]]:
    """Every (price, feasible quantity program) pair the solver would explore.

    Points of each program are equilibrium allocations at that price, which
    lets callers optimise over equilibria (for example at a fixed emission).
    """
    setup = rg.build_setup(economy, restrict_signs)
    out: list[tuple[np.ndarray, rg.LinearModel]] = []

    def visit(p):
        supplies, regimes, fail = rg.stage_inputs(setup, p)
        if fail:
            return
        for combo in product(*regimes):
            model = rg.build_model(setup, p, supplies, list(combo))
            if rg.feasible_point(model) is not None:
                out.append((p, model))

    _candidate_prices(setup, cap, lambda: bool(out), visit)
    return out


def _solve(economy: Economy, restrict_signs: bool = True, cap: int = rg.DEFAULT_REGIME_CAP,
           tol: float = EQ_TOL) -> EquilibriumSet:
    setup = rg.build_setup(economy, restrict_signs)
    points: list[Candidate] = []
    segments: list[tuple[Candidate, Candidate]] = []
    fails: set[str] = set()
    _candidate_prices(setup, cap, lambda: bool(points or segments),
                      lambda p: _quantity_stage(setup, p, points, segments, fails))

    certified: list[Candidate] = []
    for c in points:
        c = _snapped(economy, c)
        if certify(economy, c, tol).passed:
            certified.append(c)
    fam_pairs = []
    for a, b in segments:
        a, b = _snapped(economy, a), _snapped(economy, b)
        if certify(economy, a, tol).passed and certify(economy, b, tol).passed:
            fam_pairs.append((a, b))
        else:
            certified.extend(c for c in (a, b) if certify(economy, c, tol).passed)

    family = None
    if fam_pairs:
        fam_pairs.sort(key=lambda ab: (_sort_key(ab[0]), _sort_key(ab[1])))
        family = _make_family(economy, *fam_pairs[0])
        for a, b in fam_pairs[1:]:
            if not (_on_segment(a, family.start, family.end) and _on_segment(b, family.start, family.end)):
                certified.extend((a, b))
    unique: list[Candidate] = []
    for c in sorted(certified, key=_sort_key):
        if any(c.distance(u) <= DEDUP_TOL for u in unique):
            continue
        if family is not None and _on_segment(c, family.start, family.end):
            continue
        unique.append(c)
    reason = None
    if not unique and family is None:
        reason = _empty_reason(setup, fails)
    return EquilibriumSet(tuple(unique), family, reason)


def solve_quota(economy: Economy, restrict_signs: bool = True, cap: int = rg.DEFAULT_REGIME_CAP) -> EquilibriumSet:
    if not isinstance(economy.scheme, QuotaScheme):
        raise TypeError("solve_quota needs a quota scheme")
    return _solve(economy, restrict_signs, cap)


def solve_tax(economy: Economy, restrict_signs: bool = True, cap: int = rg.DEFAULT_REGIME_CAP) -> EquilibriumSet:
    if not isinstance(economy.scheme, EmissionTaxScheme):
        raise TypeError("solve_tax needs an emission tax scheme")
    return _solve(economy, restrict_signs, cap)


def solve_fuel(economy: Economy, restrict_signs: bool = True, cap: int = rg.DEFAULT_REGIME_CAP) -> EquilibriumSet:
    if not isinstance(economy.scheme, FuelTaxScheme):
        raise TypeError("solve_fuel needs a fuel tax scheme")
    return _solve(economy, restrict_signs, cap)


def solve(economy: Economy, **kwargs) -> EquilibriumSet:
    """Dispatch on the economy's scheme."""
    return _solve(economy, **kwargs)


# -- emission correspondence -------------------------------------------------------


@dataclass(frozen=True)
class EmissionRow:
    t: float
    lo: float | None
    hi: float | None
    count: str  # number of isolated equilibria, "inf" for a family, "error:Name"

    def csv_fields(self) -> list[str]:
        return [fmt(self.t), "" if self.lo is None else fmt(self.lo), "" if self.hi is None else fmt(self.hi),
                self.count]


def emission_correspondence(economy: Economy, grid: Iterable[float]) -> list[EmissionRow]:
    """Equilibrium emissions of a tax economy across tax rates."""
    if not isinstance(economy.scheme, EmissionTaxScheme):
        raise TypeError("emission_correspondence needs an emission tax economy")
    rows = []
    for t in grid:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"tax rate {t} outside [0, 1]")
        scheme = replace(economy.scheme, rate=(t,) * economy.k)
        try:
            eq = solve_tax(economy.with_scheme(scheme))
        except QuotaEqError as exc:
            rows.append(EmissionRow(t, None, None, f"error:{type(exc).__name__}"))
            continue
        rng = eq.emission_range(economy)
        if rng is None:
            rows.append(EmissionRow(t, None, None, "0"))
        else:
            count = "inf" if eq.family is not None else str(len(eq.candidates))
            rows.append(EmissionRow(t, rng[0], rng[1], count))
    return rows


EMISSION_HEADER = ("t", "emission_lo", "emission_hi", "count")


def emission_csv(rows: Sequence[EmissionRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EMISSION_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()
