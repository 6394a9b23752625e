"""Pareto comparisons, a brute-force constrained-optimality oracle and welfare sweeps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _regimes as rg
from ._numeric import fmt
from .economy import (
    EQ_TOL,
    FREE,
    GOVERNMENT,
    INF,
    NO_DISPOSAL,
    Candidate,
    ConcaveCurve,
    Economy,
    EmissionTaxScheme,
    LinearActivities,
    QuotaScheme,
    Singleton0,
    total_net_emission,
)
from .equilibrium import certify, equilibrium_polytopes, solve, solve_quota
from .errors import GridExplosion, NoEquilibriumAtEmission, QuotaEqError

MARGIN = 1e-9
DEFAULT_GRID_CAP = 10**7


def _pair(pair) -> tuple[list[np.ndarray], list[np.ndarray]]:
    if isinstance(pair, Candidate):
        return [np.asarray(v, dtype=float) for v in pair.x], [np.asarray(v, dtype=float) for v in pair.y]
    x, y = pair
    return [np.asarray(v, dtype=float) for v in x], [np.asarray(v, dtype=float) for v in y]


def utilities(economy: Economy, pair) -> np.ndarray:
    """Each consumer's utility at its bundle and the pair's total net emission."""
    x, y = _pair(pair)
    v = total_net_emission(economy, x, y)
    return np.array([c.utility(xi, v) for c, xi in zip(economy.consumers, x)])


def _dominates(ua: np.ndarray, ub: np.ndarray, strong: bool) -> bool:
    if strong:
        return bool(np.all(ua > ub + MARGIN))
    return bool(np.all(ua >= ub - MARGIN) and np.any(ua > ub + MARGIN))


def pareto_dominates(economy: Economy, pair_a, pair_b, strong: bool = False) -> bool:
    """Whether pair_a makes nobody worse and somebody better than pair_b.

    The strong variant requires every consumer to be strictly better off.
    """
    return _dominates(utilities(economy, pair_a), utilities(economy, pair_b), strong)


# -- constrained Pareto oracle ---------------------------------------------------------


@dataclass(frozen=True)
class NoDominatorFound:
    step: float
    points_examined: int
    hypothesis_route: str

    dominated = False


@dataclass(frozen=True)
class DominatedBy:
    step: float
    points_examined: int
    hypothesis_route: str
    counterexample: Candidate
    deltas: tuple[float, ...]

    dominated = True


WelfareVerdict = NoDominatorFound | DominatedBy


def hypothesis_route(economy: Economy, p=None) -> str:
    """Which side condition makes equilibria constrained optimal here."""
    flags = economy.scheme.disposal
    if all(f == NO_DISPOSAL for f in flags):
        return "no-disposal"
    if p is not None:
        k = economy.k
        free = [k + i for i, f in enumerate(flags) if f == FREE]
        if all(p[n] > EQ_TOL for n in free):
            return "positive-prices"
    return "none"


class _Attainable:
    """Linear description of pairs with a fixed regulated net emission.

    Curve firms enter with a fixed activity level (set per query), so every
    query is a linear program over linear activity levels, curve slack use
    and consumption.
    """

    def __init__(self, economy: Economy, emission: np.ndarray):
        self.economy = economy
        self.emission = np.asarray(emission, dtype=float)
        ell = economy.ell
        cols: list[tuple[str, int, int]] = []
        bounds: list[tuple[float, float | None]] = []
        for j, f in enumerate(economy.firms):
            t = f.technology
            if isinstance(t, LinearActivities):
                for i, b in enumerate(t.bounds):
                    cols.append(("lin", j, i))
                    bounds.append((0.0, None if b == INF else b))
            elif isinstance(t, ConcaveCurve) and t.slack_commodity is not None:
                cols.append(("slack", j, 0))
                bounds.append((0.0, None))
        for w, c in enumerate(economy.consumers):
            for n in range(ell):
                cols.append(("x", w, n))
                bounds.append((c.box.lo[n], None if c.box.hi[n] == INF else c.box.hi[n]))
        self.cols = cols
        self.bounds = bounds

    def _rows(self, curve_r: dict[int, float]):
        econ = self.economy
        ell, k = econ.ell, econ.k
        nv = len(self.cols)
        Z = np.zeros((ell, nv))  # excess = Z q + z0
        z0 = -econ.total_endowment()
        for j, f in enumerate(econ.firms):
            t = f.technology
            if isinstance(t, Singleton0):
                z0 = z0 - t.point(ell)
            elif isinstance(t, LinearActivities):
                z0 = z0 - (np.zeros(ell) if t.offset is None else np.array(t.offset))
            elif isinstance(t, ConcaveCurve):
                z0 = z0 - t.output(curve_r.get(j, 0.0), 0.0)
        ub_rows, ub_rhs = [], []
        for ci, (kind, a, b) in enumerate(self.cols):
            if kind == "lin":
                Z[:, ci] -= np.array(econ.firms[a].technology.activities[b])
            elif kind == "slack":
                t = econ.firms[a].technology
                Z[t.slack_commodity, ci] += 1.0
                row = np.zeros(nv)
                row[ci] = 1.0
                ub_rows.append(row)
                ub_rhs.append(t.slack_cap * curve_r.get(a, 0.0))
            else:
                Z[b, ci] += 1.0
        eq_rows, eq_rhs = [], []
        for n in range(ell):
            if n < k:
                eq_rows.append(Z[n])
                eq_rhs.append(-self.emission[n] - z0[n])
            elif econ.scheme.disposal[n - k] == FREE:
                ub_rows.append(Z[n])
                ub_rhs.append(-z0[n])
            else:
                eq_rows.append(Z[n])
                eq_rhs.append(-z0[n])
        return (np.array(eq_rows).reshape(-1, nv), np.array(eq_rhs), np.array(ub_rows).reshape(-1, nv),
                np.array(ub_rhs))

    def optimum(self, objective_col: int | None, curve_r: dict[int, float]):
        A_eq, b_eq, A_ub, b_ub = self._rows(curve_r)
        c = np.zeros(len(self.cols))
        if objective_col is not None:
            c[objective_col] = -1.0
        res = linprog(c, A_eq=A_eq if len(b_eq) else None, b_eq=b_eq if len(b_eq) else None,
                      A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      bounds=self.bounds, method="highs")
        if res.status == 3:
            return INF
        if res.status != 0:
            return None
        return -res.fun

    def feasible(self, curve_r: dict[int, float]) -> bool:
        return self.optimum(None, curve_r) is not None

    def max_curve_level(self, j: int) -> float:
        """Largest feasible level of curve firm j (others idle), by bisection."""
        if not self.feasible({j: 0.0}):
            return 0.0
        hi = 1.0
        while self.feasible({j: hi}) and hi < 2.0**20:
            hi *= 2.0
        lo = 0.0 if hi > 1.0 or not self.feasible({j: hi}) else hi
        if lo == hi:
            return hi
        lo = hi / 2.0 if hi > 1.0 else 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.feasible({j: mid}):
                lo = mid
            else:
                hi = mid
        return lo

    def max_column(self, ci: int, curve_max: dict[int, float]) -> float:
        best = 0.0
        for curve_r in _corner_levels(curve_max):
            v = self.optimum(ci, curve_r)
            if v is not None:
                best = max(best, v)
        return best


def _corner_levels(curve_max: dict[int, float]):
    # a coordinate's bound is taken over a few curve levels; linear
    # programs are parametric in the level so the extremes are sampled finely
    if not curve_max:
        yield {}
        return
    keys = sorted(curve_max)
    grids = [np.linspace(0.0, curve_max[j], 41) for j in keys]
    for combo in product(*grids):
        yield dict(zip(keys, combo))


def _axis(hi: float, h: float) -> np.ndarray:
    if not math.isfinite(hi):
        raise GridExplosion("unbounded attainable coordinate")
    n = int(math.floor(hi / h + 1e-9))
    return np.array([round(i * h, 12) for i in range(n + 1)])


def constrained_pareto_check(economy: Economy, candidate, h: float = 0.05,
                             cap: int = DEFAULT_GRID_CAP) -> WelfareVerdict:
    """Search a grid of compliant pairs with the candidate's emission for a dominator.

    The grid covers activity levels, curve levels and slack use, and every
    consumption coordinate that can matter for utility. Coordinates a
    consumer does not value and that may be freely disposed of stay at their
    lower bound, since raising them never helps anybody. Finding nothing is
    a statement about this grid only.
    """
    econ = economy
    ell, k = econ.ell, econ.k
    xb, yb = _pair(candidate)
    emission = total_net_emission(econ, xb, yb)
    base_u = utilities(econ, (xb, yb))
    p = getattr(candidate, "p", None)
    route = hypothesis_route(econ, p)
    att = _Attainable(econ, emission)

    curve_firms = [j for j, f in enumerate(econ.firms) if isinstance(f.technology, ConcaveCurve)]
    curve_max = {j: att.max_curve_level(j) for j in curve_firms}

    firm_axes: list[list[np.ndarray]] = []
    for j, f in enumerate(econ.firms):
        t = f.technology
        if isinstance(t, LinearActivities):
            axes = []
            for i in range(len(t.activities)):
                ci = att.cols.index(("lin", j, i))
                axes.append(_axis(att.max_column(ci, curve_max), h))
            firm_axes.append(axes)
        elif isinstance(t, ConcaveCurve):
            axes = [_axis(curve_max[j], h)]
            if t.slack_commodity is not None:
                axes.append(_axis(t.slack_cap * curve_max[j], h))
            firm_axes.append(axes)
        else:
            firm_axes.append([])

    free_flags = [True] * k + [f == FREE for f in econ.scheme.disposal]
    cons_axes: list[list[np.ndarray]] = []
    for w, c in enumerate(econ.consumers):
        axes = []
        weights = c.utility.weights
        for n in range(ell):
            lo, hi = c.box.lo[n], c.box.hi[n]
            if hi <= lo or (weights[n] == 0 and free_flags[n] and n >= k):
                axes.append(np.array([lo]))
                continue
            top = att.max_column(att.cols.index(("x", w, n)), curve_max)
            top = min(top, hi)
            axes.append(lo + _axis(top - lo, h))
        cons_axes.append(axes)

    total = 1
    for axes in firm_axes + cons_axes:
        for a in axes:
            total *= len(a)
    if total > cap:
        raise GridExplosion(f"{total} grid points exceed the cap of {cap}")

    endow = econ.total_endowment()
    # consumer grid as one flat array of stacked bundles, shape (N, n_consumers, ell)
    cons_grid = np.array(list(product(*[a for axes in cons_axes for a in axes])), dtype=float)
    X = cons_grid.reshape(len(cons_grid), len(econ.consumers), ell)
    X_total = X.sum(axis=1)
    weights = np.array([c.utility.weights for c in econ.consumers])
    cons_values = np.einsum("anl,nl->an", X, weights)
    # utilities differ from consumption values by the same emission term for every compliant pair
    ext = np.array([c.utility.externality(emission) for c in econ.consumers])

    examined = 0
    flat_firm_axes = [a for axes in firm_axes for a in axes]
    for levels in product(*flat_firm_axes):
        ys, pos, slack = [], 0, {}
        for j, f in enumerate(econ.firms):
            t = f.technology
            if isinstance(t, LinearActivities):
                n_act = len(t.activities)
                ys.append(t.output(levels[pos:pos + n_act], ell))
                pos += n_act
            elif isinstance(t, ConcaveCurve):
                r = levels[pos]
                a = levels[pos + 1] if t.slack_commodity is not None else 0.0
                pos += 2 if t.slack_commodity is not None else 1
                if t.slack_commodity is not None and a > t.slack_cap * r + 1e-12:
                    ys.append(None)
                    continue
                ys.append(t.output(r, a))
                if t.slack_commodity is not None:
                    slack[j] = (r, a)
            else:
                ys.append(t.point(ell))
        if any(y is None for y in ys):
            continue
        y_total = np.sum(ys, axis=0)
        Z = X_total - endow - y_total
        examined += len(Z)
        ok = np.all(np.abs(-Z[:, :k] - emission) <= h / 2, axis=1)
        for n in range(k, ell):
            if free_flags[n]:
                ok &= Z[:, n] <= EQ_TOL
            else:
                ok &= np.abs(Z[:, n]) <= EQ_TOL
        better = ok & np.all(cons_values + ext >= base_u - MARGIN, axis=1) & np.any(
            cons_values + ext > base_u + MARGIN, axis=1)
        for idx in np.flatnonzero(better):
            xs = tuple(X[idx])
            cand = Candidate(xs, _close_emission_gap(econ, xs, ys, slack, emission), None)
            if _revalidate(econ, cand, emission, base_u):
                deltas = tuple(float(d) for d in utilities(econ, cand) - base_u)
                return DominatedBy(h, examined, route, cand, deltas)
    return NoDominatorFound(h, examined, route)


def _close_emission_gap(economy: Economy, xs, ys, slack: dict[int, tuple[float, float]], emission) -> tuple:
    """Move continuous slack use on regulated commodities so emission matches exactly.

    Grid pairs pass the filter within h/2 of the target emission; a curve
    firm's slack input can absorb that gap without touching any consumer.
    """
    ys = [np.array(y, dtype=float) for y in ys]
    gap = total_net_emission(economy, xs, ys) - emission
    for j, (r, a) in slack.items():
        tech = economy.firms[j].technology
        s = tech.slack_commodity
        if s >= economy.k or abs(gap[s]) <= EQ_TOL:
            continue
        new_a = a + gap[s]
        if -EQ_TOL <= new_a <= tech.slack_cap * r + EQ_TOL:
            ys[j] = tech.output(r, min(max(new_a, 0.0), tech.slack_cap * r))
            gap[s] = 0.0
    return tuple(ys)


def _revalidate(economy: Economy, cand: Candidate, emission, base_u) -> bool:
    """Independent strict re-check of a grid counterexample."""
    x, y = _pair(cand)
    k = economy.k
    if np.max(np.abs(total_net_emission(economy, x, y) - emission)) > EQ_TOL:
        return False
    z = sum(x) - economy.total_endowment() - sum(y)
    for i, flag in enumerate(economy.scheme.disposal):
        n = k + i
        if (flag == FREE and z[n] > EQ_TOL) or (flag != FREE and abs(z[n]) > EQ_TOL):
            return False
    for c, xi in zip(economy.consumers, x):
        if np.any(xi < np.array(c.box.lo) - EQ_TOL) or np.any(xi > np.array(c.box.hi) + EQ_TOL):
            return False
    for f, yj in zip(economy.firms, y):
        if not f.technology.contains(yj):
            return False
    return _dominates(utilities(economy, (x, y)), base_u, strong=False)


# -- quota sweep ----------------------------------------------------------------------


def default_quota_grid(lo: float = -2.0, hi: float = 0.0, step: float = 0.01) -> list[float]:
    """Interior points of (lo, hi) spaced by step."""
    n = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(1, n)]


@dataclass(frozen=True)
class SweepRow:
    m: float
    utilities: tuple[float, ...] | None
    note: str = ""


@dataclass(frozen=True)
class WelfareSweep:
    agents: tuple[str, ...]
    rows: tuple[SweepRow, ...]

    def valid(self) -> list[SweepRow]:
        return [r for r in self.rows if r.utilities is not None]

    def argmax(self, agent: int) -> tuple[float, float]:
        rows = self.valid()
        best = max(rows, key=lambda r: (r.utilities[agent], -r.m))
        return best.m, best.utilities[agent]

    def undominated(self) -> list[float]:
        rows = self.valid()
        out = []
        for r in rows:
            ur = np.array(r.utilities)
            if not any(_dominates(np.array(o.utilities), ur, strong=False) for o in rows if o is not r):
                out.append(r.m)
        return out

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m"] + [f"u_agent{a}" for a in self.agents])
        for r in self.rows:
            if r.utilities is None:
                w.writerow([fmt(r.m)] + [r.note] * len(self.agents))
            else:
                w.writerow([fmt(r.m)] + [fmt(u) for u in r.utilities])
        return buf.getvalue()


def quota_welfare_sweep(make_economy: Callable[[float], Economy], grid: Iterable[float] | None = None) -> WelfareSweep:
    """Equilibrium utilities of every consumer as the total quota varies."""
    grid = default_quota_grid() if grid is None else list(grid)
    rows = []
    agents: tuple[str, ...] = ()
    for m in grid:
        econ = make_economy(m)
        agents = tuple(c.id for c in econ.consumers)
        try:
            eq = solve_quota(econ)
        except QuotaEqError as exc:
            rows.append(SweepRow(m, None, f"error:{type(exc).__name__}"))
            continue
        members = eq.members()
        if not members:
            rows.append(SweepRow(m, None, "none"))
            continue
        us = [utilities(econ, c) for c in members]
        note = "" if all(np.allclose(u, us[0], atol=1e-9) for u in us) else "multiple"
        rows.append(SweepRow(m, tuple(float(v) for v in us[0]), note))
    return WelfareSweep(agents, tuple(rows))


# -- fuel tax against emission tax -------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    v: float
    fuel_electricity: float
    benchmark_electricity: float
    dominated: bool
    fuel_tax: float


COMPARISON_HEADER = ("v", "fuel_elec", "benchmark_elec", "dominated")


def comparison_csv(rows: Sequence[ComparisonRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPARISON_HEADER)
    for r in rows:
        w.writerow([fmt(r.v), fmt(r.fuel_electricity), fmt(r.benchmark_electricity), "yes" if r.dominated else "no"])
    return buf.getvalue()


def default_fuel_grid() -> list[float]:
    return [i / 200 for i in range(200)]


def _emission_row(model: rg.LinearModel, economy: Economy) -> tuple[np.ndarray, float]:
    """Regulated net emission as coefficient row and constant over model variables."""
    k0 = 0
    coef = sum(M[k0] for M in model.y_coef) - sum(M[k0] for M in model.x_coef)
    const = economy.total_endowment()[k0] + sum(c[k0] for c in model.y_const) - sum(c[k0] for c in model.x_const)
    return np.asarray(coef, dtype=float), float(const)


def _best_at_emission(economy: Economy, v: float, commodity: int):
    """Largest total consumption of a commodity over equilibria with emission v."""
    best = None
    for p, model in equilibrium_polytopes(economy):
        erow, econst = _emission_row(model, economy)
        obj = -(sum(M[commodity] for M in model.x_coef))
        A_eq = np.vstack([model.A_eq, erow[None, :]]) if model.A_eq.shape[0] else erow[None, :]
        b_eq = np.concatenate([model.b_eq, [v - econst]])
        bounds = [(lo, None if hi == INF else hi) for lo, hi in model.bounds]
        res = linprog(obj, A_eq=A_eq, b_eq=b_eq, A_ub=model.A_ub if model.A_ub.shape[0] else None,
                      b_ub=model.b_ub if model.A_ub.shape[0] else None, bounds=bounds, method="highs",
                      options=rg.HIGHS_OPTIONS)
        if res.status != 0:
            continue
        xs, ys = model.allocation(res.x)
        cand = Candidate(tuple(xs), tuple(ys), p)
        if not certify(economy, cand).passed:
            continue
        amount = float(sum(x[commodity] for x in xs))
        if best is None or amount > best[0] + 1e-12:
            best = (amount, cand)
    return best


def _global_quota_at(tax_economy: Economy, v: float) -> Economy:
    from .transforms import _global_quota_economy

    scheme = tax_economy.scheme
    if not isinstance(scheme, EmissionTaxScheme):
        raise TypeError("benchmark economy must carry an emission tax scheme")
    return _global_quota_economy(tax_economy, [-v] + [0.0] * (tax_economy.k - 1), dict(scheme.rebate),
                                 scheme.disposal)


def fuel_vs_emission_comparison(fuel_economy: Economy, tax_economy: Economy, v_grid: Iterable[float],
                                t_grid: Iterable[float] | None = None, commodity: int = -1) -> list[ComparisonRow]:
    """Consumption of a commodity at fuel tax equilibria against the emission tax benchmark.

    For each emission level v, the fuel side is the largest consumption over
    every fuel tax equilibrium (across the rate grid) whose emission is v. The
    benchmark is the equilibrium of the emission tax economy at the same
    emission, computed as the global quota equilibrium with quota -v, which
    is the same allocation.
    """
    t_grid = default_fuel_grid() if t_grid is None else list(t_grid)
    commodity = commodity % fuel_economy.ell
    base = fuel_economy.scheme
    economies = [fuel_economy.with_scheme(_with_rate(base, t)) for t in t_grid]
    rows = []
    for v in v_grid:
        v = float(v)
        fuel_best = None
        for t, econ in zip(t_grid, economies):
            found = _best_at_emission(econ, v, commodity)
            if found and (fuel_best is None or found[0] > fuel_best[0] + 1e-12):
                fuel_best = (found[0], found[1], t, econ)
        if fuel_best is None:
            raise NoEquilibriumAtEmission(f"no fuel tax equilibrium has emission {v:.12g}")
        quota_econ = _global_quota_at(tax_economy, v)
        bench = solve_quota(quota_econ)
        members = bench.members()
        if not members:
            raise NoEquilibriumAtEmission(f"no benchmark equilibrium at emission {v:.12g}")
        bench_c = max(members, key=lambda c: float(sum(x[commodity] for x in c.x)))
        bench_amount = float(sum(x[commodity] for x in bench_c.x))
        fuel_u = utilities(fuel_best[3], fuel_best[1])
        bench_u = utilities(quota_econ, bench_c)
        dominated = _dominates(bench_u, fuel_u, strong=False)
        rows.append(ComparisonRow(v, fuel_best[0], bench_amount, dominated, fuel_best[2]))
    return rows


def _with_rate(scheme, t: float):
    from dataclasses import replace

    return replace(scheme, rate=float(t))
