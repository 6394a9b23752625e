"""Regime enumeration engine behind the equilibrium solvers.

Prices are enumerated first. A candidate price is a vertex of the
arrangement cut out by the sign pattern, the normalisation, pinned tax
prices, zero-profit hyperplanes of linear activities and consumer tie
hyperplanes. At a fixed price every remaining condition is linear in the
quantities (activity levels, slack use, consumption), so the equilibrium
allocations at that price form a polytope found by linear programming.

Curve technologies can tie the price to quantities (a quota pins the
curve's level, whose first-order condition then pins a price). Those prices
lie on one-dimensional edges of the arrangement and are located by a
bracketed search for zero infeasibility along each edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .behavior import PRICE_ZERO, SupplyResult, _classify_fixed, supply
from .economy import (
    FREE,
    INF,
    CobbDouglas,
    ConcaveCurve,
    Economy,
    EmissionTaxScheme,
    FuelTaxScheme,
    LinearActivities,
    QuotaScheme,
)
from .errors import RegimeExplosion, UnboundedDemand, UnsupportedTechnology

DEFAULT_REGIME_CAP = 10**6
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
SIGN_TOL = 1e-12
RANGE_TOL = 1e-9


@dataclass
class Setup:
    economy: Economy
    kind: str
    norm_total: float
    fuel: tuple[int, float] | None
    pins: dict[int, float]
    sign_options: list[tuple[int, ...]]
    pool: list[tuple[np.ndarray, float, str]]
    curve_rows: list[np.ndarray] = field(default_factory=list)

    @property
    def ell(self) -> int:
        return self.economy.ell


def build_setup(economy: Economy, restrict_signs: bool = True) -> Setup:
    ell, k = economy.ell, economy.k
    scheme = economy.scheme
    pins: dict[int, float] = {}
    fuel = None
    norm_total = 1.0
    if isinstance(scheme, QuotaScheme):
        kind = "quota"
    elif isinstance(scheme, EmissionTaxScheme):
        kind = "tax"
        for i, t in enumerate(scheme.rate):
            pins[i] = -float(t)
    elif isinstance(scheme, FuelTaxScheme):
        kind = "fuel"
        fuel = (scheme.commodity, scheme.rate)
        norm_total = 1.0 - scheme.rate
    else:
        raise TypeError(f"unknown scheme {type(scheme).__name__}")

    wanted_unbounded = set()
    for c in economy.consumers:
        for n, (wgt, hi) in enumerate(zip(c.utility.weights, c.box.hi)):
            if wgt > 0 and hi == INF:
                wanted_unbounded.add(n)

    options: list[tuple[int, ...]] = []
    for n in range(ell):
        if n in pins:
            v = pins[n]
            options.append((0,) if v == 0 else ((1,) if v > 0 else (-1,)))
            continue
        if not restrict_signs:
            opts = (-1, 0, 1)
        elif n < k:
            opts = (-1, 0)
        elif scheme.disposal[n - k] == FREE:
            opts = (0, 1)
        else:
            opts = (-1, 0, 1)
        if n in wanted_unbounded:
            opts = tuple(o for o in opts if o > 0)
        options.append(opts)

    pool: list[tuple[np.ndarray, float, str]] = []
    curve_rows: list[np.ndarray] = []
    for f in economy.firms:
        tech = f.technology
        if isinstance(tech, LinearActivities):
            for i, a in enumerate(tech.activities):
                a = np.array(a, dtype=float)
                rhs = -fuel[1] * a[fuel[0]] if fuel else 0.0
                pool.append((a, rhs, f"zero-profit:{f.id}:{i}"))
        elif isinstance(tech, ConcaveCurve):
            _, c1, c2 = tech.coeff_arrays()
            curve_rows.append(c1.copy())
            curve_rows.append(c2.copy())
            if tech.slack_commodity is not None:
                row = c1.copy()
                row[tech.slack_commodity] -= tech.slack_cap
                curve_rows.append(row)
    for c in economy.consumers:
        if isinstance(c.utility.consumption, CobbDouglas):
            continue
        w = c.utility.weights
        wanted = [n for n in range(ell) if w[n] > 0]
        for n, m in combinations(wanted, 2):
            row = np.zeros(ell)
            row[n], row[m] = w[m], -w[n]
            pool.append((row, 0.0, f"tie:{c.id}:{n}:{m}"))
    return Setup(economy, kind, norm_total, fuel, pins, options, pool, curve_rows)


def _base_rows(setup: Setup, sigma) -> tuple[list[np.ndarray], list[float]]:
    ell = setup.ell
    rows, rhs = [], []
    norm = np.array(sigma, dtype=float)
    rows.append(norm)
    rhs.append(setup.norm_total)
    for n, v in setup.pins.items():
        r = np.zeros(ell)
        r[n] = 1.0
        rows.append(r)
        rhs.append(v)
    for n, s in enumerate(sigma):
        if s == 0 and n not in setup.pins:
            r = np.zeros(ell)
            r[n] = 1.0
            rows.append(r)
            rhs.append(0.0)
    return rows, rhs


def _sign_ok(p: np.ndarray, sigma) -> bool:
    for v, s in zip(p, sigma):
        if s > 0 and v <= SIGN_TOL:
            return False
        if s < 0 and v >= -SIGN_TOL:
            return False
        if s == 0 and abs(v) > SIGN_TOL:
            return False
    return True


def count_regimes(setup: Setup) -> int:
    total = 0
    for sigma in product(*setup.sign_options):
        rows, _ = _base_rows(setup, sigma)
        need = max(0, setup.ell - np.linalg.matrix_rank(np.array(rows)))
        total += math.comb(len(setup.pool), need) + math.comb(len(setup.pool), max(need - 1, 0))
    return total


def price_vertices(setup: Setup, cap: int = DEFAULT_REGIME_CAP) -> list[np.ndarray]:
    """All sign-consistent prices pinned by some choice of active hyperplanes."""
    if count_regimes(setup) > cap:
        raise RegimeExplosion(f"more than {cap} regimes")
    ell = setup.ell
    found: dict[tuple, np.ndarray] = {}
    for sigma in product(*setup.sign_options):
        rows, rhs = _base_rows(setup, sigma)
        A0, b0 = np.array(rows), np.array(rhs)
        r0 = np.linalg.matrix_rank(A0)
        need = ell - r0
        if need < 0:
            continue
        for combo in combinations(range(len(setup.pool)), need):
            A = np.vstack([A0] + [setup.pool[i][0][None, :] for i in combo])
            b = np.concatenate([b0, [setup.pool[i][1] for i in combo]])
            if np.linalg.matrix_rank(A) < ell:
                continue
            p, *_ = np.linalg.lstsq(A, b, rcond=None)
            if np.max(np.abs(A @ p - b)) > 1e-10:
                continue
            p = np.where(np.abs(p) <= SIGN_TOL, 0.0, p)
            if not _sign_ok(p, sigma):
                continue
            key = tuple(np.round(p, 10))
            found.setdefault(key, p)
    return [found[key] for key in sorted(found)]


def price_edges(setup: Setup) -> list[tuple[np.ndarray, np.ndarray, float, float, tuple]]:
    """One-dimensional price segments (p0 + s d, s in [lo, hi]) per sign pattern."""
    ell = setup.ell
    out = []
    seen = set()
    for sigma in product(*setup.sign_options):
        rows, rhs = _base_rows(setup, sigma)
        A0, b0 = np.array(rows), np.array(rhs)
        r0 = np.linalg.matrix_rank(A0)
        need = ell - 1 - r0
        if need < 0:
            continue
        for combo in combinations(range(len(setup.pool)), need):
            A = np.vstack([A0] + [setup.pool[i][0][None, :] for i in combo])
            b = np.concatenate([b0, [setup.pool[i][1] for i in combo]])
            if np.linalg.matrix_rank(A) != ell - 1:
                continue
            p0, *_ = np.linalg.lstsq(A, b, rcond=None)
            if np.max(np.abs(A @ p0 - b)) > 1e-10:
                continue
            d = np.linalg.svd(A)[2][-1]
            lo, hi = -INF, INF
            ok = True
            for n, s in enumerate(sigma):
                if s == 0:
                    continue
                # need s * (p0_n + t d_n) >= 0
                a, c = s * d[n], s * p0[n]
                if abs(a) < 1e-15:
                    if c < -SIGN_TOL:
                        ok = False
                    continue
                bound = -c / a
                if a > 0:
                    lo = max(lo, bound)
                else:
                    hi = min(hi, bound)
            if not ok or not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo <= 1e-12:
                continue
            key = (tuple(np.round(p0 + lo * d, 9)), tuple(np.round(p0 + hi * d, 9)))
            if key in seen:
                continue
            seen.add(key)
            out.append((p0, d, lo, hi, sigma))
    return out


# -- quantity stage --------------------------------------------------------------


@dataclass
class DemandRegime:
    fixed: dict[int, float]
    free: list[int]
    budget: str  # "eq" or "le"
    cobb_douglas: bool = False


def demand_regimes(consumer, p: np.ndarray) -> list[DemandRegime]:
    """Pieces of the demand graph at fixed prices; income stays symbolic."""
    lo, hi = consumer.box.lo, consumer.box.hi
    weights = consumer.utility.weights
    fixed: dict[int, float] = {}
    marginal: list[int] = []
    for n in range(len(p)):
        level = _classify_fixed(weights[n], p[n], lo[n], hi[n], n)
        if level is None:
            marginal.append(n)
        else:
            fixed[n] = level
    if isinstance(consumer.utility.consumption, CobbDouglas):
        if not marginal:
            return [DemandRegime(fixed, [], "le")]
        for n in marginal:
            if lo[n] != 0 or hi[n] != INF:
                raise UnsupportedTechnology("Cobb-Douglas demand in the solver needs boxes [0, inf) on wanted goods")
        return [DemandRegime(fixed, marginal, "eq", cobb_douglas=True)]
    ratio = {n: weights[n] / p[n] for n in marginal}
    order = sorted(marginal, key=lambda n: (-ratio[n], n))
    groups: list[list[int]] = []
    for n in order:
        if groups and abs(ratio[groups[-1][0]] - ratio[n]) <= 1e-12 * max(1.0, ratio[n]):
            groups[-1].append(n)
        else:
            groups.append([n])
    out = []
    for i, g in enumerate(groups):
        before = [n for grp in groups[:i] for n in grp]
        if any(hi[n] == INF for n in before):
            break
        fx = dict(fixed)
        for n in before:
            fx[n] = hi[n]
        for grp in groups[i + 1:]:
            for n in grp:
                fx[n] = lo[n]
        out.append(DemandRegime(fx, list(g), "eq"))
    if all(hi[n] < INF for n in marginal):
        fx = dict(fixed)
        for n in marginal:
            fx[n] = hi[n]
        out.append(DemandRegime(fx, [], "le"))
    return out


@dataclass
class LinearModel:
    """Equilibrium conditions at a fixed price as a linear program."""

    n_var: int
    bounds: list[tuple[float, float]]
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    x_const: list[np.ndarray]
    x_coef: list[np.ndarray]
    y_const: list[np.ndarray]
    y_coef: list[np.ndarray]

    def allocation(self, q: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        xs = [c + M @ q for c, M in zip(self.x_const, self.x_coef)]
        ys = [c + M @ q for c, M in zip(self.y_const, self.y_coef)]
        return xs, ys


def build_model(setup: Setup, p: np.ndarray, supplies: list[SupplyResult], regimes: list[DemandRegime]) -> LinearModel:
    econ = setup.economy
    ell, k = econ.ell, econ.k
    scheme = econ.scheme
    bounds: list[tuple[float, float]] = []
    y_const, y_cols = [], []
    firm_slices = []
    for res in supplies:
        face = res.face
        start = len(bounds)
        for lo, hi in zip(face.lo, face.hi):
            bounds.append((float(lo), float(hi)))
        firm_slices.append((start, len(bounds)))
        y_const.append(face.offset.copy())
    x_const, x_slices = [], []
    for c, reg in zip(econ.consumers, regimes):
        base = np.array(c.box.lo, dtype=float)
        for n, v in reg.fixed.items():
            base[n] = v
        start = len(bounds)
        for n in reg.free:
            base[n] = 0.0
            bounds.append((c.box.lo[n], c.box.hi[n]))
        x_slices.append((start, len(bounds)))
        x_const.append(base)
    nv = len(bounds)

    y_coef = []
    for res, (a, b) in zip(supplies, firm_slices):
        M = np.zeros((ell, nv))
        M[:, a:b] = res.face.M
        y_coef.append(M)
    x_coef = []
    for reg, (a, b) in zip(regimes, x_slices):
        M = np.zeros((ell, nv))
        for j, n in enumerate(reg.free):
            M[n, a + j] = 1.0
        x_coef.append(M)

    eq_rows, eq_rhs, ub_rows, ub_rhs = [], [], [], []

    def add(row_coef, const, sense):
        # row_coef . q + const (sense) 0
        if sense == "eq":
            eq_rows.append(row_coef)
            eq_rhs.append(-const)
        else:
            ub_rows.append(row_coef)
            ub_rhs.append(-const)

    total_e = econ.total_endowment()
    z_const = sum(x_const) - total_e - sum(y_const)
    z_coef = sum(x_coef) - sum(y_coef)
    emission_const = -z_const[:k]
    emission_coef = -z_coef[:k]
    firm_index = {f.id: j for j, f in enumerate(econ.firms)}

    for c, reg, xc, xM in zip(econ.consumers, regimes, x_const, x_coef):
        w_const = float(p @ c.e)
        w_coef = np.zeros(nv)
        for fid, theta in c.shares.items():
            j = firm_index[fid]
            w_const += theta * float(p @ y_const[j])
            w_coef += theta * (p @ y_coef[j])
            if setup.kind == "quota":
                m = scheme.quota(fid, k)
                w_const += theta * float(p[:k] @ m)
        if setup.kind == "tax":
            lam = scheme.rebate.get(c.id, 0.0)
            t = np.array(scheme.rate, dtype=float)
            w_const += lam * float(t @ emission_const)
            w_coef += lam * (t @ emission_coef)
        spend_const = float(p @ xc)
        spend_coef = p @ xM
        if reg.cobb_douglas:
            # A p_n x_n = alpha_n (w - cost of the fixed goods), A = sum of wanted exponents
            weights = np.array(c.utility.weights, dtype=float)
            A = sum(weights[n] for n in reg.free)
            for n in reg.free:
                row = A * p[n] * xM[n] - weights[n] * w_coef
                const = -weights[n] * (w_const - spend_const)
                add(row, const, "eq")
        add(spend_coef - w_coef, spend_const - w_const, reg.budget)

    for n in range(ell):
        row, const = z_coef[n], z_const[n]
        if n < k:
            if setup.kind == "quota":
                add(row, const - scheme.total(k)[n], "eq")
            else:
                add(row, const, "le")
        elif scheme.disposal[n - k] == FREE:
            add(row, const, "le")
        else:
            add(row, const, "eq")

    for res, (a, b) in zip(supplies, firm_slices):
        G = res.face.G
        for gi in range(G.shape[0]):
            row = np.zeros(nv)
            row[a:b] = G[gi]
            add(row, -res.face.h[gi], "le")

    def mat(rows):
        return np.array(rows, dtype=float).reshape(-1, nv)

    return LinearModel(nv, bounds, mat(eq_rows), np.array(eq_rhs, dtype=float), mat(ub_rows),
                       np.array(ub_rhs, dtype=float), x_const, x_coef, y_const, y_coef)


def _lp(model: LinearModel, c: np.ndarray):
    kwargs = {}
    if model.A_eq.shape[0]:
        kwargs["A_eq"], kwargs["b_eq"] = model.A_eq, model.b_eq
    if model.A_ub.shape[0]:
        kwargs["A_ub"], kwargs["b_ub"] = model.A_ub, model.b_ub
    bounds = [(lo, None if hi == INF else hi) for lo, hi in model.bounds]
    return linprog(c, bounds=bounds, method="highs", options=HIGHS_OPTIONS, **kwargs)


def feasible_point(model: LinearModel) -> np.ndarray | None:
    if model.n_var == 0:
        q = np.zeros(0)
        return q if residual(model, q) <= RANGE_TOL else None
    res = _lp(model, np.zeros(model.n_var))
    if res.status != 0:
        return None
    return polish(model, res.x)


def residual(model: LinearModel, q: np.ndarray) -> float:
    r = 0.0
    if model.A_eq.shape[0]:
        r = max(r, float(np.max(np.abs(model.A_eq @ q - model.b_eq))))
    if model.A_ub.shape[0]:
        r = max(r, float(np.max(model.A_ub @ q - model.b_ub, initial=0.0)))
    return r


def polish(model: LinearModel, q: np.ndarray) -> np.ndarray:
    """Re-solve the active constraints exactly to remove simplex round-off."""
    rows, rhs = [], []
    for i in range(model.n_var):
        lo, hi = model.bounds[i]
        e = np.zeros(model.n_var)
        e[i] = 1.0
        if abs(q[i] - lo) <= 1e-9:
            rows.append(e)
            rhs.append(lo)
        elif hi < INF and abs(q[i] - hi) <= 1e-9:
            rows.append(e)
            rhs.append(hi)
    if model.A_eq.shape[0]:
        rows.extend(model.A_eq)
        rhs.extend(model.b_eq)
    if model.A_ub.shape[0]:
        act = np.abs(model.A_ub @ q - model.b_ub) <= 1e-9
        rows.extend(model.A_ub[act])
        rhs.extend(model.b_ub[act])
    if not rows:
        return q
    A, b = np.array(rows), np.array(rhs)
    if np.linalg.matrix_rank(A) < model.n_var:
        return q
    q2, *_ = np.linalg.lstsq(A, b, rcond=None)
    return q2 if residual(model, q2) <= max(residual(model, q), 1e-12) else q


def polytope_points(model: LinearModel, q0: np.ndarray) -> tuple[int, list[np.ndarray]]:
    """Dimension of the feasible set and its extreme points along each axis."""
    pts = [q0]
    unbounded = False
    for i in range(model.n_var):
        lo, hi = model.bounds[i]
        if hi - lo <= 0:
            continue
        for sgn in (1.0, -1.0):
            c = np.zeros(model.n_var)
            c[i] = sgn
            res = _lp(model, c)
            if res.status == 3:
                unbounded = True
                continue
            if res.status == 0:
                pts.append(polish(model, res.x))
    P = np.array(pts)
    diffs = P - P[0]
    if diffs.size == 0:
        return 0, [q0]
    sv = np.linalg.svd(diffs, compute_uv=False)
    dim = int(np.sum(sv > 1e-9))
    if unbounded:
        dim = max(dim, 1)
    uniq: list[np.ndarray] = []
    for q in pts:
        if not any(np.max(np.abs(q - u)) <= 1e-9 for u in uniq):
            uniq.append(q)
    return dim, uniq


def segment_endpoints(model: LinearModel, pts: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    P = np.array(pts)
    diffs = P - P[0]
    direction = np.linalg.svd(diffs)[2][0]
    ends = []
    for sgn in (-1.0, 1.0):
        res = _lp(model, sgn * direction)
        ends.append(polish(model, res.x) if res.status == 0 else P[np.argmin(sgn * (P @ direction))])
    return ends[0], ends[1]


def infeasibility(model: LinearModel) -> float:
    """Smallest total constraint violation (0 iff feasible)."""
    n = model.n_var
    me, mu = model.A_eq.shape[0], model.A_ub.shape[0]
    c = np.concatenate([np.zeros(n), np.ones(2 * me + mu)])
    A_eq = np.hstack([model.A_eq, np.eye(me), -np.eye(me), np.zeros((me, mu))]) if me else None
    A_ub = np.hstack([model.A_ub, np.zeros((mu, 2 * me)), -np.eye(mu)]) if mu else None
    bounds = [(lo, None if hi == INF else hi) for lo, hi in model.bounds] + [(0, None)] * (2 * me + mu)
    res = linprog(c, A_eq=A_eq, b_eq=model.b_eq if me else None, A_ub=A_ub,
                  b_ub=model.b_ub if mu else None, bounds=bounds, method="highs", options=HIGHS_OPTIONS)
    return float(res.fun) if res.status == 0 else INF


def stage_inputs(setup: Setup, p: np.ndarray):
    """Supply faces and demand regimes at p, or a failure tag."""
    supplies = []
    for f in setup.economy.firms:
        try:
            res = supply(f, p, setup.fuel)
        except UnsupportedTechnology:
            return None, None, "unsupported"
        if not res.bounded():
            return None, None, "unbounded-profit"
        supplies.append(res)
    regimes = []
    for c in setup.economy.consumers:
        try:
            regimes.append(demand_regimes(c, p))
        except UnboundedDemand:
            return None, None, "unbounded-demand"
    return supplies, regimes, None


def edge_search(setup: Setup, edge, grid: int = 8) -> list[np.ndarray]:
    """Prices on an edge where the quantity conditions become feasible."""
    p0, d, lo, hi, sigma = edge
    cuts = [lo, hi]
    rows = [(r, rhs) for r, rhs, _ in setup.pool] + [(r, 0.0) for r in setup.curve_rows]
    for r, rhs in rows:
        slope = float(r @ d)
        if abs(slope) > 1e-14:
            s = (rhs - float(r @ p0)) / slope
            if lo < s < hi:
                cuts.append(s)
    cuts = sorted(set(cuts))
    found = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 1e-12:
            continue

        def phi(s: float) -> float:
            p = p0 + s * d
            supplies, regimes, fail = stage_inputs(setup, p)
            if fail:
                return INF
            best = INF
            for combo in product(*regimes):
                best = min(best, infeasibility(build_model(setup, p, supplies, list(combo))))
                if best <= 1e-13:
                    break
            return best

        mid = phi(0.5 * (a + b))
        if not math.isfinite(mid):
            continue
        ss = np.linspace(a, b, grid + 2)[1:-1]
        vals = [phi(s) for s in ss]
        i = int(np.argmin(vals))
        left = ss[i - 1] if i > 0 else a
        right = ss[i + 1] if i < len(ss) - 1 else b
        res = minimize_scalar(phi, bounds=(left, right), method="bounded",
                              options={"xatol": 1e-15, "maxiter": 400})
        s_best, v_best = (res.x, res.fun) if res.fun <= vals[i] else (ss[i], vals[i])
        if v_best <= 1e-9:
            found.append(p0 + s_best * d)
    return found
