"""The five worked economies and their expected results.

Every economy has three commodities (CO2, coal, electricity); CO2 is the
single regulated commodity. Expected values live in data/expectations.json
as exact rationals so the golden suite compares against the source numbers
rather than decimal transcriptions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Any, Callable

import numpy as np

from .economy import (
    FREE,
    GOVERNMENT,
    INF,
    NO_DISPOSAL,
    BoxSet,
    CommoditySpace,
    ConcaveCurve,
    Consumer,
    Economy,
    EmissionTaxScheme,
    Firm,
    FuelTaxScheme,
    Linear,
    LinearActivities,
    QuotaScheme,
    Singleton0,
    UtilitySpec,
    total_net_emission,
    validate_economy,
)
from .errors import ParameterOutOfRange, QuotaEqError

LABELS = ("co2", "coal", "electricity")
BURN = (1.0, -1.0, 1.0)
SEQUESTER = (-2.0, 0.0, -1.0)
GOV_ALLOC = "government"
CAT_ALLOC = "cap-and-trade"


def _consumer(cid: str, shares: dict[str, float], coeffs=(0.0, 0.0, 1.0), gamma: float = 1.0) -> Consumer:
    return Consumer(
        id=cid,
        box=BoxSet((0.0, 0.0, 0.0), (0.0, INF, INF)),
        endowment=(0.0, 1.0, 0.0),
        shares=shares,
        utility=UtilitySpec(Linear(coeffs), gamma),
    )


def _space() -> CommoditySpace:
    return CommoditySpace(LABELS, 1)


def example1_economy(m: float, allocation: str = GOV_ALLOC, check_range: bool = True) -> Economy:
    """Two identical agents, one coal-burning firm, quota m on CO2."""
    if check_range and not -2.0 < m < 0.0:
        raise ParameterOutOfRange(f"example 1 needs m in (-2, 0), got {m}")
    if allocation not in (GOV_ALLOC, CAT_ALLOC):
        raise ParameterOutOfRange(f"allocation must be {GOV_ALLOC!r} or {CAT_ALLOC!r}")
    quotas = {GOVERNMENT: (m,), "1": (0.0,)} if allocation == GOV_ALLOC else {GOVERNMENT: (0.0,), "1": (m,)}
    firms = (Firm(GOVERNMENT, Singleton0()), Firm("1", LinearActivities((BURN,), (INF,))))
    consumers = (
        _consumer("1", {GOVERNMENT: 0.5, "1": 1.0}),
        _consumer("2", {GOVERNMENT: 0.5, "1": 0.0}),
    )
    return Economy(_space(), consumers, firms, QuotaScheme(quotas, (FREE, NO_DISPOSAL)))


def _example2_firms(curve: bool) -> tuple[Firm, ...]:
    if curve:
        seq = ConcaveCurve(((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, -1.0)), slack_commodity=0, slack_cap=2.0)
    else:
        seq = LinearActivities((SEQUESTER,), (INF,))
    return (Firm("1", LinearActivities((BURN,), (INF,))), Firm("2", seq))


def _single_agent_economy(curve: bool, t: float | None, m: float | None) -> Economy:
    firms = _example2_firms(curve)
    if m is not None:
        firms = (Firm(GOVERNMENT, Singleton0()),) + firms
        shares = {GOVERNMENT: 1.0, "1": 1.0, "2": 1.0}
        scheme = QuotaScheme({GOVERNMENT: (m,)}, (FREE, FREE))
    else:
        shares = {"1": 1.0, "2": 1.0}
        scheme = EmissionTaxScheme((t,), {"1": 1.0}, (FREE, FREE))
    return Economy(_space(), (_consumer("1", shares),), firms, scheme)


def _tax_or_quota(n: int, t, m) -> tuple[float | None, float | None]:
    if (t is None) == (m is None):
        raise ParameterOutOfRange(f"example {n} takes exactly one of t or m")
    if t is not None and not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"example {n} needs t in [0, 1], got {t}")
    if m is not None and m > 0.0:
        raise ParameterOutOfRange(f"example {n} needs m <= 0, got {m}")
    return t, m


def example2_economy(t: float | None = None, m: float | None = None) -> Economy:
    """One agent, a coal burner and a linear sequestration firm."""
    t, m = _tax_or_quota(2, t, m)
    return _single_agent_economy(False, t, m)


def example3_economy(t: float | None = None, m: float | None = None) -> Economy:
    """As example 2 but sequestration has rising marginal electricity cost."""
    t, m = _tax_or_quota(3, t, m)
    return _single_agent_economy(True, t, m)


def example4_economy(t: float) -> Economy:
    """Example 2's economy under a fuel tax on coal."""
    if not 0.0 <= t < 1.0:
        raise ParameterOutOfRange(f"example 4 needs a fuel tax in [0, 1), got {t}")
    consumers = (_consumer("1", {"1": 1.0, "2": 1.0}),)
    return Economy(_space(), consumers, _example2_firms(False), FuelTaxScheme(1, t, {"1": 1.0}, (FREE, FREE)))


def example5_economy(t: float) -> Economy:
    """Two agents, one of whom also values coal, and no sequestration."""
    if not 0.0 <= t < 1.0:
        raise ParameterOutOfRange(f"example 5 needs a fuel tax in [0, 1), got {t}")
    consumers = (
        _consumer("1", {"1": 0.5}),
        _consumer("2", {"1": 0.5}, coeffs=(0.0, 1.0, 1.0)),
    )
    firms = (Firm("1", LinearActivities((BURN,), (INF,))),)
    return Economy(_space(), consumers, firms, FuelTaxScheme(1, t, {"1": 0.5, "2": 0.5}, (FREE, FREE)))


# -- expectations ------------------------------------------------------------------


def rational(value) -> float:
    if value is None:
        return math.nan
    if isinstance(value, list):
        return [rational(v) for v in value]
    return float(Fraction(str(value)))


def load_expectations() -> list[dict[str, Any]]:
    text = resources.files("quotaeq").joinpath("data/expectations.json").read_text(encoding="utf-8")
    return json.loads(text)["claims"]


@dataclass(frozen=True)
class ScenarioBundle:
    example: int
    params: dict[str, Any]
    economy: Economy
    expectations: tuple[dict[str, Any], ...]


def build_example(n: int, **params) -> ScenarioBundle:
    """Economy of worked example n plus the expectation records citing it."""
    if n == 1:
        m = params.get("m", -0.5)
        econ = example1_economy(m, params.get("allocation", GOV_ALLOC))
    elif n in (2, 3):
        t, m = params.get("t"), params.get("m")
        if t is None and m is None:
            t = 0.1 if n == 2 else 1 / 6
        econ = BUILDERS[n](t, m)
    elif n == 4:
        econ = example4_economy(params.get("t", 0.3))
    elif n == 5:
        econ = example5_economy(params.get("t", 0.6))
    else:
        raise ParameterOutOfRange(f"no example {n}; choose 1 to 5")
    problems = validate_economy(econ)
    if problems:
        raise AssertionError("; ".join(problems))
    recs = tuple(r for r in load_expectations() if r["example"] == n)
    return ScenarioBundle(n, dict(params), econ, recs)


SCENARIO_SCHEMAS = {
    1: "m:(-2,0),allocation:{government,cap-and-trade}",
    2: "t:[0,1]|m:(-inf,0]",
    3: "t:[0,1]|m:(-inf,0]",
    4: "t:[0,1)",
    5: "t:[0,1)",
}


def list_scenarios() -> list[str]:
    recs = load_expectations()
    lines = []
    for n in range(1, 6):
        ids = ",".join(r["id"] for r in recs if r["example"] == n)
        lines.append(f"example{n} {SCENARIO_SCHEMAS[n]} {ids}")
    return lines


# -- golden suite ------------------------------------------------------------------


@dataclass(frozen=True)
class ClaimResult:
    claim: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.claim} residual={self.residual:.3g} {self.detail}".rstrip()


@dataclass(frozen=True)
class GoldenReport:
    results: tuple[ClaimResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]


def _diff(actual, expected) -> float:
    a = np.asarray(actual, dtype=float)
    e = np.asarray(expected, dtype=float)
    return float(np.max(np.abs(a - e), initial=0.0))


def _unique(eq, what: str):
    if len(eq.candidates) != 1 or eq.family is not None:
        raise AssertionError(f"{what}: expected one equilibrium, found {len(eq.candidates)}"
                             f"{' and a family' if eq.family is not None else ''}")
    return eq.candidates[0]


def _emission(econ, c) -> float:
    return float(total_net_emission(econ, c.x, c.y)[0])


def _utility(econ, c, i: int = 0) -> float:
    return econ.consumers[i].utility(c.x[i], total_net_emission(econ, c.x, c.y))


def _check_point(econ, c, case: dict[str, Any], perturb: float) -> float:
    res = 0.0
    if "p" in case:
        res = max(res, _diff(np.asarray(c.p) + perturb, rational(case["p"])))
    if "x" in case:
        res = max(res, _diff(np.array(c.x), rational(case["x"])))
    if "y" in case:
        res = max(res, _diff(np.array(c.y), rational(case["y"])))
    if "emission" in case:
        res = max(res, abs(_emission(econ, c) - rational(case["emission"])))
    if "utility" in case:
        res = max(res, abs(_utility(econ, c) - rational(case["utility"])))
    return res


def _run_claim(rec: dict[str, Any], perturb: float) -> float:
    from .equilibrium import solve
    from .welfare import fuel_vs_emission_comparison

    worst = 0.0
    n = rec["example"]
    for case in rec["cases"]:
        params = {k: (rational(v) if k in ("m", "t") else v) for k, v in case["params"].items()}
        if rec["id"] == "fuel-vs-emission-consumption":
            v = rational(case["v"])
            row = fuel_vs_emission_comparison(example4_economy(0.0), example2_economy(t=0.0), [v])[0]
            worst = max(worst, abs(row.fuel_electricity - rational(case["fuel_electricity"])) + perturb)
            worst = max(worst, abs(row.benchmark_electricity - rational(case["benchmark_electricity"])))
            continue
        bundle = build_example(n, **params)
        econ = bundle.economy
        eq = solve(econ)
        expect = case["expect"]
        if expect == "empty":
            if not eq.empty:
                raise AssertionError(f"{params}: expected no equilibrium")
            if "reason" in case and case["reason"] not in (eq.reason or ""):
                raise AssertionError(f"{params}: reason {eq.reason!r}")
            worst = max(worst, perturb)
        elif expect == "unique":
            worst = max(worst, _check_point(econ, _unique(eq, str(params)), case, perturb))
        elif expect == "exists":
            if eq.empty:
                raise AssertionError(f"{params}: expected an equilibrium")
            best = min(_check_point(econ, c, case, perturb) for c in eq.members())
            worst = max(worst, best)
        elif expect == "family":
            if eq.family is None:
                raise AssertionError(f"{params}: expected a family")
            lo, hi = rational(case["emission_range"])
            worst = max(worst, abs(eq.family.lo - lo), abs(eq.family.hi - hi))
            worst = max(worst, _diff(np.asarray(eq.family.start.p) + perturb, rational(case["p"])))
        else:
            raise AssertionError(f"unknown expectation kind {expect!r}")
    return worst


def run_golden_suite(examples=None, tol: float = 1e-6, perturb: float = 0.0) -> GoldenReport:
    """Re-derive every expected value with the solvers and compare.

    `perturb` adds a constant to every compared quantity; the suite must
    then report failures, which makes the harness testable.
    """
    out = []
    for rec in load_expectations():
        if examples is not None and rec["example"] not in examples:
            continue
        try:
            res = _run_claim(rec, perturb)
            out.append(ClaimResult(rec["id"], res <= tol, res))
        except (AssertionError, QuotaEqError) as exc:
            out.append(ClaimResult(rec["id"], False, math.inf, str(exc)))
    return GoldenReport(tuple(out))


BUILDERS: dict[int, Callable[..., Economy]] = {
    1: example1_economy,
    2: example2_economy,
    3: example3_economy,
    4: example4_economy,
    5: example5_economy,
}
