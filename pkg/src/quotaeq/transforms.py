"""Rewrites between quota, emission tax and shifted economies.

Each rewrite builds a new economy and carries an equilibrium of the old one
across; the carried candidate certifies in the new economy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ._numeric import exact_sum
from .economy import (
    GOVERNMENT,
    Candidate,
    ConcaveCurve,
    Economy,
    EmissionTaxScheme,
    Firm,
    LinearActivities,
    QuotaScheme,
    Singleton0,
)
from .equilibrium import certify
from .errors import NotAnEquilibrium, UnsupportedTechnology, ZeroQuotaRent

RENT_TOL = 1e-12


@dataclass(frozen=True)
class TransformResult:
    economy: Economy
    candidate: Candidate
    provenance: str


def _require_certified(economy: Economy, candidate: Candidate) -> None:
    report = certify(economy, candidate)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise NotAnEquilibrium(f"candidate fails certification: {names}")


def _require_quota(economy: Economy) -> QuotaScheme:
    if not isinstance(economy.scheme, QuotaScheme):
        raise TypeError("expected a quota economy")
    return economy.scheme


def rebate_shares(economy: Economy, p) -> tuple[dict[str, float], str]:
    """Each consumer's share of total quota rent, plus the rule used.

    With one regulated commodity the rent ratio does not depend on prices,
    so the quota ratio is used directly.
    """
    scheme = _require_quota(economy)
    k = economy.k
    p = np.asarray(p, dtype=float)
    total_m = scheme.total(k)
    if k == 1:
        denom = float(total_m[0])
        if abs(denom) <= RENT_TOL:
            raise ZeroQuotaRent("total quota is zero")
        shares = {}
        for c in economy.consumers:
            num = sum(theta * float(scheme.quota(j, k)[0]) for j, theta in c.shares.items())
            shares[c.id] = num / denom + 0.0
        return shares, "quota ratio (one regulated commodity)"
    denom = float(p[:k] @ total_m)
    if abs(denom) <= RENT_TOL:
        raise ZeroQuotaRent(f"quota rent p.m = {denom:.12g}")
    shares = {}
    for c in economy.consumers:
        num = sum(theta * float(p[:k] @ scheme.quota(j, k)) for j, theta in c.shares.items())
        shares[c.id] = num / denom + 0.0
    return shares, "quota rent ratio at equilibrium prices"


def _global_quota_economy(economy: Economy, total_m, gov_shares: dict[str, float], disposal) -> Economy:
    """Move all quota to the government firm, which consumers own by gov_shares."""
    firms = list(economy.firms)
    if not any(f.id == GOVERNMENT for f in firms):
        firms.insert(0, Firm(GOVERNMENT, Singleton0()))
    consumers = []
    for c in economy.consumers:
        shares = dict(c.shares)
        shares[GOVERNMENT] = gov_shares.get(c.id, 0.0)
        consumers.append(replace(c, shares=shares))
    quotas = {GOVERNMENT: tuple(float(v) for v in total_m)}
    return Economy(economy.commodities, tuple(consumers), tuple(firms), QuotaScheme(quotas, disposal))


def to_global_quota(economy: Economy, candidate: Candidate) -> TransformResult:
    """Same equilibrium, with every quota held by the government firm."""
    scheme = _require_quota(economy)
    _require_certified(economy, candidate)
    shares, rule = rebate_shares(economy, candidate.p)
    new = _global_quota_economy(economy, scheme.total(economy.k), shares, scheme.disposal)
    return TransformResult(new, candidate, f"global quota; government shares by {rule}")


def quota_to_tax(economy: Economy, candidate: Candidate) -> TransformResult:
    """Emission tax at the quota price, rebated in proportion to quota rents."""
    scheme = _require_quota(economy)
    _require_certified(economy, candidate)
    k = economy.k
    p = np.asarray(candidate.p, dtype=float)
    rebate, rule = rebate_shares(economy, p)
    rate = tuple(float(-v) + 0.0 for v in p[:k])
    note = f"emission tax at t = -p_regulated; rebate by {rule}"
    if any(v < 0 for v in rebate.values()):
        note += "; negative rebate share (some quota rent is negative)"
    new = Economy(economy.commodities, economy.consumers, economy.firms,
                  EmissionTaxScheme(rate, rebate, scheme.disposal))
    return TransformResult(new, candidate, note)


def tax_to_quota(economy: Economy, candidate: Candidate) -> TransformResult:
    """Global quota equal to the realised emission, government owned by rebate shares."""
    scheme = economy.scheme
    if not isinstance(scheme, EmissionTaxScheme):
        raise TypeError("expected an emission tax economy")
    _require_certified(economy, candidate)
    k = economy.k
    # exact summation so that a quota -> tax -> quota trip returns the original m bit for bit
    total_m = []
    for n in range(k):
        parts = [c.e[n] for c in economy.consumers] + [float(y[n]) for y in candidate.y]
        parts += [-float(x[n]) for x in candidate.x]
        total_m.append(-exact_sum(parts) + 0.0)
    new = _global_quota_economy(economy, total_m, dict(scheme.rebate), scheme.disposal)
    y = list(candidate.y)
    if len(new.firms) != len(economy.firms):
        y.insert(0, np.zeros(economy.ell))
    carried = Candidate(candidate.x, tuple(y), candidate.p)
    return TransformResult(new, carried, "global quota at the realised emission; government shares = rebate shares")


def _embed(m, ell: int) -> np.ndarray:
    out = np.zeros(ell)
    out[: len(m)] = m
    return out


@dataclass(frozen=True)
class ShiftResult:
    economy: Economy
    pullback: Callable[[Candidate], Candidate]
    push: Callable[[Candidate], Candidate]
    provenance: str


def shift_by_quota(economy: Economy) -> ShiftResult:
    """Fold each firm's quota into its technology and zero every quota.

    A firm's profit p.y + p_regulated.m becomes p.(y + m) in the shifted
    economy, so budgets and supply problems coincide.
    """
    scheme = _require_quota(economy)
    k, ell = economy.k, economy.ell
    deltas = [_embed(scheme.quota(f.id, k), ell) for f in economy.firms]
    firms = []
    for f, d in zip(economy.firms, deltas):
        tech = f.technology
        if not np.any(d):
            firms.append(f)
            continue
        if not isinstance(tech, (Singleton0, LinearActivities, ConcaveCurve)):
            raise UnsupportedTechnology(f"cannot shift technology of firm {f.id}")
        firms.append(Firm(f.id, tech.shifted(d)))
    zero = {j: (0.0,) * k for j in scheme.quotas}
    # the shifted economy's compliance region pins regulated excess at zero
    new = Economy(economy.commodities, economy.consumers, tuple(firms), QuotaScheme(zero, scheme.disposal))

    def push(c: Candidate) -> Candidate:
        return Candidate(c.x, tuple(np.asarray(y) + d for y, d in zip(c.y, deltas)), c.p)

    def pullback(c: Candidate) -> Candidate:
        return Candidate(c.x, tuple(np.asarray(y) - d for y, d in zip(c.y, deltas)), c.p)

    return ShiftResult(new, pullback, push, "technologies shifted by firm quotas; quotas zeroed")
