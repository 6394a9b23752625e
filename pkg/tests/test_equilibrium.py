from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotaeq.economy import Candidate, excess, total_net_emission
from quotaeq.equilibrium import (
    EMISSION_HEADER,
    certify,
    emission_correspondence,
    emission_csv,
    solve,
    solve_fuel,
    solve_quota,
    solve_tax,
)
from quotaeq.errors import RegimeExplosion
from quotaeq.scenarios import (
    example1_economy,
    example2_economy,
    example3_economy,
    example4_economy,
    example5_economy,
)

from .conftest import QUOTA_GRID


def _walras_gap(econ, cand) -> float:
    k = econ.k
    m = econ.scheme.total(k)
    return abs(float(cand.p @ excess(econ, cand.x, cand.y)) - float(cand.p[:k] @ m))


def _only(eq):
    assert len(eq.candidates) == 1 and eq.family is None
    return eq.candidates[0]


class TestCertify:
    def test_known_equilibrium_passes(self, gov_economy):
        c = Candidate(([0, 0, 0.25], [0, 0, 0.25]), ([0, 0, 0], [0.5, -0.5, 0.5]), [-0.5, 0, 0.5])
        report = certify(gov_economy, c)
        assert report.passed, report.lines()
        assert report.walras_value == pytest.approx(0.0, abs=1e-12)

    def test_unnormalised_prices_fail(self, gov_economy):
        c = Candidate(([0, 0, 0.25], [0, 0, 0.25]), ([0, 0, 0], [0.5, -0.5, 0.5]), [-1.0, 0, 1.0])
        names = [f.name for f in certify(gov_economy, c).failures()]
        assert names == ["priceNormalized"]

    def test_profitable_activity_fails_supply(self, gov_economy):
        c = Candidate(([0, 0, 0.25], [0, 0, 0.25]), ([0, 0, 0], [0.5, -0.5, 0.5]), [-0.3, 0, 0.7])
        report = certify(gov_economy, c)
        assert not report.passed
        assert any("profit unbounded" in f.detail for f in report.failures())

    def test_overspending_consumer_fails_demand(self, gov_economy):
        c = Candidate(([0, 0, 0.5], [0, 0, 0.0]), ([0, 0, 0], [0.5, -0.5, 0.5]), [-0.5, 0, 0.5])
        assert any(f.name.startswith("demandOptimal") for f in certify(gov_economy, c).failures())

    def test_lines_show_each_check(self, gov_economy):
        eq = solve_quota(gov_economy)
        lines = certify(gov_economy, eq.candidates[0]).lines()
        assert lines[0].startswith("pass priceNormalized")
        assert any(line.startswith("info walrasValue") for line in lines)


class TestQuota:
    @pytest.mark.parametrize("m", QUOTA_GRID)
    def test_global_quota_closed_form(self, m):
        econ = example1_economy(m)
        c = _only(solve_quota(econ))
        np.testing.assert_allclose(c.p, [-0.5, 0, 0.5], atol=1e-9)
        np.testing.assert_allclose(c.y[1], [-m, m, -m], atol=1e-9)
        assert c.x[0][2] == pytest.approx(-m / 2) and c.x[1][2] == pytest.approx(-m / 2)

    @pytest.mark.parametrize("m", QUOTA_GRID)
    def test_cap_and_trade_closed_form(self, m):
        c = _only(solve_quota(example1_economy(m, "cap-and-trade")))
        assert c.x[0][2] == pytest.approx(-m) and c.x[1][2] == pytest.approx(0.0, abs=1e-9)

    def test_curve_quota_uses_edge_search(self):
        econ = example3_economy(m=-1 / 3)
        c = _only(solve_quota(econ))
        assert certify(econ, c).passed
        assert float(total_net_emission(econ, c.x, c.y)[0]) == pytest.approx(1 / 3, abs=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(-199, -1), st.sampled_from(["government", "cap-and-trade"]))
    def test_walras_identity(self, hundredths, allocation):
        econ = example1_economy(hundredths / 100, allocation)
        for c in solve_quota(econ).members():
            assert certify(econ, c).passed
            assert _walras_gap(econ, c) <= 1e-9

    @settings(max_examples=15, deadline=None)
    @given(st.integers(-150, 0))
    def test_walras_identity_single_agent(self, hundredths):
        econ = example2_economy(m=hundredths / 100)
        for c in solve_quota(econ).members(11):
            assert _walras_gap(econ, c) <= 1e-9


class TestTax:
    def test_unique_below_boundary(self, tax_economy):
        c = _only(solve_tax(tax_economy))
        assert float(total_net_emission(tax_economy, c.x, c.y)[0]) == pytest.approx(1.0)

    def test_family_at_boundary(self):
        econ = example2_economy(t=0.25)
        eq = solve_tax(econ)
        assert eq.family is not None
        lo, hi = eq.emission_range(econ)
        assert lo == pytest.approx(0.0, abs=1e-9) and hi == pytest.approx(1.0)
        for c in eq.family.sample(11):
            assert certify(econ, c).passed

    def test_empty_above_boundary(self):
        eq = solve_tax(example2_economy(t=0.3))
        assert eq.empty and eq.reason

    @pytest.mark.parametrize("t", [0.0, 1 / 8, 1 / 6, 1 / 4])
    def test_curve_closed_form(self, t):
        econ = example3_economy(t=t)
        c = _only(solve_tax(econ))
        np.testing.assert_allclose(c.x[0], [0, 0, 1 - 4 * t * t], atol=1e-9)
        np.testing.assert_allclose(c.y[1], [-4 * t, 0, -4 * t * t], atol=1e-9)

    def test_emission_correspondence_csv(self):
        rows = emission_correspondence(example3_economy(t=0.0), [0, 0.125, 0.25])
        assert [r.lo for r in rows] == pytest.approx([1.0, 0.5, 0.0], abs=1e-9)
        text = emission_csv(rows)
        assert text.splitlines()[0] == ",".join(EMISSION_HEADER)
        assert text == emission_csv(emission_correspondence(example3_economy(t=0.0), [0, 0.125, 0.25]))


class TestFuel:
    @pytest.mark.parametrize("t", [0.0, 0.25, 0.49, 0.5, 0.9])
    def test_fuel_equilibria_exist(self, t):
        econ = example4_economy(t)
        eq = solve_fuel(econ)
        assert not eq.empty
        for c in eq.members():
            assert certify(econ, c).passed

    def test_no_production_reason(self):
        eq = solve_fuel(example5_economy(0.6))
        assert eq.empty and "zero feasible production" in eq.reason


class TestSolver:
    def test_dispatch(self, gov_economy, tax_economy, fuel_economy):
        for econ in (gov_economy, tax_economy, fuel_economy):
            assert not solve(econ).empty

    def test_cap_raises(self, gov_economy):
        with pytest.raises(RegimeExplosion):
            solve(gov_economy, cap=1)

    def test_deterministic(self, fuel_economy):
        a, b = solve(fuel_economy), solve(fuel_economy)
        assert len(a.members()) == len(b.members())
        for x, y in zip(a.members(), b.members()):
            assert x.identical(y)

    def test_unrestricted_signs_find_the_same_point(self, gov_economy):
        a = _only(solve_quota(gov_economy))
        b = solve_quota(gov_economy, restrict_signs=False)
        assert any(a.distance(c) <= 1e-9 for c in b.members())
