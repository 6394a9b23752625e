from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotaeq.economy import GOVERNMENT, Candidate, QuotaScheme, total_net_emission
from quotaeq.equilibrium import certify, solve_quota, solve_tax
from quotaeq.errors import NotAnEquilibrium, ZeroQuotaRent
from quotaeq.scenarios import example1_economy, example2_economy, example3_economy
from quotaeq.transforms import quota_to_tax, rebate_shares, shift_by_quota, tax_to_quota, to_global_quota

from .conftest import QUOTA_GRID

ALLOCATIONS = ("government", "cap-and-trade")


def _quota_cases():
    for m in QUOTA_GRID:
        for alloc in ALLOCATIONS:
            yield example1_economy(m, alloc)
    yield example2_economy(m=-0.5)
    yield example3_economy(m=-1 / 3)


class TestQuotaToTax:
    @pytest.mark.parametrize("econ", list(_quota_cases()))
    def test_outputs_recertify(self, econ):
        for c in solve_quota(econ).members():
            for transform in (quota_to_tax, to_global_quota):
                out = transform(econ, c)
                assert certify(out.economy, out.candidate).passed, out.provenance

    @pytest.mark.parametrize("econ", list(_quota_cases()))
    def test_round_trip_is_exact(self, econ):
        c = solve_quota(econ).members()[0]
        taxed = quota_to_tax(econ, c)
        back = tax_to_quota(taxed.economy, taxed.candidate)
        assert np.array_equal(back.economy.scheme.total(1), econ.scheme.total(1))
        assert back.candidate.identical(c)
        assert certify(back.economy, back.candidate).passed

    def test_tax_rate_is_minus_quota_price(self, gov_economy):
        c = solve_quota(gov_economy).candidates[0]
        out = quota_to_tax(gov_economy, c)
        assert out.economy.scheme.rate == (0.5,)
        assert out.economy.scheme.rebate == {"1": 0.5, "2": 0.5}

    def test_cap_and_trade_rebates_to_owner(self, cat_economy):
        shares, _ = rebate_shares(cat_economy, [-0.5, 0, 0.5])
        assert shares == {"1": 1.0, "2": 0.0}

    def test_zero_quota_has_no_rent(self):
        econ = example2_economy(m=0.0)
        c = solve_quota(econ).members()[0]
        with pytest.raises(ZeroQuotaRent):
            quota_to_tax(econ, c)

    def test_rejects_non_equilibrium(self, gov_economy):
        bad = Candidate(([0, 0, 0.5], [0, 0, 0.5]), ([0, 0, 0], [0.5, -0.5, 0.5]), [-0.5, 0, 0.5])
        with pytest.raises(NotAnEquilibrium):
            quota_to_tax(gov_economy, bad)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(-199, -1), st.sampled_from(ALLOCATIONS))
    def test_rebate_shares_sum_to_one(self, hundredths, alloc):
        econ = example1_economy(hundredths / 100, alloc)
        shares, _ = rebate_shares(econ, solve_quota(econ).candidates[0].p)
        assert sum(shares.values()) == pytest.approx(1.0, abs=1e-12)


class TestTaxToQuota:
    @pytest.mark.parametrize("t", [0.0, 0.1, 0.2])
    def test_adds_government_firm(self, t):
        econ = example2_economy(t=t)
        c = solve_tax(econ).candidates[0]
        out = tax_to_quota(econ, c)
        assert out.economy.firms[0].id == GOVERNMENT
        assert isinstance(out.economy.scheme, QuotaScheme)
        emission = total_net_emission(econ, c.x, c.y)
        assert out.economy.scheme.total(1)[0] == pytest.approx(-emission[0])
        assert certify(out.economy, out.candidate).passed

    @pytest.mark.parametrize("t", [0.0, 1 / 8, 1 / 6, 1 / 4])
    def test_curve_economy(self, t):
        econ = example3_economy(t=t)
        c = solve_tax(econ).candidates[0]
        out = tax_to_quota(econ, c)
        assert certify(out.economy, out.candidate).passed

    def test_family_members(self):
        econ = example2_economy(t=0.25)
        for c in solve_tax(econ).family.sample(5):
            out = tax_to_quota(econ, c)
            assert certify(out.economy, out.candidate).passed


class TestShift:
    @pytest.mark.parametrize("alloc", ALLOCATIONS)
    @pytest.mark.parametrize("m", QUOTA_GRID)
    def test_pullback_matches_original(self, m, alloc):
        econ = example1_economy(m, alloc)
        shifted = shift_by_quota(econ)
        original = solve_quota(econ).candidates[0]
        moved = solve_quota(shifted.economy).candidates
        assert len(moved) == 1
        assert certify(shifted.economy, moved[0]).passed
        assert shifted.pullback(moved[0]).distance(original) <= 1e-9
        assert certify(econ, shifted.pullback(moved[0])).passed
        assert certify(shifted.economy, shifted.push(original)).passed

    def test_shifted_quotas_are_zero(self, cat_economy):
        scheme = shift_by_quota(cat_economy).economy.scheme
        assert np.all(scheme.total(1) == 0.0)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(0, 3), st.floats(-2, 0))
    def test_profit_identity(self, p, level, m):
        econ = example1_economy(-0.5, "cap-and-trade", check_range=False)
        econ = econ.with_scheme(QuotaScheme({GOVERNMENT: (0.0,), "1": (m,)}, econ.scheme.disposal))
        shifted = shift_by_quota(econ)
        y = [np.zeros(3), level * np.array([1.0, -1.0, 1.0])]
        pushed = shifted.push(Candidate(([0, 0, 0], [0, 0, 0]), y, p))
        p = np.asarray(p)
        for j, (before, after) in enumerate(zip(y, pushed.y)):
            quota = econ.scheme.quota(econ.firms[j].id, 1)
            assert float(p @ after) == pytest.approx(float(p @ before) + float(p[:1] @ quota), abs=1e-12)
            assert shifted.economy.firms[j].technology.contains(after, tol=1e-9)
