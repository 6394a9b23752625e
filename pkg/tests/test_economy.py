from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotaeq.economy import (
    INF,
    Candidate,
    ConcaveCurve,
    LinearActivities,
    Singleton0,
    excess,
    in_region,
    region_residuals,
    total_net_emission,
    validate_economy,
)
from quotaeq.errors import DimensionMismatch


def _candidate(m: float) -> Candidate:
    x = ([0.0, 0.0, -m / 2], [0.0, 0.0, -m / 2])
    y = ([0.0, 0.0, 0.0], [-m, m, -m])
    return Candidate(x, y, [-0.5, 0.0, 0.5])


class TestAccounting:
    def test_excess_and_emission(self, gov_economy):
        c = _candidate(-0.5)
        z = excess(gov_economy, c.x, c.y)
        np.testing.assert_allclose(z, [-0.5, -1.5, 0.0])
        np.testing.assert_allclose(total_net_emission(gov_economy, c.x, c.y), [0.5])

    def test_region_pins_regulated_excess(self, gov_economy):
        c = _candidate(-0.5)
        assert in_region(gov_economy, excess(gov_economy, c.x, c.y))
        off = _candidate(-0.4)
        assert not in_region(gov_economy, excess(gov_economy, off.x, off.y))

    def test_no_disposal_rejects_surplus(self, gov_economy):
        res = region_residuals(gov_economy, [-0.5, -1.0, -0.25])
        assert res[1] == 0.0
        assert res[2] == pytest.approx(0.25)

    def test_tax_region_is_nonpositive(self, tax_economy):
        assert in_region(tax_economy, [-3.0, -1.0, -1.0])
        assert not in_region(tax_economy, [0.1, 0.0, 0.0])

    def test_dimension_mismatch(self, gov_economy):
        with pytest.raises(DimensionMismatch):
            excess(gov_economy, ([0.0, 0.0, 0.0],), ([0.0] * 3, [0.0] * 3))


class TestValidation:
    def test_examples_are_valid(self, gov_economy, cat_economy, tax_economy, curve_economy, fuel_economy):
        for econ in (gov_economy, cat_economy, tax_economy, curve_economy, fuel_economy):
            assert validate_economy(econ) == []

    def test_shares_must_sum_to_one(self, gov_economy):
        c1 = gov_economy.consumers[0]
        bad = replace(gov_economy, consumers=(replace(c1, shares={"0": 0.6, "1": 1.0}),) + gov_economy.consumers[1:])
        problems = validate_economy(bad)
        assert any("shares of firm 0 sum to 1.1" in p for p in problems)

    def test_unknown_firm_share(self, gov_economy):
        c1 = gov_economy.consumers[0]
        bad = replace(gov_economy, consumers=(replace(c1, shares={**c1.shares, "9": 0.0}),) + gov_economy.consumers[1:])
        assert any("unknown firm 9" in p for p in validate_economy(bad))


class TestTechnologies:
    def test_linear_contains(self):
        tech = LinearActivities(((1.0, -1.0, 1.0),), (INF,))
        assert tech.contains([2.0, -2.0, 2.0])
        assert not tech.contains([1.0, -1.0, 0.5])
        assert not tech.contains([-1.0, 1.0, -1.0])

    def test_bounded_linear(self):
        tech = LinearActivities(((1.0, 0.0),), (1.0,))
        assert tech.contains([1.0, 0.0])
        assert not tech.contains([1.5, 0.0])

    def test_curve_contains_slack(self):
        tech = ConcaveCurve(((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.0, 0.0, -1.0)), slack_commodity=0, slack_cap=2.0)
        assert tech.contains([-1.0, 0.0, -0.25])
        assert tech.contains([-0.5, 0.0, -0.25])
        assert tech.contains([0.0, 0.0, 0.0])
        assert not tech.contains([-1.5, 0.0, -0.25])

    def test_shift_moves_singleton(self):
        moved = Singleton0().shifted(np.array([-0.5, 0.0, 0.0]))
        assert moved.contains([-0.5, 0.0, 0.0])
        assert not moved.contains([0.0, 0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    def test_shift_is_translation(self, r, d):
        tech = LinearActivities(((1.0, -1.0, 1.0),), (INF,))
        y = tech.output([r], 3)
        assert tech.shifted(np.array(d)).contains(y + np.array(d), tol=1e-7)


class TestCandidate:
    def test_distance_and_identity(self):
        a, b = _candidate(-0.5), _candidate(-0.5)
        assert a.identical(b)
        assert a.distance(_candidate(-0.4)) == pytest.approx(0.1)

    def test_arrays_are_read_only(self):
        c = _candidate(-0.5)
        with pytest.raises(ValueError):
            c.p[0] = 1.0
