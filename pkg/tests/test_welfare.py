from __future__ import annotations

import numpy as np
import pytest

from quotaeq.economy import Candidate
from quotaeq.equilibrium import solve_quota
from quotaeq.scenarios import example1_economy, example2_economy, example3_economy, example4_economy
from quotaeq.welfare import (
    COMPARISON_HEADER,
    DominatedBy,
    NoDominatorFound,
    comparison_csv,
    constrained_pareto_check,
    default_quota_grid,
    fuel_vs_emission_comparison,
    hypothesis_route,
    pareto_dominates,
    quota_welfare_sweep,
    utilities,
)


def _wasteful(cand: Candidate, amount: float) -> Candidate:
    x = [np.array(v) for v in cand.x]
    x[0][2] -= amount
    return Candidate(tuple(x), cand.y, cand.p)


class TestUtilities:
    def test_externality_enters_every_agent(self, gov_economy):
        c = solve_quota(gov_economy).candidates[0]
        np.testing.assert_allclose(utilities(gov_economy, c), [0.125, 0.125])

    def test_pareto_dominates(self, gov_economy):
        c = solve_quota(gov_economy).candidates[0]
        worse = _wasteful(c, 0.1)
        assert pareto_dominates(gov_economy, c, worse)
        assert not pareto_dominates(gov_economy, c, worse, strong=True)
        assert not pareto_dominates(gov_economy, worse, c)

    def test_hypothesis_route(self, gov_economy):
        c = solve_quota(gov_economy).candidates[0]
        assert hypothesis_route(gov_economy, c.p) == "none"
        econ = example2_economy(m=-0.5)
        assert hypothesis_route(econ, solve_quota(econ).candidates[0].p) == "positive-prices"


class TestOracle:
    @pytest.mark.parametrize("alloc", ["government", "cap-and-trade"])
    @pytest.mark.parametrize("m", [-0.1, -1.0])
    def test_equilibrium_is_undominated(self, m, alloc):
        econ = example1_economy(m, alloc)
        verdict = constrained_pareto_check(econ, solve_quota(econ).candidates[0], h=0.05)
        assert isinstance(verdict, NoDominatorFound)
        assert 0 < verdict.points_examined <= 10**6
        assert verdict.step == 0.05

    def test_single_agent_equilibrium(self):
        econ = example2_economy(m=-0.5)
        verdict = constrained_pareto_check(econ, solve_quota(econ).candidates[0])
        assert not verdict.dominated

    @pytest.mark.parametrize("econ", [example2_economy(m=-0.5), example3_economy(m=-1 / 3)])
    def test_wasteful_pair_is_dominated(self, econ):
        c = solve_quota(econ).candidates[0]
        verdict = constrained_pareto_check(econ, _wasteful(c, 0.2))
        assert isinstance(verdict, DominatedBy)
        assert max(verdict.deltas) > 0 and min(verdict.deltas) >= -1e-9

    def test_deterministic_counterexample(self):
        econ = example2_economy(m=-0.5)
        c = _wasteful(solve_quota(econ).candidates[0], 0.2)
        a, b = constrained_pareto_check(econ, c), constrained_pareto_check(econ, c)
        assert a.counterexample.identical(b.counterexample)
        assert a.points_examined == b.points_examined


@pytest.fixture(scope="module")
def gov_sweep():
    return quota_welfare_sweep(lambda m: example1_economy(m, "government"))


@pytest.fixture(scope="module")
def cat_sweep():
    return quota_welfare_sweep(lambda m: example1_economy(m, "cap-and-trade"))


class TestSweep:
    def test_grid_is_open_interval(self):
        grid = default_quota_grid()
        assert len(grid) == 199 and grid[0] == -1.99 and grid[-1] == -0.01

    def test_government_peak(self, gov_sweep):
        m, u = gov_sweep.argmax(0)
        assert m == pytest.approx(-0.5, abs=0.01) and u == pytest.approx(0.125, abs=1e-6)
        for row in gov_sweep.valid():
            assert row.utilities[0] == pytest.approx(-row.m / 2 - row.m**2 / 2, abs=1e-9)

    def test_cap_and_trade(self, cat_sweep):
        m, _ = cat_sweep.argmax(0)
        assert m == pytest.approx(-1.0, abs=0.01)
        grid = default_quota_grid()
        assert cat_sweep.undominated() == [g for g in grid if g >= -1.0]

    def test_csv_is_repeatable(self, gov_sweep):
        text = gov_sweep.csv()
        assert text.splitlines()[0] == "m,u_agent1,u_agent2"
        assert text == quota_welfare_sweep(lambda m: example1_economy(m, "government")).csv()


class TestFuelComparison:
    def test_benchmark_consumes_more(self):
        v_grid = [0.0, 0.25, 0.5, 0.75, 1.0]
        t_grid = [i / 20 for i in range(20)]
        rows = fuel_vs_emission_comparison(example4_economy(0.0), example2_economy(t=0.1), v_grid, t_grid)
        for r in rows:
            assert r.benchmark_electricity == pytest.approx((1 + r.v) / 2, abs=1e-9)
            assert r.fuel_electricity <= r.benchmark_electricity + 1e-9
        assert [r.dominated for r in rows] == [False, True, True, True, False]
        text = comparison_csv(rows)
        assert text.splitlines()[0] == ",".join(COMPARISON_HEADER)
