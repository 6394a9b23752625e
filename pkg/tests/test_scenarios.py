from __future__ import annotations

import pytest

from quotaeq.economy import total_net_emission, validate_economy
from quotaeq.equilibrium import solve_tax
from quotaeq.errors import ParameterOutOfRange
from quotaeq.scenarios import (
    BUILDERS,
    build_example,
    example1_economy,
    example2_economy,
    example3_economy,
    list_scenarios,
    load_expectations,
    rational,
    run_golden_suite,
)
from quotaeq.welfare import utilities


class TestBuilders:
    @pytest.mark.parametrize("n", sorted(BUILDERS))
    def test_bundles_are_valid(self, n):
        bundle = build_example(n)
        assert validate_economy(bundle.economy) == []
        assert bundle.expectations

    def test_parameter_ranges(self):
        with pytest.raises(ParameterOutOfRange):
            example1_economy(0.5)
        with pytest.raises(ParameterOutOfRange):
            example2_economy(t=0.1, m=-0.5)
        with pytest.raises(ParameterOutOfRange):
            example2_economy()
        with pytest.raises(ParameterOutOfRange):
            build_example(6)

    def test_quota_variant_adds_government(self):
        econ = example3_economy(m=-0.25)
        assert econ.firms[0].id == "0"
        assert econ.consumers[0].shares["0"] == 1.0

    def test_listing(self):
        lines = list_scenarios()
        assert len(lines) == 5 and lines[0].startswith("example1 ")


class TestExpectations:
    def test_values_are_rational_strings(self):
        for rec in load_expectations():
            assert rec["id"] and rec["example"] in BUILDERS
        assert rational("2/3") == pytest.approx(2 / 3)
        assert rational(["1/2", "-1"]) == [0.5, -1.0]

    def test_golden_suite_passes(self):
        report = run_golden_suite()
        assert report.passed, report.lines()
        assert len(report.results) == len(load_expectations())

    def test_golden_suite_detects_perturbation(self):
        report = run_golden_suite(examples=[1, 2], perturb=1e-2)
        assert report.results and not any(r.passed for r in report.results)


class TestExistenceBoundary:
    def test_nonempty_iff_below_quarter(self):
        for i in range(101):
            t = i * 0.005
            eq = solve_tax(example2_economy(t=t))
            assert eq.empty == (t > 0.25 + 1e-9), t

    def test_emission_is_one_below_boundary(self):
        for t in (0.0, 0.05, 0.1, 0.2, 0.245):
            econ = example2_economy(t=t)
            c = solve_tax(econ).candidates[0]
            assert float(total_net_emission(econ, c.x, c.y)[0]) == pytest.approx(1.0, abs=1e-6)


class TestUnimodalWelfare:
    def test_peak_at_one_sixth(self):
        grid = [i * 0.01 for i in range(26)] + [1 / 6]
        values = {}
        for t in sorted(grid):
            econ = example3_economy(t=t)
            values[t] = float(utilities(econ, solve_tax(econ).candidates[0])[0])
        ts = sorted(values)
        peak = max(ts, key=values.get)
        assert peak == pytest.approx(1 / 6)
        assert values[peak] == pytest.approx(15 / 18, abs=1e-6)
        i = ts.index(peak)
        assert all(values[a] <= values[b] + 1e-12 for a, b in zip(ts[:i], ts[1:i + 1]))
        assert all(values[a] >= values[b] - 1e-12 for a, b in zip(ts[i:], ts[i + 1:]))
