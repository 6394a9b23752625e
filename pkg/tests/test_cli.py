from __future__ import annotations

import json
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quotaeq.cli import main, parse_scenario, print_scenario
from quotaeq.errors import ParseError, ValidationError
from quotaeq.fileformat import candidate_dict, parse_candidate
from quotaeq.scenarios import example1_economy, example2_economy, example3_economy, example4_economy

SHIPPED = sorted(p.name for p in resources.files("quotaeq").joinpath("data/scenarios").iterdir())


def _shipped_text(name: str) -> str:
    return resources.files("quotaeq").joinpath("data/scenarios", name).read_text(encoding="utf-8")


class TestFileFormat:
    @pytest.mark.parametrize("name", SHIPPED)
    def test_shipped_files_round_trip(self, name):
        text = _shipped_text(name)
        econ = parse_scenario(text)
        assert print_scenario(econ) == text
        assert parse_scenario(print_scenario(econ)) == econ

    @settings(max_examples=30, deadline=None)
    @given(st.integers(-199, -1), st.sampled_from(["government", "cap-and-trade"]), st.integers(0, 100))
    def test_builders_round_trip(self, hundredths, alloc, pct):
        for econ in (example1_economy(hundredths / 100, alloc), example2_economy(t=pct / 100),
                     example3_economy(m=hundredths / 100), example4_economy(min(pct, 99) / 100)):
            assert parse_scenario(print_scenario(econ)) == econ

    def test_misspelt_key_reports_position(self):
        text = _shipped_text("example1_gov.scn").replace('"consumers"', '"consmuers"')
        with pytest.raises(ParseError) as info:
            parse_scenario(text)
        assert info.value.line == 6
        assert "consmuers" in str(info.value) and str(info.value).startswith("line 6, column")

    def test_shares_over_one_are_rejected(self):
        data = json.loads(_shipped_text("example1_gov.scn"))
        data["consumers"][0]["shares"]["0"] = 0.6
        with pytest.raises(ValidationError) as info:
            parse_scenario(json.dumps(data))
        assert any("sum to 1.1" in v for v in info.value.violations)

    def test_candidate_round_trip(self, gov_economy):
        from quotaeq.equilibrium import solve_quota

        c = solve_quota(gov_economy).candidates[0]
        back = parse_candidate(json.dumps(candidate_dict(c)), gov_economy)
        assert back.identical(c)

    def test_candidate_prices_are_rescaled(self, gov_economy):
        warnings = []
        text = json.dumps({"x": [[0, 0, 0.25], [0, 0, 0.25]], "y": [[0, 0, 0], [0.5, -0.5, 0.5]], "p": [-1, 0, 1]})
        c = parse_candidate(text, gov_economy, warn=warnings.append)
        assert list(c.p) == [-0.5, 0.0, 0.5]
        assert warnings


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCommands:
    def test_solve(self, capsys):
        code, out, _ = _run(capsys, "solve", "example1_gov.scn")
        assert code == 0 and out.startswith("equilibrium 1: p=(-0.5, 0, 0.5)")

    def test_solve_json(self, capsys):
        code, out, _ = _run(capsys, "solve", "example2_tax.scn", "--set", "t=0.25", "--json")
        assert code == 0 and json.loads(out)["family"]["hi"] == pytest.approx(1.0)

    def test_no_equilibrium(self, capsys):
        code, out, _ = _run(capsys, "solve", "example2_tax.scn", "--set", "t=0.3")
        assert code == 1 and "no emission tax equilibrium at t=0.3" in out

    def test_missing_file(self, capsys):
        code, _, err = _run(capsys, "solve", "nowhere.scn")
        assert code == 2 and "no such scenario" in err

    def test_bad_setting(self, capsys):
        assert _run(capsys, "solve", "example1_gov.scn", "--set", "t=0.1")[0] == 2

    def test_cap_exceeded(self, capsys):
        assert _run(capsys, "solve", "example1_gov.scn", "--cap", "1")[0] == 3

    def test_parse_error_exit(self, capsys, tmp_path):
        bad = tmp_path / "bad.scn"
        bad.write_text(_shipped_text("example1_gov.scn").replace('"consumers"', '"consmuers"'))
        code, _, err = _run(capsys, "solve", str(bad))
        assert code == 2 and "line 6" in err

    def test_set_quota_rescales(self, capsys):
        code, out, _ = _run(capsys, "solve", "example1_cat.scn", "--set", "m=-1")
        assert code == 0 and "x[1]=(0, 0, 1)" in out

    def test_certify(self, capsys, tmp_path):
        good = tmp_path / "good.json"
        good.write_text(json.dumps({"x": [[0, 0, 0.25], [0, 0, 0.25]], "y": [[0, 0, 0], [0.5, -0.5, 0.5]],
                                    "p": [-0.5, 0, 0.5]}))
        code, out, _ = _run(capsys, "certify", "example1_gov.scn", str(good))
        assert code == 0 and out.rstrip().endswith("overall: pass")
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"x": [[0, 0, 0.25], [0, 0, 0.25]], "y": [[0, 0, 0], [0.5, -0.5, 0.5]],
                                   "p": [-0.3, 0, 0.7]}))
        code, out, _ = _run(capsys, "certify", "example1_gov.scn", str(bad))
        assert code == 1 and "profit unbounded" in out

    def test_convert(self, capsys, tmp_path):
        out_path = tmp_path / "tax.scn"
        code, _, _ = _run(capsys, "convert", "example1_cat.scn", "--to", "tax", "--out", str(out_path))
        assert code == 0
        econ = parse_scenario(out_path.read_text())
        assert econ.scheme.kind == "tax" and econ.scheme.rate == (0.5,)
        code, out, err = _run(capsys, "convert", "example2_tax.scn", "--to", "global-quota")
        assert code == 0 and parse_scenario(out).scheme.kind == "quota"
        assert "certifies: True" in err

    def test_welfare(self, capsys):
        code, out, _ = _run(capsys, "welfare", "example1_gov.scn", "--grid", "0.05")
        assert code == 0 and "no dominator on grid step 0.05" in out

    def test_golden(self, capsys):
        code, out, _ = _run(capsys, "golden", "--example", "1")
        assert code == 0 and all(line.startswith("PASS") for line in out.splitlines())

    def test_list_scenarios(self, capsys):
        code, out, _ = _run(capsys, "--list-scenarios")
        assert code == 0 and len(out.splitlines()) == 5


class TestSweepDeterminism:
    CASES = [
        ("sweep", "example3.scn", "--param", "tax", "--from", "0", "--to", "0.25", "--steps", "26"),
        ("sweep", "example2_tax.scn", "--param", "tax", "--from", "0", "--to", "0.5", "--steps", "101"),
        ("sweep", "example1_gov.scn", "--param", "quota", "--from", "-1.99", "--to", "-0.01", "--steps", "199"),
        ("sweep", "example1_cat.scn", "--param", "quota", "--from", "-1.5", "--to", "-0.1", "--steps", "15"),
        ("sweep", "example4_fuel.scn", "--param", "emission", "--from", "0", "--to", "1", "--steps", "5",
         "--benchmark", "example2_tax.scn"),
    ]

    @pytest.mark.parametrize("argv", CASES, ids=["tax3", "tax2", "quota-gov", "quota-cat", "emission"])
    def test_repeated_runs_are_byte_identical(self, argv, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main([*argv, "--out", str(a)]) == 0
        assert main([*argv, "--out", str(b)]) == 0
        capsys.readouterr()
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().count(b"\n") == int(argv[argv.index("--steps") + 1]) + 1

    def test_emission_sweep_values(self, capsys):
        code, out, _ = _run(capsys, "sweep", "example3.scn", "--param", "tax", "--from", "0", "--to", "0.25",
                            "--steps", "6")
        rows = [line.split(",") for line in out.splitlines()[1:]]
        assert code == 0
        for t, lo, hi, count in rows:
            assert float(lo) == pytest.approx(1 - 4 * float(t), abs=1e-9) and count == "1"
