"""Command-line front end.

Exit codes: 0 success, 1 no equilibrium (or a failed certification or
golden run), 2 input error, 3 an internal enumeration cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ._numeric import fmt, parse_number
from .economy import (
    GOVERNMENT,
    Economy,
    EmissionTaxScheme,
    FuelTaxScheme,
    QuotaScheme,
    total_net_emission,
    validate_economy,
)
from .equilibrium import EquilibriumSet, certify, emission_correspondence, emission_csv, solve
from .errors import (
    GridExplosion,
    ParameterOutOfRange,
    ParseError,
    QuotaEqError,
    RegimeExplosion,
    ValidationError,
)
from .fileformat import candidate_dict, parse_candidate, parse_scenario, print_scenario
from .scenarios import list_scenarios, run_golden_suite
from .transforms import quota_to_tax, tax_to_quota, to_global_quota
from .welfare import comparison_csv, constrained_pareto_check, fuel_vs_emission_comparison, quota_welfare_sweep

EXIT_OK, EXIT_NONE, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3

__all__ = ["main", "parse_scenario", "print_scenario", "RunConfig"]


@dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple[str, ...]
    grid_from: float | None = None
    grid_to: float | None = None
    steps: int | None = None
    tol: float = 1e-9
    out: str | None = None
    cap: int = 10**6

    def __post_init__(self):
        if self.steps is not None and self.steps < 2:
            raise ValueError("steps must be at least 2")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


class InputError(Exception):
    pass


def resolve_scenario(path: str) -> str:
    """File contents; unknown paths fall back to the shipped scenarios by name."""
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8")
    shipped = resources.files("quotaeq").joinpath("data/scenarios", p.name)
    if not shipped.is_file() and not p.suffix:
        shipped = resources.files("quotaeq").joinpath("data/scenarios", p.name + ".scn")
    if shipped.is_file():
        return shipped.read_text(encoding="utf-8")
    raise InputError(f"no such scenario: {path}")


def load(path: str) -> Economy:
    return parse_scenario(resolve_scenario(path))


def with_quota(economy: Economy, m: float) -> Economy:
    """Rescale every firm's quota so the total becomes m (all to the government if it was zero)."""
    s = economy.scheme
    k = economy.k
    total = s.total(k)
    if k != 1:
        raise InputError("--set m= needs exactly one regulated commodity")
    if total[0] == 0:
        quotas = {j: (0.0,) for j in s.quotas}
        quotas[GOVERNMENT] = (m,)
    else:
        quotas = {j: (v[0] * m / total[0],) for j, v in s.quotas.items()}
    return economy.with_scheme(replace(s, quotas=quotas))


def with_rate(economy: Economy, t: float) -> Economy:
    s = economy.scheme
    if isinstance(s, EmissionTaxScheme):
        return economy.with_scheme(replace(s, rate=(t,) * economy.k))
    if isinstance(s, FuelTaxScheme):
        return economy.with_scheme(replace(s, rate=t))
    raise InputError("--set t= needs a tax or fuel scenario")


def apply_settings(economy: Economy, settings: list[str]) -> Economy:
    for item in settings or []:
        key, _, value = item.partition("=")
        try:
            v = parse_number(value)
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad value in --set {item}") from None
        if key == "t":
            economy = with_rate(economy, v)
        elif key == "m":
            if not isinstance(economy.scheme, QuotaScheme):
                raise InputError("--set m= needs a quota scenario")
            economy = with_quota(economy, v)
        else:
            raise InputError(f"unknown setting {key!r}; use t= or m=")
    problems = validate_economy(economy)
    if problems:
        raise ValidationError(problems)
    return economy


def _param_text(economy: Economy) -> str:
    s = economy.scheme
    if isinstance(s, QuotaScheme):
        return f"m={fmt(float(s.total(economy.k)[0]))}"
    if isinstance(s, EmissionTaxScheme):
        return "t=" + ",".join(fmt(t) for t in s.rate)
    return f"t={fmt(s.rate)}"


_KIND_NAMES = {"quota": "quota", "tax": "emission tax", "fuel": "fuel tax"}


def _vec(v) -> str:
    return "(" + ", ".join(fmt(float(a)) for a in v) + ")"


def describe(economy: Economy, eq: EquilibriumSet) -> list[str]:
    lines = []
    for i, c in enumerate(eq.candidates, 1):
        v = total_net_emission(economy, c.x, c.y)
        lines.append(f"equilibrium {i}: p={_vec(c.p)} emission={_vec(v)}")
        for cons, x in zip(economy.consumers, c.x):
            lines.append(f"  x[{cons.id}]={_vec(x)}")
        for f, y in zip(economy.firms, c.y):
            lines.append(f"  y[{f.id}]={_vec(y)}")
    if eq.family is not None:
        fam = eq.family
        lines.append(f"family over {fam.parameter} in [{fmt(fam.lo)}, {fmt(fam.hi)}] at p={_vec(fam.start.p)}")
        for tag, c in (("start", fam.start), ("end", fam.end)):
            xs = " ".join(f"x[{cons.id}]={_vec(x)}" for cons, x in zip(economy.consumers, c.x))
            ys = " ".join(f"y[{f.id}]={_vec(y)}" for f, y in zip(economy.firms, c.y))
            lines.append(f"  {tag}: {xs} {ys}")
    return lines


def _set_json(economy: Economy, eq: EquilibriumSet) -> str:
    out = {
        "candidates": [candidate_dict(c) for c in eq.candidates],
        "family": None,
        "reason": eq.reason,
    }
    if eq.family is not None:
        f = eq.family
        out["family"] = {"parameter": f.parameter, "lo": f.lo, "hi": f.hi,
                         "start": candidate_dict(f.start), "end": candidate_dict(f.end)}
    return json.dumps(out, indent=2)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    econ = apply_settings(load(args.scenario), args.set)
    eq = solve(econ, cap=args.cap)
    if args.json:
        print(_set_json(econ, eq))
    if eq.empty:
        kind = _KIND_NAMES[econ.scheme.kind]
        print(f"no {kind} equilibrium at {_param_text(econ)} ({eq.reason})", file=sys.stderr if args.json else sys.stdout)
        return EXIT_NONE
    if not args.json:
        print("\n".join(describe(econ, eq)))
    return EXIT_OK


def cmd_certify(args) -> int:
    econ = apply_settings(load(args.scenario), args.set)
    cand = parse_candidate(Path(args.candidate).read_text(encoding="utf-8"), econ)
    report = certify(econ, cand, tol=args.tol)
    print("\n".join(report.lines()))
    print("overall: " + ("pass" if report.passed else "fail"))
    return EXIT_OK if report.passed else EXIT_NONE


def _grid(args) -> list[float]:
    if args.steps is None or args.steps < 2:
        raise InputError("--steps must be at least 2")
    if args.grid_from is None or args.grid_to is None:
        raise InputError("--from and --to are required")
    return [round(float(v), 12) for v in np.linspace(args.grid_from, args.grid_to, args.steps)]


def cmd_sweep(args) -> int:
    econ = apply_settings(load(args.scenario), args.set)
    if args.param == "tax":
        if not isinstance(econ.scheme, EmissionTaxScheme):
            raise InputError("sweep --param tax needs an emission tax scenario")
        _write(emission_csv(emission_correspondence(econ, _grid(args))), args.out)
    elif args.param == "quota":
        if not isinstance(econ.scheme, QuotaScheme):
            raise InputError("sweep --param quota needs a quota scenario")
        sweep = quota_welfare_sweep(lambda m: with_quota(econ, m), _grid(args))
        _write(sweep.csv(), args.out)
    else:
        if not isinstance(econ.scheme, FuelTaxScheme) or not args.benchmark:
            raise InputError("sweep --param emission needs a fuel scenario and --benchmark TAX_SCENARIO")
        bench = load(args.benchmark)
        rows = fuel_vs_emission_comparison(econ, bench, _grid(args))
        _write(comparison_csv(rows), args.out)
    return EXIT_OK


def cmd_convert(args) -> int:
    econ = apply_settings(load(args.scenario), args.set)
    eq = solve(econ, cap=args.cap)
    members = eq.members()
    if not members:
        print(f"no equilibrium to carry across ({eq.reason})")
        return EXIT_NONE
    cand = members[0]
    if args.to == "tax":
        if not isinstance(econ.scheme, QuotaScheme):
            raise InputError("convert --to tax needs a quota scenario")
        res = quota_to_tax(econ, cand)
    elif isinstance(econ.scheme, QuotaScheme):
        res = to_global_quota(econ, cand)
    elif isinstance(econ.scheme, EmissionTaxScheme):
        res = tax_to_quota(econ, cand)
    else:
        raise InputError("convert --to global-quota needs a quota or emission tax scenario")
    _write(print_scenario(res.economy), args.out)
    print(f"{res.provenance}; carried equilibrium certifies: {certify(res.economy, res.candidate).passed}",
          file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_welfare(args) -> int:
    econ = apply_settings(load(args.scenario), args.set)
    eq = solve(econ, cap=args.cap)
    members = eq.members()
    if not members:
        print(f"no equilibrium to check ({eq.reason})")
        return EXIT_NONE
    for i, c in enumerate(members, 1):
        verdict = constrained_pareto_check(econ, c, h=args.grid)
        if verdict.dominated:
            deltas = ", ".join(fmt(d) for d in verdict.deltas)
            print(f"equilibrium {i}: dominated (grid step {fmt(verdict.step)}, {verdict.points_examined} points,"
                  f" utility changes {deltas})")
        else:
            print(f"equilibrium {i}: no dominator on grid step {fmt(verdict.step)}"
                  f" ({verdict.points_examined} points; hypothesis route {verdict.hypothesis_route})")
    return EXIT_OK


def cmd_golden(args) -> int:
    report = run_golden_suite(examples=args.example or None, tol=args.tol)
    print("\n".join(report.lines()))
    return EXIT_OK if report.passed else EXIT_NONE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quotaeq", description="Quota, emission tax and fuel tax equilibria.")
    parser.add_argument("--list-scenarios", action="store_true", help="list the built-in examples and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, scenario=True):
        if scenario:
            p.add_argument("scenario", help="scenario file (shipped names such as example2_tax.scn also work)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override t= (tax rate) or m= (total quota, allocation rescaled)")
        p.add_argument("--cap", type=int, default=10**6, help="regime enumeration cap")
        p.add_argument("--tol", type=float, default=1e-9, help="certification tolerance")

    p = sub.add_parser("solve", help="enumerate equilibria")
    common(p)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="check a candidate file against the equilibrium conditions")
    common(p)
    p.add_argument("candidate", help="JSON file with keys x, y, p")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="CSV sweeps over tax rate, quota or emission level")
    common(p)
    p.add_argument("--param", choices=("tax", "quota", "emission"), required=True)
    p.add_argument("--from", dest="grid_from", type=parse_number)
    p.add_argument("--to", dest="grid_to", type=parse_number)
    p.add_argument("--steps", type=int)
    p.add_argument("--benchmark", help="emission tax scenario for --param emission")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convert", help="rewrite a scenario as an equivalent tax or global quota economy")
    common(p)
    p.add_argument("--to", choices=("tax", "global-quota"), required=True)
    p.add_argument("--out", help="write the new scenario here instead of stdout")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("welfare", help="grid search for a constrained Pareto improvement")
    common(p)
    p.add_argument("--grid", type=float, default=0.05, help="grid step")
    p.set_defaults(func=cmd_welfare)

    p = sub.add_parser("golden", help="re-derive the worked examples' expected values")
    p.add_argument("--example", type=int, action="append", help="restrict to an example number")
    p.add_argument("--tol", type=float, default=1e-6, help="comparison tolerance against expected values")
    p.set_defaults(func=cmd_golden)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_scenarios:
        print("\n".join(list_scenarios()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_INPUT
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print("invalid economy: " + "; ".join(exc.violations), file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ParameterOutOfRange, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RegimeExplosion, GridExplosion) as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except QuotaEqError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NONE


if __name__ == "__main__":
    sys.exit(main())
