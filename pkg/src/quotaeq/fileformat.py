"""Scenario and candidate files: strict JSON with positions in diagnostics.

Numbers may be written as JSON numbers or as "a/b" rational strings; null
stands for an infinite bound.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner
import math
import re
import sys
from typing import Any

import numpy as np

from ._numeric import parse_number
from .economy import (
    INF,
    BoxSet,
    Candidate,
    CobbDouglas,
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
    validate_economy,
)
from .errors import ParseError, ValidationError

NORMALIZE_WARN_TOL = 1e-6


class PosDict(dict):
    """A parsed JSON object that remembers where it and its keys start."""

    start: int = 0
    key_pos: dict[str, int]


def _string_end(s: str, i: int) -> int:
    j = i + 1
    while j < len(s):
        if s[j] == "\\":
            j += 2
            continue
        if s[j] == '"':
            return j
        j += 1
    return j


def _key_positions(s: str, start: int) -> dict[str, int]:
    """Offsets of the keys of the object whose '{' is at start."""
    out: dict[str, int] = {}
    depth, i, expect_key = 0, start, True
    while i < len(s):
        ch = s[i]
        if ch == '"':
            j = _string_end(s, i)
            if depth == 1 and expect_key:
                out.setdefault(json.loads(s[i:j + 1]), i)
                expect_key = False
            i = j + 1
            continue
        if ch in "{[":
            depth += 1
        elif ch in "}]":
            depth -= 1
            if depth == 0:
                break
        elif ch == "," and depth == 1:
            expect_key = True
        i += 1
    return out


def _decoder() -> json.JSONDecoder:
    dec = json.JSONDecoder()

    def parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None, _w=None):
        s, end = s_and_end
        pairs, new_end = json.decoder.JSONObject(s_and_end, strict, scan_once, None, list, memo)
        obj = PosDict(pairs)
        obj.start = end - 1
        obj.key_pos = _key_positions(s, end - 1)
        return obj, new_end

    dec.parse_object = parse_object
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Reader:
    def __init__(self, text: str):
        self.text = text
        try:
            self.root = _decoder().decode(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None

    def fail(self, msg: str, obj=None, key: str | None = None):
        pos = 0
        if isinstance(obj, PosDict):
            pos = obj.key_pos.get(key, obj.start) if key is not None else obj.start
        line, col = _line_col(self.text, pos)
        raise ParseError(msg, line, col)

    def obj(self, value, where: str, parent=None, key=None) -> PosDict:
        if not isinstance(value, PosDict):
            self.fail(f"{where} must be an object", parent, key)
        return value

    def keys(self, obj: PosDict, where: str, required: set[str], optional: set[str] = frozenset()) -> None:
        for k in obj:
            if k not in required and k not in optional:
                self.fail(f"unknown key {k!r} in {where}", obj, k)
        for k in sorted(required):
            if k not in obj:
                self.fail(f"missing key {k!r} in {where}", obj)

    def num(self, obj: PosDict, key: str, where: str) -> float:
        try:
            return parse_number(obj[key])
        except (ValueError, ZeroDivisionError):
            self.fail(f"{where}.{key} is not a number", obj, key)

    def nums(self, obj: PosDict, key: str, where: str) -> tuple[float, ...]:
        val = obj[key]
        if not isinstance(val, list):
            self.fail(f"{where}.{key} must be a list", obj, key)
        try:
            return tuple(parse_number(v) for v in val)
        except (ValueError, ZeroDivisionError):
            self.fail(f"{where}.{key} holds a non-number", obj, key)

    def num_map(self, obj: PosDict, key: str, where: str) -> dict[str, float]:
        m = self.obj(obj[key], f"{where}.{key}", obj, key)
        out = {}
        for k, v in m.items():
            try:
                out[str(k)] = parse_number(v)
            except (ValueError, ZeroDivisionError):
                self.fail(f"{where}.{key}.{k} is not a number", m, k)
        return out


def parse_scenario(text: str, validate: bool = True) -> Economy:
    """Economy described by a scenario file, or ParseError / ValidationError."""
    r = _Reader(text)
    root = r.obj(r.root, "scenario")
    r.keys(root, "scenario", {"commodities", "consumers", "firms", "scheme"}, {"name"})

    com = r.obj(root["commodities"], "commodities", root, "commodities")
    r.keys(com, "commodities", {"labels", "regulated"})
    if not isinstance(com["labels"], list) or not all(isinstance(v, str) for v in com["labels"]):
        r.fail("commodities.labels must be a list of strings", com, "labels")
    if not isinstance(com["regulated"], int) or isinstance(com["regulated"], bool):
        r.fail("commodities.regulated must be an integer", com, "regulated")
    space = CommoditySpace(tuple(com["labels"]), com["regulated"])

    if not isinstance(root["consumers"], list):
        r.fail("consumers must be a list", root, "consumers")
    consumers = []
    for i, c in enumerate(root["consumers"]):
        where = f"consumers[{i}]"
        c = r.obj(c, where, root, "consumers")
        r.keys(c, where, {"id", "endowment", "utility"}, {"box", "shares"})
        if "box" in c:
            box = r.obj(c["box"], f"{where}.box", c, "box")
            r.keys(box, f"{where}.box", {"lo", "hi"})
            box = BoxSet(r.nums(box, "lo", f"{where}.box"), r.nums(box, "hi", f"{where}.box"))
        else:
            box = BoxSet((0.0,) * space.ell, (INF,) * space.ell)
        u = r.obj(c["utility"], f"{where}.utility", c, "utility")
        kind = u.get("kind")
        if kind == "linear":
            r.keys(u, f"{where}.utility", {"kind", "coeffs"}, {"externality_gamma"})
            cons = Linear(r.nums(u, "coeffs", f"{where}.utility"))
        elif kind == "cobb_douglas":
            r.keys(u, f"{where}.utility", {"kind", "exponents"}, {"externality_gamma"})
            cons = CobbDouglas(r.nums(u, "exponents", f"{where}.utility"))
        else:
            r.fail(f"{where}.utility.kind must be 'linear' or 'cobb_douglas'", u, "kind" if "kind" in u else None)
        gamma = r.num(u, "externality_gamma", f"{where}.utility") if u.get("externality_gamma") is not None else None
        shares = r.num_map(c, "shares", where) if "shares" in c else {}
        consumers.append(Consumer(str(c["id"]), box, r.nums(c, "endowment", where), shares,
                                  UtilitySpec(cons, gamma)))

    if not isinstance(root["firms"], list):
        r.fail("firms must be a list", root, "firms")
    firms = []
    for i, f in enumerate(root["firms"]):
        where = f"firms[{i}]"
        f = r.obj(f, where, root, "firms")
        r.keys(f, where, {"id", "technology"})
        t = r.obj(f["technology"], f"{where}.technology", f, "technology")
        tw = f"{where}.technology"
        kind = t.get("kind")
        offset = None
        if kind == "singleton0":
            r.keys(t, tw, {"kind"}, {"offset"})
            tech = Singleton0(r.nums(t, "offset", tw) if "offset" in t else None)
        elif kind == "linear":
            r.keys(t, tw, {"kind", "activities"}, {"offset"})
            if "offset" in t:
                offset = r.nums(t, "offset", tw)
            if not isinstance(t["activities"], list):
                r.fail(f"{tw}.activities must be a list", t, "activities")
            vecs, bounds = [], []
            for a_i, a in enumerate(t["activities"]):
                aw = f"{tw}.activities[{a_i}]"
                a = r.obj(a, aw, t, "activities")
                r.keys(a, aw, {"vector"}, {"bound"})
                vecs.append(r.nums(a, "vector", aw))
                bounds.append(r.num(a, "bound", aw) if "bound" in a else INF)
            tech = LinearActivities(tuple(vecs), tuple(bounds), offset)
        elif kind == "curve":
            r.keys(t, tw, {"kind", "curve"})
            cv = r.obj(t["curve"], f"{tw}.curve", t, "curve")
            r.keys(cv, f"{tw}.curve", {"coeffs"}, {"slack"})
            if not isinstance(cv["coeffs"], list):
                r.fail(f"{tw}.curve.coeffs must be a list", cv, "coeffs")
            try:
                coeffs = tuple(tuple(parse_number(v) for v in row) for row in cv["coeffs"])
            except (TypeError, ValueError, ZeroDivisionError):
                r.fail(f"{tw}.curve.coeffs must hold number triples", cv, "coeffs")
            slack, cap = None, 0.0
            if cv.get("slack") is not None:
                sl = r.obj(cv["slack"], f"{tw}.curve.slack", cv, "slack")
                r.keys(sl, f"{tw}.curve.slack", {"commodity", "cap"})
                slack = _commodity_index(r, sl, "commodity", space)
                cap = r.num(sl, "cap", f"{tw}.curve.slack")
            tech = ConcaveCurve(coeffs, slack, cap)
        else:
            r.fail(f"{tw}.kind must be 'singleton0', 'linear' or 'curve'", t, "kind" if "kind" in t else None)
        firms.append(Firm(str(f["id"]), tech))

    s = r.obj(root["scheme"], "scheme", root, "scheme")
    kind = s.get("kind")
    if kind == "quota":
        r.keys(s, "scheme", {"kind", "quotas", "disposal"})
        q = r.obj(s["quotas"], "scheme.quotas", s, "quotas")
        quotas = {}
        for j in q:
            if not isinstance(q[j], list):
                r.fail(f"scheme.quotas.{j} must be a list", q, j)
            quotas[str(j)] = r.nums(q, j, "scheme.quotas")
        scheme = QuotaScheme(quotas, _disposal(r, s))
    elif kind == "tax":
        r.keys(s, "scheme", {"kind", "rate", "rebate", "disposal"})
        rate = r.nums(s, "rate", "scheme") if isinstance(s["rate"], list) else (r.num(s, "rate", "scheme"),)
        scheme = EmissionTaxScheme(rate, r.num_map(s, "rebate", "scheme"), _disposal(r, s))
    elif kind == "fuel":
        r.keys(s, "scheme", {"kind", "commodity", "rate", "rebate", "disposal"})
        scheme = FuelTaxScheme(_commodity_index(r, s, "commodity", space), r.num(s, "rate", "scheme"),
                               r.num_map(s, "rebate", "scheme"), _disposal(r, s))
    else:
        r.fail("scheme.kind must be 'quota', 'tax' or 'fuel'", s, "kind" if "kind" in s else None)

    econ = Economy(space, tuple(consumers), tuple(firms), scheme)
    if validate:
        problems = validate_economy(econ)
        if problems:
            raise ValidationError(problems)
    return econ


def _commodity_index(r: _Reader, obj: PosDict, key: str, space: CommoditySpace) -> int:
    v = obj[key]
    if isinstance(v, str):
        if v not in space.labels:
            r.fail(f"unknown commodity {v!r}", obj, key)
        return space.labels.index(v)
    if not isinstance(v, int) or isinstance(v, bool):
        r.fail(f"{key} must be a commodity label or index", obj, key)
    return v


def _disposal(r: _Reader, s: PosDict) -> tuple[str, ...]:
    d = s["disposal"]
    if not isinstance(d, list) or not all(isinstance(v, str) for v in d):
        r.fail("scheme.disposal must be a list of 'free' / 'none'", s, "disposal")
    return tuple(d)


# -- printing ------------------------------------------------------------------------


def _n(v: float):
    if math.isinf(v):
        return None
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def _ns(vs) -> list:
    return [_n(v) for v in vs]


def scenario_dict(economy: Economy) -> dict[str, Any]:
    cs = economy.commodities
    consumers = []
    for c in economy.consumers:
        u = c.utility
        if isinstance(u.consumption, Linear):
            ud: dict[str, Any] = {"kind": "linear", "coeffs": _ns(u.consumption.coeffs)}
        else:
            ud = {"kind": "cobb_douglas", "exponents": _ns(u.consumption.exponents)}
        if u.externality_gamma is not None:
            ud["externality_gamma"] = _n(u.externality_gamma)
        consumers.append({
            "id": c.id,
            "box": {"lo": _ns(c.box.lo), "hi": _ns(c.box.hi)},
            "endowment": _ns(c.endowment),
            "shares": {j: _n(v) for j, v in c.shares.items()},
            "utility": ud,
        })
    firms = []
    for f in economy.firms:
        t = f.technology
        if isinstance(t, Singleton0):
            td: dict[str, Any] = {"kind": "singleton0"}
            if t.offset is not None:
                td["offset"] = _ns(t.offset)
        elif isinstance(t, LinearActivities):
            td = {"kind": "linear", "activities": [{"vector": _ns(a), "bound": _n(b)}
                                                   for a, b in zip(t.activities, t.bounds)]}
            if t.offset is not None:
                td["offset"] = _ns(t.offset)
        else:
            cd: dict[str, Any] = {"coeffs": [_ns(c) for c in t.coeffs]}
            if t.slack_commodity is not None:
                cd["slack"] = {"commodity": t.slack_commodity, "cap": _n(t.slack_cap)}
            td = {"kind": "curve", "curve": cd}
        firms.append({"id": f.id, "technology": td})
    s = economy.scheme
    if isinstance(s, QuotaScheme):
        sd: dict[str, Any] = {"kind": "quota", "quotas": {j: _ns(m) for j, m in s.quotas.items()}}
    elif isinstance(s, EmissionTaxScheme):
        sd = {"kind": "tax", "rate": _ns(s.rate), "rebate": {c: _n(v) for c, v in s.rebate.items()}}
    else:
        sd = {"kind": "fuel", "commodity": s.commodity, "rate": _n(s.rate),
              "rebate": {c: _n(v) for c, v in s.rebate.items()}}
    sd["disposal"] = list(s.disposal)
    return {
        "commodities": {"labels": list(cs.labels), "regulated": cs.regulated},
        "consumers": consumers,
        "firms": firms,
        "scheme": sd,
    }


_FLAT_LIST = re.compile(r"\[[^\[\]{}]*\]")


def _compact(text: str) -> str:
    # keep lists of scalars on one line
    return _FLAT_LIST.sub(lambda m: "[" + ", ".join(p.strip() for p in m.group(0)[1:-1].split(",") if p.strip()) + "]",
                          text)


def print_scenario(economy: Economy) -> str:
    return _compact(json.dumps(scenario_dict(economy), indent=2)) + "\n"


# -- candidates ------------------------------------------------------------------------


def parse_candidate(text: str, economy: Economy, warn=None) -> Candidate:
    """Candidate file with keys x, y, p; prices are rescaled onto the sphere.

    When the price norm is off by more than 1e-6 the prices are rescaled and
    a warning is written (to stderr unless a callback is given).
    """
    r = _Reader(text)
    root = r.obj(r.root, "candidate")
    r.keys(root, "candidate", {"x", "y", "p"})

    def matrix(key: str, rows: int) -> tuple[tuple[float, ...], ...]:
        val = root[key]
        if not isinstance(val, list) or len(val) != rows:
            r.fail(f"{key} must list {rows} vectors", root, key)
        try:
            out = tuple(tuple(parse_number(v) for v in row) for row in val)
        except (TypeError, ValueError, ZeroDivisionError):
            r.fail(f"{key} holds a non-number", root, key)
        if any(len(row) != economy.ell for row in out):
            r.fail(f"every vector in {key} needs {economy.ell} entries", root, key)
        return out

    x = matrix("x", len(economy.consumers))
    y = matrix("y", len(economy.firms))
    p = np.array(r.nums(root, "p", "candidate"), dtype=float)
    if len(p) != economy.ell:
        r.fail(f"p needs {economy.ell} entries", root, "p")
    target = 1.0 - economy.scheme.rate if isinstance(economy.scheme, FuelTaxScheme) else 1.0
    norm = float(np.sum(np.abs(p)))
    if abs(norm - target) > NORMALIZE_WARN_TOL and norm > 0:
        msg = f"warning: price norm {norm:.12g} rescaled to {target:.12g}"
        (warn or (lambda m: print(m, file=sys.stderr)))(msg)
        p = p * (target / norm)
    return Candidate(x, y, p)


def candidate_dict(c: Candidate) -> dict[str, Any]:
    return {"x": [_ns(v) for v in c.x], "y": [_ns(v) for v in c.y], "p": _ns(c.p)}
