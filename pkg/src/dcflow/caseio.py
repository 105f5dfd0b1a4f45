"""Case input/output.

Two formats are read: a native JSON case document (schema
``dcflow-case/1``) and a MATPOWER-style subset (bus/gen/branch matrices
in MATLAB matrix syntax) with the standard DC adaptation rules applied
on ingest: line resistances scaled down, zero resistances substituted,
reactances ignored, voltage bounds overridden.

Native JSON documents carry bus powers in MW (converted to per-unit on
``base_mva``), voltages in per-unit, and exactly one of resistance ``r``
or conductance ``y`` per line record (per-unit). Written documents are
canonical: per-unit quantities on base 1, sorted records, repr-exact
floats, so round-trips are bit-exact and diffs stay readable.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources

from .netmodel import (
    INF,
    Bus,
    CostFunction,
    Disconnected,
    Line,
    Network,
    validate_network,
)

SCHEMA = "dcflow-case/1"


class CaseSyntaxError(ValueError):
    """Malformed case text; carries an approximate position."""

    def __init__(self, msg: str, position: int | None = None):
        self.position = position
        super().__init__(msg if position is None else f"{msg} (near offset {position})")


class CaseSchemaError(ValueError):
    """Structurally valid text that does not match the case schema."""

    def __init__(self, field_name: str, msg: str):
        self.field = field_name
        super().__init__(f"{field_name}: {msg}")


class UnsupportedFeature(ValueError):
    def __init__(self, name: str):
        self.feature = name
        super().__init__(f"case uses unsupported feature {name!r}")


class UnknownCase(KeyError):
    def __init__(self, name: str):
        super().__init__(f"no built-in case named {name!r}")


@dataclass(frozen=True)
class AdaptRules:
    """The DC adaptation applied to imported AC distribution data.

    Resistances are scaled by ``r_scale``; branches with zero resistance
    get ``zero_r_substitute`` (per-unit) instead; reactances are ignored;
    voltage bounds are overridden. ``slack_v_ref`` pins reference buses,
    defaulting to the bus voltage setpoint clamped into the new box.
    """

    r_scale: float = 0.1
    zero_r_substitute: float = 1e-3
    v_min: float = 0.95
    v_max: float = 1.05
    slack_v_ref: float | None = None


# --- native JSON format ------------------------------------------------------

def _require(record: dict, key: str, where: str):
    if key not in record:
        raise CaseSchemaError(f"{where}.{key}", "required field is missing")
    return record[key]


def _bound(value, default: float) -> float:
    if value is None:
        return default
    return float(value)


def _cost_from_record(rec) -> CostFunction:
    if rec is None:
        return CostFunction()
    kind = _require(rec, "kind", "cost")
    coeffs = tuple(float(c) for c in _require(rec, "coefficients", "cost"))
    return CostFunction(kind, coeffs)


def parse_case_json(text: str) -> Network:
    """Parse a native JSON case into a validated per-unit network."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSyntaxError(exc.msg, exc.pos) from exc
    if not isinstance(doc, dict):
        raise CaseSchemaError("document", "top level must be an object")
    if doc.get("schema") != SCHEMA:
        raise CaseSchemaError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    base = float(doc.get("base_mva", 1.0))
    if not base > 0:
        raise CaseSchemaError("base_mva", "must be positive")

    buses = []
    for k, rec in enumerate(_require(doc, "buses", "document")):
        where = f"buses[{k}]"
        kind = rec.get("kind", "standalone")
        if kind == "slack":
            v_ref = float(_require(rec, "v_ref", where))
            bus = Bus(int(_require(rec, "id", where)), -INF, INF, v_ref, v_ref,
                      kind="slack", cost=_cost_from_record(rec.get("cost")))
        else:
            bus = Bus(
                int(_require(rec, "id", where)),
                _bound(_require(rec, "p_min", where), -INF) / base,
                _bound(_require(rec, "p_max", where), INF) / base,
                float(_require(rec, "v_min", where)),
                float(_require(rec, "v_max", where)),
                cost=_cost_from_record(rec.get("cost")),
            )
        buses.append(bus)

    lines = []
    for k, rec in enumerate(_require(doc, "lines", "document")):
        where = f"lines[{k}]"
        has_r, has_y = "r" in rec, "y" in rec
        if has_r == has_y:
            raise CaseSchemaError(where, "exactly one of r or y is required")
        y = 1.0 / float(rec["r"]) if has_r else float(rec["y"])
        i_max = rec.get("i_max")
        lines.append(Line(
            int(_require(rec, "i", where)),
            int(_require(rec, "j", where)),
            y,
            i_max=None if i_max is None else float(i_max),
        ))

    net = Network(
        buses=tuple(buses),
        lines=tuple(lines),
        name=str(doc.get("name", "")),
        provenance=str(doc.get("provenance", "")),
        adapt_applied=bool(doc.get("adapt_applied", False)),
    )
    validate_network(net, allow_disconnected=bool(doc.get("allow_disconnected", False)))
    return net


def write_case_json(net: Network) -> str:
    """Serialize a network to the canonical per-unit JSON document."""
    buses = []
    for b in net.buses:
        rec: dict = {"id": b.id}
        if b.kind == "slack":
            rec["kind"] = "slack"
            rec["v_ref"] = b.v_ref
        else:
            rec["p_min"] = None if b.p_min == -INF else b.p_min
            rec["p_max"] = None if b.p_max == INF else b.p_max
            rec["v_min"] = b.v_min
            rec["v_max"] = b.v_max
        if b.cost != CostFunction():
            rec["cost"] = {"kind": b.cost.kind, "coefficients": list(b.cost.coefficients)}
        buses.append(rec)
    lines = []
    for l in net.lines:
        rec = {"i": l.i, "j": l.j, "y": l.y}
        if l.i_max is not None:
            rec["i_max"] = l.i_max
        lines.append(rec)
    doc = {
        "schema": SCHEMA,
        "name": net.name,
        "base_mva": 1.0,
        "provenance": net.provenance,
        "adapt_applied": net.adapt_applied,
        "buses": buses,
        "lines": lines,
    }
    try:
        validate_network(net)
    except Disconnected:
        doc["allow_disconnected"] = True
    return json.dumps(doc, indent=1)


# --- MATPOWER subset ---------------------------------------------------------

_SUPPORTED_FIELDS = {"version", "baseMVA", "bus", "gen", "branch", "gencost", "bus_name"}
_MATRIX_FIELDS = {"bus", "gen", "branch"}

# column positions (0-based) in the standard matrices
_BUS_ID, _BUS_TYPE, _BUS_PD, _BUS_VM, _BUS_VMAX, _BUS_VMIN = 0, 1, 2, 7, 11, 12
_GEN_BUS, _GEN_STATUS, _GEN_PMAX, _GEN_PMIN = 0, 7, 8, 9
_BR_F, _BR_T, _BR_R, _BR_STATUS = 0, 1, 2, 10


def _parse_matrix(name: str, body: str, start: int) -> list[list[float]]:
    rows = []
    width = None
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            row = [float(v) for v in chunk.split()]
        except ValueError as exc:
            raise CaseSyntaxError(f"bad value in mpc.{name}: {exc}", start) from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise CaseSyntaxError(
                f"mpc.{name} row has {len(row)} columns, expected {width}", start
            )
        rows.append(row)
    return rows


def parse_matpower_subset(text: str, adapt: AdaptRules | None = None) -> Network:
    """Read the bus/gen/branch subset of a MATPOWER case.

    Reactance, shunt, tap and angle columns are ignored; ``gencost`` is
    parsed and discarded (the objective is network loss); any other
    ``mpc.<field>`` assignment is rejected with
    :class:`UnsupportedFeature`. Branch resistances are adapted per
    ``adapt``, out-of-service elements are dropped, parallel branches
    merge by conductance addition, and multiple generators on one bus
    sum their limits.
    """
    adapt = adapt or AdaptRules()
    no_comments = re.sub(r"%[^\n]*", "", text)

    name = ""
    m = re.search(r"function\s+mpc\s*=\s*(\w+)", no_comments)
    if m:
        name = m.group(1)

    fields: dict[str, object] = {}
    for m in re.finditer(r"mpc\.(\w+)\s*=\s*", no_comments):
        fname = m.group(1)
        if fname not in _SUPPORTED_FIELDS:
            raise UnsupportedFeature(fname)
        tail = no_comments[m.end():]
        if fname in _MATRIX_FIELDS or fname == "gencost" or fname == "bus_name":
            if not tail.lstrip().startswith(("[", "{")):
                raise CaseSyntaxError(f"mpc.{fname} must be a matrix", m.end())
            opener = tail.lstrip()[0]
            closer = "]" if opener == "[" else "}"
            body_start = tail.index(opener) + 1
            end = tail.find(closer, body_start)
            if end < 0:
                raise CaseSyntaxError(f"unterminated mpc.{fname} matrix", m.end())
            if fname in _MATRIX_FIELDS:
                fields[fname] = _parse_matrix(fname, tail[body_start:end], m.end())
        else:
            end = tail.find(";")
            if end < 0:
                raise CaseSyntaxError(f"unterminated mpc.{fname}", m.end())
            fields[fname] = tail[:end].strip().strip("'\"")

    for required in ("bus", "branch"):
        if required not in fields:
            raise CaseSchemaError(f"mpc.{required}", "required matrix is missing")
    base = float(fields.get("baseMVA", 100.0))

    bus_rows = fields["bus"]
    if bus_rows and len(bus_rows[0]) <= _BUS_VMIN:
        raise CaseSyntaxError("mpc.bus rows are too short", None)
    gen_rows = fields.get("gen", [])
    if gen_rows and len(gen_rows[0]) <= _GEN_PMIN:
        raise CaseSyntaxError("mpc.gen rows are too short", None)
    branch_rows = fields["branch"]
    if branch_rows and len(branch_rows[0]) <= _BR_STATUS:
        raise CaseSyntaxError("mpc.branch rows are too short", None)

    gens: dict[int, list[tuple[float, float]]] = {}
    for row in gen_rows:
        if row[_GEN_STATUS] <= 0:
            continue
        gens.setdefault(int(row[_GEN_BUS]), []).append(
            (row[_GEN_PMIN] / base, row[_GEN_PMAX] / base)
        )

    buses = []
    kept_ids = set()
    for row in bus_rows:
        bid = int(row[_BUS_ID])
        btype = int(row[_BUS_TYPE])
        if btype == 4:
            continue  # isolated
        kept_ids.add(bid)
        if btype == 3:
            ref = adapt.slack_v_ref
            if ref is None:
                ref = min(max(row[_BUS_VM], adapt.v_min), adapt.v_max)
            buses.append(Bus(bid, -INF, INF, ref, ref, kind="slack"))
            continue
        load = row[_BUS_PD] / base
        p_min, p_max = -load, -load
        for g_min, g_max in gens.get(bid, []):
            p_min += g_min
            p_max += g_max
        buses.append(Bus(bid, p_min, p_max, adapt.v_min, adapt.v_max))

    merged: dict[tuple[int, int], float] = {}
    for row in branch_rows:
        if row[_BR_STATUS] == 0:
            continue
        i, j = int(row[_BR_F]), int(row[_BR_T])
        if i not in kept_ids or j not in kept_ids:
            continue
        r = row[_BR_R] * adapt.r_scale
        if r == 0.0:
            r = adapt.zero_r_substitute
        key = (min(i, j), max(i, j))
        merged[key] = merged.get(key, 0.0) + 1.0 / r

    lines = tuple(Line(i, j, y) for (i, j), y in sorted(merged.items()))
    net = Network(
        buses=tuple(buses),
        lines=lines,
        name=name,
        provenance=(
            f"imported from MATPOWER-style data (base {base} MVA); "
            f"resistances scaled by {adapt.r_scale}, zero resistances set to "
            f"{adapt.zero_r_substitute} p.u., reactances ignored, voltage "
            f"bounds {adapt.v_min}/{adapt.v_max}"
        ),
        adapt_applied=True,
    )
    validate_network(net)
    return net


# --- built-in cases ----------------------------------------------------------

_BUILTIN_FILES = {
    "dc16_gt": "dc16_gt.json",
    "dc16_gm": "dc16_gm.json",
    "dc16_st": "dc16_st.json",
    "dc16_sm": "dc16_sm.json",
    "dc33_tree": "dc33_tree.json",
    "dc70_tree": "dc70_tree.json",
    "dc94_tree": "dc94_tree.json",
    "syn3_slack_limit": "syn3_slack_limit.json",
    "syn3_congested": "syn3_congested.json",
}


def list_cases() -> list[str]:
    return sorted(_BUILTIN_FILES)


def builtin_case(name: str) -> Network:
    """Load one of the shipped cases by name."""
    try:
        fname = _BUILTIN_FILES[name]
    except KeyError:
        raise UnknownCase(name) from None
    text = resources.files("dcflow").joinpath("cases").joinpath(fname).read_text()
    return parse_case_json(text)


def load_case(path_or_name: str) -> Network:
    """Load a case from a built-in name or a file path (JSON or MATPOWER)."""
    if path_or_name in _BUILTIN_FILES:
        return builtin_case(path_or_name)
    with open(path_or_name, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return parse_case_json(text)
    return parse_matpower_subset(text)
