"""Static problem data: network and unit-commitment cases, demand scenarios.

The native case format is a JSON document with sections ``meta``, ``buses``,
``lines``, ``generators``, ``demands`` and, for unit-commitment cases,
``uc_units``, ``horizon``, ``initial_state``.  A converter ingests the
bus/branch/gen/gencost tables of MATPOWER-style files.  Cases are immutable
after construction and safe to share between concurrent solves.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field


class CaseFormatError(ValueError):
    """Structurally broken case document (position carried in the message)."""


class CaseSemanticError(ValueError):
    """Well-formed document whose data violates case invariants."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(f"{v.code} at {v.path}" for v in violations))


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float
    flow_limit: float


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    cost: float
    p_min: float
    p_max: float


@dataclass(frozen=True)
class Demand:
    id: str
    bus: int
    default: float


@dataclass(frozen=True)
class NetworkCase:
    name: str
    buses: tuple[int, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    demands: tuple[Demand, ...]
    reference_bus: int

    @property
    def kind(self) -> str:
        return "network"

    def default_scenario(self) -> "DemandScenario":
        return DemandScenario(kind="dcopf-nodal",
                              values=tuple(d.default for d in self.demands))


@dataclass(frozen=True)
class UcUnit:
    id: str
    c1_pr: float     # incremental production cost [$/MWh]
    c0_pr: float     # no-load cost [$/h]
    c_su: float      # start-up cost [$]
    c_sd: float      # shut-down cost [$]
    p_min: float
    p_max: float
    r_up: float      # ramp-up limit [MW/h]
    r_dn: float      # ramp-down limit [MW/h]
    t_up: int        # minimum up time [h]
    t_dn: int        # minimum down time [h]


@dataclass(frozen=True)
class UnitInitialState:
    commitment: int      # u at the hour before the horizon
    output: float        # output at the hour before the horizon [MW]
    hours_in_state: int  # how long the unit has been in this on/off state


@dataclass(frozen=True)
class UcCase:
    name: str
    units: tuple[UcUnit, ...]
    horizon: int
    initial_state: dict[str, UnitInitialState] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "uc"

    def initial_for(self, unit: UcUnit) -> UnitInitialState:
        """Per-unit initial state; cold start by default."""
        state = self.initial_state.get(unit.id)
        if state is not None:
            return state
        return UnitInitialState(commitment=0, output=0.0,
                                hours_in_state=max(unit.t_up, unit.t_dn))


@dataclass(frozen=True)
class DemandScenario:
    """Mutable parameter vector: nodal demands or an hourly aggregate profile."""

    kind: str                     # dcopf-nodal | uc-hourly
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("dcopf-nodal", "uc-hourly"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        for i, v in enumerate(self.values):
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"scenario value [{i}] = {v} is not a "
                                 "nonnegative finite number")

    def array(self):
        import numpy as np
        return np.array(self.values)

    def l1_distance(self, other: "DemandScenario") -> float:
        if self.kind != other.kind or len(self.values) != len(other.values):
            raise ValueError("scenarios are not comparable")
        return float(sum(abs(a - b) for a, b in zip(self.values, other.values)))


# --------------------------------------------------------------------------
# validation

def validate_case(case) -> list[Violation]:
    """Empty list iff all case invariants hold; violations are data."""
    if isinstance(case, NetworkCase):
        return _validate_network(case)
    if isinstance(case, UcCase):
        return _validate_uc(case)
    raise TypeError(f"not a case: {type(case)!r}")


def _validate_network(case: NetworkCase) -> list[Violation]:
    out: list[Violation] = []
    buses = set(case.buses)
    if len(case.buses) != len(buses):
        out.append(Violation("duplicate_bus", "buses", "bus ids must be unique"))
    for i, ln in enumerate(case.lines):
        for end, val in (("from_bus", ln.from_bus), ("to_bus", ln.to_bus)):
            if val not in buses:
                out.append(Violation("dangling_bus_ref", f"lines[{i}].{end}",
                                     f"line {ln.from_bus}-{ln.to_bus} references "
                                     f"unknown bus {val}"))
        if ln.flow_limit < 0:
            out.append(Violation("negative_line_limit", f"lines[{i}].flow_limit",
                                 f"flow limit {ln.flow_limit} < 0"))
        if ln.susceptance == 0 or not math.isfinite(ln.susceptance):
            out.append(Violation("bad_susceptance", f"lines[{i}].susceptance",
                                 f"susceptance {ln.susceptance} unusable"))
    seen_gids: set[str] = set()
    for i, g in enumerate(case.generators):
        if g.bus not in buses:
            out.append(Violation("dangling_bus_ref", f"generators[{i}].bus",
                                 f"generator {g.id} references unknown bus {g.bus}"))
        if g.p_min > g.p_max:
            out.append(Violation("gen_bounds_inverted", f"generators[{i}].p_min",
                                 f"generator {g.id}: p_min {g.p_min} > p_max {g.p_max}"))
        if g.cost < 0:
            out.append(Violation("negative_cost", f"generators[{i}].cost",
                                 f"generator {g.id}: cost {g.cost} < 0"))
        if g.id in seen_gids:
            out.append(Violation("duplicate_id", f"generators[{i}].id", g.id))
        seen_gids.add(g.id)
    seen_dids: set[str] = set()
    for i, d in enumerate(case.demands):
        if d.bus not in buses:
            out.append(Violation("dangling_bus_ref", f"demands[{i}].bus",
                                 f"demand {d.id} references unknown bus {d.bus}"))
        if d.default < 0:
            out.append(Violation("negative_demand", f"demands[{i}].default",
                                 f"demand {d.id}: default {d.default} < 0"))
        if d.id in seen_dids:
            out.append(Violation("duplicate_id", f"demands[{i}].id", d.id))
        seen_dids.add(d.id)
    if case.reference_bus not in buses:
        out.append(Violation("dangling_bus_ref", "meta.reference_bus",
                             f"reference bus {case.reference_bus} unknown"))
    if buses:
        component = _reachable(case)
        if component != buses:
            missing = sorted(buses - component)
            out.append(Violation("graph_disconnected", "lines",
                                 f"buses {missing} unreachable from the "
                                 "reference bus component"))
    return out


def _reachable(case: NetworkCase) -> set[int]:
    adj: dict[int, set[int]] = {b: set() for b in case.buses}
    for ln in case.lines:
        if ln.from_bus in adj and ln.to_bus in adj:
            adj[ln.from_bus].add(ln.to_bus)
            adj[ln.to_bus].add(ln.from_bus)
    start = case.reference_bus if case.reference_bus in adj else next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def _validate_uc(case: UcCase) -> list[Violation]:
    out: list[Violation] = []
    if case.horizon < 1:
        out.append(Violation("bad_horizon", "horizon", f"{case.horizon} < 1"))
    seen: set[str] = set()
    for i, u in enumerate(case.units):
        path = f"uc_units[{i}]"
        if u.id in seen:
            out.append(Violation("duplicate_id", f"{path}.id", u.id))
        seen.add(u.id)
        if u.t_up < 1 or u.t_dn < 1:
            out.append(Violation("min_time_lt_1", f"{path}.t_up",
                                 f"unit {u.id}: TU/TD must be >= 1"))
        if u.r_up < 0 or u.r_dn < 0:
            out.append(Violation("negative_ramp", f"{path}.r_up",
                                 f"unit {u.id}: ramp limits must be >= 0"))
        if u.p_min > u.p_max:
            out.append(Violation("gen_bounds_inverted", f"{path}.p_min",
                                 f"unit {u.id}: p_min {u.p_min} > p_max {u.p_max}"))
        for label, val in (("c1_pr", u.c1_pr), ("c0_pr", u.c0_pr),
                           ("c_su", u.c_su), ("c_sd", u.c_sd)):
            if val < 0:
                out.append(Violation("negative_cost", f"{path}.{label}",
                                     f"unit {u.id}: {label} {val} < 0"))
    unit_ids = {u.id for u in case.units}
    for uid, st in case.initial_state.items():
        path = f"initial_state.{uid}"
        if uid not in unit_ids:
            out.append(Violation("dangling_unit_ref", path, f"unknown unit {uid}"))
            continue
        unit = next(u for u in case.units if u.id == uid)
        if st.commitment not in (0, 1):
            out.append(Violation("bad_initial_commitment", f"{path}.commitment",
                                 f"{st.commitment} not in {{0,1}}"))
        if st.commitment == 0 and st.output != 0.0:
            out.append(Violation("initial_output_inconsistent", f"{path}.output",
                                 f"unit {uid} is off but output {st.output} != 0"))
        if st.commitment == 1 and not (unit.p_min <= st.output <= unit.p_max):
            out.append(Violation("initial_output_inconsistent", f"{path}.output",
                                 f"unit {uid} output {st.output} outside "
                                 f"[{unit.p_min}, {unit.p_max}]"))
        if st.hours_in_state < 0:
            out.append(Violation("bad_initial_hours", f"{path}.hours_in_state",
                                 f"{st.hours_in_state} < 0"))
    return out


# --------------------------------------------------------------------------
# native format

def parse_case(text: str) -> NetworkCase | UcCase:
    """Parse and validate a native case document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"syntax error at line {exc.lineno}, "
                              f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise CaseFormatError("case document must be a JSON object")
    meta = doc.get("meta")
    if not isinstance(meta, dict) or "kind" not in meta:
        raise CaseFormatError("missing meta.kind")
    kind = meta["kind"]
    if kind == "network":
        case = _network_from_doc(doc, meta)
    elif kind == "uc":
        case = _uc_from_doc(doc, meta)
    else:
        raise CaseFormatError(f"unknown case kind {kind!r}")
    violations = validate_case(case)
    if violations:
        raise CaseSemanticError(violations)
    return case


def _field(section: str, idx: int, row: dict, key: str, caster):
    try:
        return caster(row[key])
    except KeyError:
        raise CaseFormatError(f"{section}[{idx}] is missing field {key!r}") from None
    except (TypeError, ValueError):
        raise CaseFormatError(f"{section}[{idx}].{key} has a non-numeric value "
                              f"{row.get(key)!r}") from None


def _network_from_doc(doc: dict, meta: dict) -> NetworkCase:
    for section in ("buses", "lines", "generators", "demands"):
        if not isinstance(doc.get(section), list):
            raise CaseFormatError(f"missing or non-list section {section!r}")
    if "reference_bus" not in meta:
        raise CaseFormatError("missing meta.reference_bus")
    lines = tuple(Line(_field("lines", i, r, "from_bus", int),
                       _field("lines", i, r, "to_bus", int),
                       _field("lines", i, r, "susceptance", float),
                       _field("lines", i, r, "flow_limit", float))
                  for i, r in enumerate(doc["lines"]))
    gens = tuple(Generator(str(r.get("id", f"g{i + 1}")),
                           _field("generators", i, r, "bus", int),
                           _field("generators", i, r, "cost", float),
                           _field("generators", i, r, "p_min", float),
                           _field("generators", i, r, "p_max", float))
                 for i, r in enumerate(doc["generators"]))
    demands = tuple(Demand(str(r.get("id", f"d{i + 1}")),
                           _field("demands", i, r, "bus", int),
                           _field("demands", i, r, "default", float))
                    for i, r in enumerate(doc["demands"]))
    return NetworkCase(name=str(meta.get("name", "unnamed")),
                       buses=tuple(int(b) for b in doc["buses"]),
                       lines=lines, generators=gens, demands=demands,
                       reference_bus=int(meta["reference_bus"]))


def _uc_from_doc(doc: dict, meta: dict) -> UcCase:
    if not isinstance(doc.get("uc_units"), list):
        raise CaseFormatError("missing or non-list section 'uc_units'")
    if "horizon" not in doc:
        raise CaseFormatError("missing section 'horizon'")
    units = []
    for i, r in enumerate(doc["uc_units"]):
        units.append(UcUnit(
            id=str(r.get("id", f"g{i + 1}")),
            c1_pr=_field("uc_units", i, r, "c1_pr", float),
            c0_pr=_field("uc_units", i, r, "c0_pr", float),
            c_su=_field("uc_units", i, r, "c_su", float),
            c_sd=_field("uc_units", i, r, "c_sd", float),
            p_min=_field("uc_units", i, r, "p_min", float),
            p_max=_field("uc_units", i, r, "p_max", float),
            r_up=_field("uc_units", i, r, "r_up", float),
            r_dn=_field("uc_units", i, r, "r_dn", float),
            t_up=_field("uc_units", i, r, "t_up", int),
            t_dn=_field("uc_units", i, r, "t_dn", int)))
    initial: dict[str, UnitInitialState] = {}
    for uid, st in (doc.get("initial_state") or {}).items():
        if not isinstance(st, dict):
            raise CaseFormatError(f"initial_state.{uid} must be an object")
        initial[str(uid)] = UnitInitialState(
            commitment=int(st.get("commitment", 0)),
            output=float(st.get("output", 0.0)),
            hours_in_state=int(st.get("hours_in_state", 0)))
    return UcCase(name=str(meta.get("name", "unnamed")), units=tuple(units),
                  horizon=int(doc["horizon"]), initial_state=initial)


def serialize_case(case) -> str:
    """Canonical JSON text; parse_case(serialize_case(c)) == c."""
    if isinstance(case, NetworkCase):
        doc = {
            "meta": {"name": case.name, "kind": "network",
                     "reference_bus": case.reference_bus},
            "buses": list(case.buses),
            "lines": [asdict(ln) for ln in case.lines],
            "generators": [asdict(g) for g in case.generators],
            "demands": [asdict(d) for d in case.demands],
        }
    elif isinstance(case, UcCase):
        doc = {
            "meta": {"name": case.name, "kind": "uc"},
            "horizon": case.horizon,
            "uc_units": [asdict(u) for u in case.units],
            "initial_state": {uid: asdict(st)
                              for uid, st in sorted(case.initial_state.items())},
        }
    else:
        raise TypeError(f"not a case: {type(case)!r}")
    return json.dumps(doc, indent=2, sort_keys=False)


# --------------------------------------------------------------------------
# MATPOWER-subset importer

_MAT_TABLE = re.compile(r"mpc\.(?P<name>\w+)\s*=\s*\[(?P<body>.*?)\]\s*;",
                        re.DOTALL)


def _matpower_tables(text: str) -> dict[str, list[list[float]]]:
    # strip % comments before scanning for tables
    stripped = "\n".join(line.split("%", 1)[0] for line in text.splitlines())
    tables: dict[str, list[list[float]]] = {}
    for m in _MAT_TABLE.finditer(stripped):
        rows = []
        for chunk in m.group("body").replace("\n", ";").split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                rows.append([float(tok) for tok in chunk.replace(",", " ").split()])
            except ValueError:
                raise CaseFormatError(
                    f"mpc.{m.group('name')}: non-numeric row {chunk!r}") from None
        tables[m.group("name")] = rows
    return tables


def import_matpower(text: str, name: str = "imported") -> NetworkCase:
    """Convert the bus/branch/gen/gencost tables of a MATPOWER-style case.

    Reactance becomes susceptance (b = 1/x), reactive-only generators
    (p_max <= 0) are dropped, and the linear cost coefficient maps to the
    generator cost.  Quadratic cost rows are rejected outright.
    """
    tables = _matpower_tables(text)
    for required in ("bus", "branch", "gen", "gencost"):
        if required not in tables:
            raise CaseFormatError(f"missing table mpc.{required}")

    buses, demands, reference = [], [], None
    for i, row in enumerate(tables["bus"]):
        if len(row) < 3:
            raise CaseFormatError(f"mpc.bus row {i} too short")
        bus_id, bus_type, pd = int(row[0]), int(row[1]), float(row[2])
        buses.append(bus_id)
        if bus_type == 3 and reference is None:
            reference = bus_id
        if pd > 0:
            demands.append(Demand(id=f"d{bus_id}", bus=bus_id, default=pd))
    if reference is None:
        reference = buses[0] if buses else 0

    lines = []
    for i, row in enumerate(tables["branch"]):
        if len(row) < 6:
            raise CaseFormatError(f"mpc.branch row {i} too short")
        status = row[10] if len(row) > 10 else 1.0
        if status == 0:
            continue
        x = float(row[3])
        if x == 0:
            raise CaseFormatError(f"mpc.branch row {i}: zero reactance")
        rate_a = float(row[5])
        lines.append(Line(from_bus=int(row[0]), to_bus=int(row[1]),
                          susceptance=1.0 / x,
                          flow_limit=rate_a if rate_a > 0 else math.inf))

    gen_rows = tables["gen"]
    cost_rows = tables["gencost"]
    if len(cost_rows) < len(gen_rows):
        raise CaseFormatError("mpc.gencost has fewer rows than mpc.gen")
    generators = []
    bad_cost: list[str] = []
    for i, row in enumerate(gen_rows):
        if len(row) < 10:
            raise CaseFormatError(f"mpc.gen row {i} too short")
        status = row[7] if len(row) > 7 else 1.0
        p_max, p_min = float(row[8]), float(row[9])
        gid = f"g{i + 1}"
        if status == 0 or p_max <= 0:   # out of service or reactive-only
            continue
        cost_row = cost_rows[i]
        if len(cost_row) < 4:
            raise CaseFormatError(f"mpc.gencost row {i} too short")
        model, ncoef = int(cost_row[0]), int(cost_row[3])
        coeffs = cost_row[4:4 + ncoef]
        if model != 2 or len(coeffs) != ncoef:
            bad_cost.append(gid)
            continue
        # polynomial c_n..c_0; anything above the linear term must vanish
        higher, linear = coeffs[:-2], coeffs[-2] if ncoef >= 2 else 0.0
        if ncoef < 2 or any(abs(cc) > 1e-12 for cc in higher):
            bad_cost.append(gid)
            continue
        generators.append(Generator(id=gid, bus=int(row[0]), cost=float(linear),
                                    p_min=p_min, p_max=p_max))
    if bad_cost:
        raise CaseFormatError("unsupported cost model (need a pure linear term) "
                              f"for generators: {', '.join(bad_cost)}")

    case = NetworkCase(name=name, buses=tuple(buses), lines=tuple(lines),
                       generators=tuple(generators), demands=tuple(demands),
                       reference_bus=reference)
    violations = validate_case(case)
    if violations:
        raise CaseSemanticError(violations)
    return case
