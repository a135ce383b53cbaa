"""case-model tests: parsing, validation, MATPOWER import, round-trips."""
import importlib.resources as resources
import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from gridce.cases import (CaseFormatError, CaseSemanticError, Demand,
                          DemandScenario, Generator, Line, NetworkCase, UcCase,
                          UcUnit, UnitInitialState, import_matpower, parse_case,
                          serialize_case, validate_case)


def data_text(name: str) -> str:
    return (resources.files("gridce") / "data" / name).read_text()


@pytest.fixture(scope="module")
def fivebus() -> NetworkCase:
    return parse_case(data_text("fivebus.json"))


@pytest.fixture(scope="module")
def uc3() -> UcCase:
    return parse_case(data_text("uc3.json"))


def test_fivebus_shape(fivebus):
    assert len(fivebus.buses) == 5
    assert len(fivebus.lines) == 6
    assert len(fivebus.generators) == 5
    assert [g.cost for g in fivebus.generators] == [14, 15, 30, 40, 10]
    assert all(g.p_min == 0 and g.p_max == 500 for g in fivebus.generators)
    assert all(ln.flow_limit == 240 for ln in fivebus.lines)
    assert fivebus.default_scenario().values == (300, 480, 140, 600, 20)
    assert validate_case(fivebus) == []


def test_uc3_units(uc3):
    g1 = uc3.units[0]
    assert (g1.p_min, g1.p_max, g1.c1_pr, g1.c0_pr, g1.c_su, g1.c_sd,
            g1.r_up, g1.r_dn, g1.t_up, g1.t_dn) == (50, 300, 10, 100, 300, 0,
                                                    10, 10, 4, 4)
    assert uc3.horizon == 25
    # cold start default: off for max(TU, TD) hours
    init = uc3.initial_for(g1)
    assert (init.commitment, init.output, init.hours_in_state) == (0, 0.0, 4)
    assert validate_case(uc3) == []


def test_table_one_document_parses_verbatim():
    """A document carrying the published three-unit data parses cleanly."""
    doc = {
        "meta": {"name": "tablei", "kind": "uc"}, "horizon": 25,
        "uc_units": [
            {"id": "g1", "c1_pr": 10, "c0_pr": 100, "c_su": 300, "c_sd": 0,
             "p_min": 50, "p_max": 300, "r_up": 10, "r_dn": 10, "t_up": 4, "t_dn": 4},
            {"id": "g2", "c1_pr": 20, "c0_pr": 100, "c_su": 70, "c_sd": 0,
             "p_min": 10, "p_max": 150, "r_up": 40, "r_dn": 40, "t_up": 3, "t_dn": 3},
            {"id": "g3", "c1_pr": 50, "c0_pr": 100, "c_su": 70, "c_sd": 0,
             "p_min": 2, "p_max": 100, "r_up": 100, "r_dn": 100, "t_up": 2, "t_dn": 2},
        ],
    }
    case = parse_case(json.dumps(doc))
    assert isinstance(case, UcCase)
    g1 = case.units[0]
    assert (g1.p_min, g1.p_max, g1.c1_pr, g1.c0_pr, g1.c_su, g1.c_sd,
            g1.r_up, g1.r_dn, g1.t_up, g1.t_dn) == (50, 300, 10, 100, 300, 0,
                                                    10, 10, 4, 4)


def test_syntax_error_reports_position():
    with pytest.raises(CaseFormatError, match=r"line \d+, column \d+"):
        parse_case('{"meta": {"kind": "network",}}')


def test_dangling_line_reference_names_the_line(fivebus):
    doc = json.loads(serialize_case(fivebus))
    doc["lines"][2]["to_bus"] = 99
    with pytest.raises(CaseSemanticError) as exc:
        parse_case(json.dumps(doc))
    codes = {(v.code, v.path) for v in exc.value.violations}
    assert ("dangling_bus_ref", "lines[2].to_bus") in codes


def test_gen_bounds_inverted_violation(fivebus):
    doc = json.loads(serialize_case(fivebus))
    doc["generators"][1]["p_min"] = 10.0
    doc["generators"][1]["p_max"] = 5.0
    with pytest.raises(CaseSemanticError) as exc:
        parse_case(json.dumps(doc))
    assert any(v.code == "gen_bounds_inverted" for v in exc.value.violations)


def test_disconnected_bus_names_component():
    case = NetworkCase(
        name="split", buses=(1, 2, 3), reference_bus=1,
        lines=(Line(1, 2, 10.0, 100.0),),
        generators=(Generator("g1", 1, 10.0, 0.0, 50.0),),
        demands=(Demand("d1", 2, 20.0),))
    violations = validate_case(case)
    assert any(v.code == "graph_disconnected" and "3" in v.message
               for v in violations)


def test_uc_invariants():
    bad = UcCase(name="bad", horizon=24, units=(
        UcUnit("g1", c1_pr=10, c0_pr=5, c_su=0, c_sd=0, p_min=20, p_max=10,
               r_up=-1, r_dn=5, t_up=0, t_dn=2),))
    codes = {v.code for v in validate_case(bad)}
    assert {"gen_bounds_inverted", "negative_ramp", "min_time_lt_1"} <= codes


def test_uc_initial_state_consistency():
    unit = UcUnit("g1", 10, 5, 0, 0, p_min=20, p_max=100, r_up=5, r_dn=5,
                  t_up=2, t_dn=2)
    off_nonzero = UcCase("c", (unit,), 24,
                         {"g1": UnitInitialState(0, 15.0, 2)})
    assert any(v.code == "initial_output_inconsistent"
               for v in validate_case(off_nonzero))
    on_out_of_range = UcCase("c", (unit,), 24,
                             {"g1": UnitInitialState(1, 150.0, 2)})
    assert any(v.code == "initial_output_inconsistent"
               for v in validate_case(on_out_of_range))
    ok = UcCase("c", (unit,), 24, {"g1": UnitInitialState(1, 60.0, 3)})
    assert validate_case(ok) == []


def test_roundtrip_bundled_cases(fivebus, uc3):
    assert parse_case(serialize_case(fivebus)) == fivebus
    assert parse_case(serialize_case(uc3)) == uc3


@st.composite
def network_cases(draw):
    n_bus = draw(st.integers(2, 6))
    buses = tuple(range(1, n_bus + 1))
    # a spanning chain keeps the graph connected, extra lines optional
    lines = [Line(i, i + 1,
                  draw(st.floats(1.0, 50.0, allow_nan=False)),
                  draw(st.floats(10.0, 500.0, allow_nan=False)))
             for i in range(1, n_bus)]
    if n_bus > 2 and draw(st.booleans()):
        lines.append(Line(1, n_bus, 25.0, 100.0))
    gens = tuple(Generator(f"g{i}", draw(st.sampled_from(buses)),
                           draw(st.floats(0, 90, allow_nan=False)), 0.0,
                           draw(st.floats(1, 400, allow_nan=False)))
                 for i in range(draw(st.integers(1, 3))))
    demands = tuple(Demand(f"d{i}", draw(st.sampled_from(buses)),
                           draw(st.floats(0, 300, allow_nan=False)))
                    for i in range(draw(st.integers(1, 3))))
    return NetworkCase("prop", buses, tuple(lines), gens, demands,
                       reference_bus=1)


@settings(max_examples=40, deadline=None)
@given(network_cases())
def test_roundtrip_property(case):
    """parse(serialize(case)) is identical for every valid case."""
    assert validate_case(case) == []
    assert parse_case(serialize_case(case)) == case


def test_scenario_invariants():
    with pytest.raises(ValueError):
        DemandScenario(kind="dcopf-nodal", values=(1.0, -2.0))
    with pytest.raises(ValueError):
        DemandScenario(kind="weekly", values=(1.0,))
    s = DemandScenario(kind="uc-hourly", values=[1, 2, 3])
    t = DemandScenario(kind="uc-hourly", values=[2, 2, 5])
    assert s.l1_distance(t) == pytest.approx(3.0)


# -- MATPOWER import ---------------------------------------------------------

def mat_text(name: str) -> str:
    return (resources.files("gridce") / "data" / "matpower" / name).read_text()


def test_import_case5_susceptances():
    case = import_matpower(mat_text("case5_pjm.m"), name="case5")
    assert len(case.lines) == 6
    xs = [0.0281, 0.0304, 0.0064, 0.0108, 0.0297, 0.0297]
    for ln, x in zip(case.lines, xs):
        assert ln.susceptance == pytest.approx(1.0 / x)
    assert [g.bus for g in case.generators] == [1, 1, 3, 4, 5]
    assert [g.cost for g in case.generators] == [14, 15, 30, 40, 10]
    assert case.reference_bus == 4
    assert {d.bus: d.default for d in case.demands} == {2: 300.0, 3: 300.0,
                                                        4: 400.0}


def test_import_drops_reactive_only_generator():
    text = mat_text("case5_pjm.m")
    # turn the bus-4 generator into a synchronous condenser (Pmax = 0)
    text = text.replace("4	0	0	150	-150	1	100	1	200	0;",
                        "4	0	0	150	-150	1	100	1	0	0;")
    case = import_matpower(text)
    assert len(case.generators) == 4
    assert all(g.bus != 4 for g in case.generators)


def test_import_rejects_quadratic_costs():
    text = mat_text("case5_pjm.m").replace(
        "2	0	0	2	14	0;", "2	0	0	3	0.5	0	0;").replace(
        "2	0	0	2	15	0;", "2	0	0	3	0.2	0	0;")
    with pytest.raises(CaseFormatError) as exc:
        import_matpower(text)
    assert "g1" in str(exc.value) and "g2" in str(exc.value)


def test_import_missing_table():
    with pytest.raises(CaseFormatError, match="gencost"):
        import_matpower("mpc.bus = [1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;];\n"
                        "mpc.branch = [];\nmpc.gen = [];")


def test_all_bundled_benchmarks_import_clean():
    files = sorted(p.name for p in
                   (resources.files("gridce") / "data" / "matpower").iterdir()
                   if p.name.endswith(".m"))
    assert len(files) >= 5
    for fname in files:
        case = import_matpower(mat_text(fname), name=fname)
        assert validate_case(case) == [], fname


def test_import_unlimited_rate_maps_to_inf():
    text = mat_text("case5_pjm.m").replace(
        "1	2	0.00281	0.0281	0.00712	400",
        "1	2	0.00281	0.0281	0.00712	0")
    case = import_matpower(text)
    assert math.isinf(case.lines[0].flow_limit)
