"""uc tests: published three-unit schedule, brute-force oracle, invariants."""
import importlib.resources as resources
import json

import numpy as np
import pytest

from gridce.cases import DemandScenario, UcCase, UcUnit, UnitInitialState, parse_case
from gridce.uc import (build_uc, check_schedule, schedule_cost, solve_uc)

from oracles import brute_force_uc


def data_text(name: str) -> str:
    return (resources.files("gridce") / "data" / name).read_text()


UC3 = parse_case(data_text("uc3.json"))
FACTUAL = DemandScenario(**json.loads(data_text("uc3_factual_profile.json")))


@pytest.fixture(scope="module")
def uc3_schedule():
    return solve_uc(UC3, FACTUAL)


def test_build_counts():
    lp, varmap = build_uc(UC3, FACTUAL)
    n_commit = sum(lp.integer[i] for row in varmap.u for i in row)
    assert n_commit == 3 * 25
    assert len(varmap.balance_rows) == 25


def test_single_unit_flat_demand():
    case = UcCase("one", (UcUnit("g1", 12.0, 5.0, 40.0, 0.0, p_min=10.0,
                                 p_max=100.0, r_up=100.0, r_dn=100.0,
                                 t_up=1, t_dn=1),), horizon=4)
    profile = DemandScenario("uc-hourly", (60.0, 60.0, 60.0, 60.0))
    sched = solve_uc(case, profile)
    assert sched.is_optimal
    assert np.all(sched.U == 1)
    np.testing.assert_allclose(sched.P[0], 60.0, atol=1e-6)
    assert sched.objective == pytest.approx(4 * (12 * 60 + 5) + 40, abs=1e-5)


def test_factual_commitment_pattern(uc3_schedule):
    """Morning peaking unit is g3; g2 runs the evening from 17:00."""
    s = uc3_schedule
    assert s.is_optimal
    g2, g3 = s.U[1], s.U[2]
    assert np.all(g2[:17] == 0) and g2[17] == 1          # off until 17:00
    assert np.all(g3[6:14] == 1)                          # morning block
    assert np.all(g3[17:] == 0)
    assert s.P[1, 17] == pytest.approx(28.3, abs=0.1)     # forced by the
    assert s.P[2, 8] == pytest.approx(70.37, abs=0.05)    # next-hour ramp need
    np.testing.assert_allclose(s.P[0, 18:21], 300.0, atol=1e-6)


def test_factual_schedule_feasible_and_costed(uc3_schedule):
    s = uc3_schedule
    assert check_schedule(UC3, FACTUAL, s) == []
    assert schedule_cost(UC3, s) == pytest.approx(s.objective, rel=1e-6)
    np.testing.assert_allclose(s.hourly_total, FACTUAL.values, atol=1e-5)


def test_capacity_screen_infeasible():
    heavy = DemandScenario("uc-hourly", tuple([600.0] * 25))
    assert solve_uc(UC3, heavy).status == "infeasible"


def test_never_simultaneous_start_stop(uc3_schedule):
    s = uc3_schedule
    assert np.all(s.USU + s.USD <= 1)


def test_min_up_down_windows(uc3_schedule):
    s = uc3_schedule
    for g, unit in enumerate(UC3.units):
        runs = _runs(s.U[g])
        for value, length, end in runs:
            if end == 25:    # horizon-end runs may be clipped
                continue
            if value == 1:
                assert length >= unit.t_up, f"{unit.id} up-run too short"
            else:
                assert length >= unit.t_dn or end <= unit.t_dn, \
                    f"{unit.id} down-run too short"


def _runs(u):
    runs = []
    start = 0
    for t in range(1, len(u) + 1):
        if t == len(u) or u[t] != u[start]:
            runs.append((u[start], t - start, t))
            start = t
    return runs


def test_two_unit_three_hour_matches_brute_force():
    case = UcCase("toy", (
        UcUnit("a", c1_pr=10.0, c0_pr=20.0, c_su=50.0, c_sd=0.0, p_min=20.0,
               p_max=80.0, r_up=30.0, r_dn=30.0, t_up=2, t_dn=1),
        UcUnit("b", c1_pr=25.0, c0_pr=10.0, c_su=15.0, c_sd=5.0, p_min=5.0,
               p_max=60.0, r_up=60.0, r_dn=60.0, t_up=1, t_dn=1),
    ), horizon=3)
    for profile_vals in [(50.0, 90.0, 70.0), (30.0, 30.0, 95.0),
                         (10.0, 60.0, 60.0)]:
        profile = DemandScenario("uc-hourly", profile_vals)
        sched = solve_uc(case, profile)
        best, best_U = brute_force_uc(case, profile_vals)
        assert sched.is_optimal
        assert sched.objective == pytest.approx(best, rel=1e-6, abs=1e-5)


def test_initially_on_unit_owes_up_time_and_ramps():
    case = UcCase("warm", (
        UcUnit("a", c1_pr=10.0, c0_pr=0.0, c_su=500.0, c_sd=0.0, p_min=10.0,
               p_max=100.0, r_up=15.0, r_dn=15.0, t_up=4, t_dn=2),
        UcUnit("b", c1_pr=30.0, c0_pr=0.0, c_su=0.0, c_sd=0.0, p_min=0.0,
               p_max=100.0, r_up=100.0, r_dn=100.0, t_up=1, t_dn=1),
    ), horizon=4, initial_state={"a": UnitInitialState(1, 50.0, 2)})
    profile = DemandScenario("uc-hourly", (70.0, 80.0, 70.0, 60.0))
    sched = solve_uc(case, profile)
    assert sched.is_optimal
    # a has been on 2 of 4 required hours: committed through hours 0 and 1
    assert sched.U[0, 0] == 1 and sched.U[0, 1] == 1
    # ramping from the 50 MW initial point
    assert abs(sched.P[0, 0] - 50.0) <= 15.0 + 1e-6
    assert check_schedule(case, profile, sched) == []
    best, _ = brute_force_uc(case, profile.values)
    assert sched.objective == pytest.approx(best, rel=1e-6)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_uc(UC3, DemandScenario("uc-hourly", (100.0,) * 10))
    with pytest.raises(ValueError):
        build_uc(UC3, DemandScenario("dcopf-nodal", (100.0,) * 25))


def test_region_cell_forcing(uc3_schedule):
    forced = solve_uc(UC3, FACTUAL, region_cell=("g2", 8))
    assert forced.is_optimal
    assert forced.U[1, 8] == 1
    assert forced.objective >= uc3_schedule.objective + 1.0
