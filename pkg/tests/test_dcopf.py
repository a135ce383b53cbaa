"""dcopf tests: published five-bus values, hand oracles, dual identities."""
import importlib.resources as resources

import numpy as np
import pytest

from gridce.cases import (Demand, DemandScenario, Generator, Line, NetworkCase,
                          parse_case)
from gridce.dcopf import (active_set, build_dcopf, canonical_inequalities,
                          ineq_slacks, solve_dcopf)
from gridce.solver import BuiltinBackend, ScipyBackend


def load_fivebus() -> NetworkCase:
    return parse_case((resources.files("gridce") / "data" / "fivebus.json").read_text())


FIVEBUS = load_fivebus()
FACTUAL = FIVEBUS.default_scenario()


@pytest.fixture(scope="module")
def fivebus_solution():
    return solve_dcopf(FIVEBUS, FACTUAL)


def test_build_shapes():
    lp, varmap = build_dcopf(FIVEBUS, FACTUAL)
    assert len(varmap.balance_rows) == 5
    assert len(varmap.flow_rows) == 6
    assert len(varmap.pg) == 5 and len(varmap.pl) == 6 and len(varmap.delta) == 5
    # canonical inequality order: per line lower/upper, then per gen
    kinds = [i.kind for i in varmap.inequalities]
    assert kinds[:4] == ["line_lower", "line_upper", "line_lower", "line_upper"]
    assert kinds[-2:] == ["gen_lower", "gen_upper"]
    assert varmap.n_ineq == 2 * 6 + 2 * 5


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        build_dcopf(FIVEBUS, DemandScenario("dcopf-nodal", (1.0, 2.0)))
    with pytest.raises(ValueError):
        build_dcopf(FIVEBUS, DemandScenario("uc-hourly", (1.0,) * 5))


def test_fivebus_dispatch_reproduces_published_values(fivebus_solution):
    sol = fivebus_solution
    assert sol.is_optimal
    np.testing.assert_allclose(sol.pg, [500.0, 306.2, 485.9, 14.1, 233.8],
                               atol=0.1)
    expected_obj = 14 * 500 + 15 * 306.2 + 30 * 485.9 + 40 * 14.1 + 10 * 233.8
    assert sol.objective == pytest.approx(expected_obj, abs=3.0)


def test_fivebus_four_congested_lines(fivebus_solution):
    sol = fivebus_solution
    congested = [e for e in range(6)
                 if abs(abs(sol.pl[e]) - 240.0) <= 1e-4]
    assert len(congested) == 4


def test_fivebus_line45_lower_dual(fivebus_solution):
    sol = fivebus_solution
    e45 = next(e for e, ln in enumerate(FIVEBUS.lines)
               if {ln.from_bus, ln.to_bus} == {4, 5})
    assert sol.lambda_line_lower[e45] == pytest.approx(53.2, abs=0.1)
    # and it is the largest flow-limit multiplier anywhere
    all_line_duals = np.concatenate([sol.lambda_line_lower, sol.lambda_line_upper])
    assert np.max(all_line_duals) == pytest.approx(sol.lambda_line_lower[e45])


def test_zero_demand_zero_dispatch():
    sol = solve_dcopf(FIVEBUS, DemandScenario("dcopf-nodal", (0.0,) * 5))
    assert sol.is_optimal
    np.testing.assert_allclose(sol.pg, 0.0, atol=1e-7)
    assert sol.objective == pytest.approx(0.0, abs=1e-6)


def test_two_bus_hand_oracle():
    """One line, load at the far bus: flow equals that load."""
    case = NetworkCase(
        name="2bus", buses=(1, 2), reference_bus=1,
        lines=(Line(1, 2, susceptance=20.0, flow_limit=150.0),),
        generators=(Generator("g1", 1, cost=12.0, p_min=0.0, p_max=300.0),),
        demands=(Demand("d1", 2, default=80.0),))
    sol = solve_dcopf(case, case.default_scenario())
    assert sol.is_optimal
    assert sol.pg[0] == pytest.approx(80.0, abs=1e-7)
    assert sol.pl[0] == pytest.approx(80.0, abs=1e-7)
    assert sol.delta[0] == pytest.approx(0.0, abs=1e-9)
    # angle difference consistent with the flow law
    assert sol.pl[0] == pytest.approx((sol.delta[0] - sol.delta[1]) * 20.0,
                                      abs=1e-7)
    # uncongested single-generator system: price equals marginal cost
    np.testing.assert_allclose(sol.lambda_kcl, [12.0, 12.0], atol=1e-7)


def test_infeasible_demand_reported_as_status():
    heavy = DemandScenario("dcopf-nodal", (2000.0, 2000.0, 2000.0, 2000.0, 2000.0))
    sol = solve_dcopf(FIVEBUS, heavy)
    assert sol.status == "infeasible"


def test_merit_order_on_uncongested_copy():
    relaxed = NetworkCase(
        name="relaxed", buses=FIVEBUS.buses,
        lines=tuple(Line(ln.from_bus, ln.to_bus, ln.susceptance,
                         ln.flow_limit * 100) for ln in FIVEBUS.lines),
        generators=FIVEBUS.generators, demands=FIVEBUS.demands,
        reference_bus=FIVEBUS.reference_bus)
    sol = solve_dcopf(relaxed, FACTUAL)
    assert sol.is_optimal
    total = sum(FACTUAL.values)
    assert sol.pg.sum() == pytest.approx(total, abs=1e-6)
    order = np.argsort([g.cost for g in relaxed.generators])
    remaining = total
    for gi in order:
        expected = min(relaxed.generators[gi].p_max, remaining)
        assert sol.pg[gi] == pytest.approx(expected, abs=1e-6)
        remaining -= expected


def test_stationarity_identities(fivebus_solution):
    """Extracted duals satisfy the optimality conditions exactly."""
    sol = fivebus_solution
    bus_pos = {b: i for i, b in enumerate(FIVEBUS.buses)}
    for g, gen in enumerate(FIVEBUS.generators):
        lhs = gen.cost - sol.lambda_kcl[bus_pos[gen.bus]]
        rhs = sol.lambda_gen_lower[g] - sol.lambda_gen_upper[g]
        assert lhs == pytest.approx(rhs, abs=1e-6)
    for e, ln in enumerate(FIVEBUS.lines):
        lhs = (sol.lambda_kcl[bus_pos[ln.from_bus]]
               - sol.lambda_kcl[bus_pos[ln.to_bus]] - sol.lambda_kvl[e])
        rhs = sol.lambda_line_lower[e] - sol.lambda_line_upper[e]
        assert lhs == pytest.approx(rhs, abs=1e-6)


def test_duality_demand_value_minus_rents(fivebus_solution):
    sol = fivebus_solution
    bus_pos = {b: i for i, b in enumerate(FIVEBUS.buses)}
    value = sum(v * sol.lambda_kcl[bus_pos[d.bus]]
                for d, v in zip(FIVEBUS.demands, FACTUAL.values))
    line_rent = sum((sol.lambda_line_lower[e] + sol.lambda_line_upper[e]) * ln.flow_limit
                    for e, ln in enumerate(FIVEBUS.lines))
    gen_rent = sum(sol.lambda_gen_upper[g] * gen.p_max
                   - sol.lambda_gen_lower[g] * gen.p_min
                   for g, gen in enumerate(FIVEBUS.generators))
    assert value - line_rent - gen_rent == pytest.approx(sol.objective, rel=1e-6)


def test_active_set_matches_slacks(fivebus_solution):
    sol = fivebus_solution
    slacks = ineq_slacks(FIVEBUS, sol.pg, sol.pl)
    infos = canonical_inequalities(FIVEBUS)
    alpha = active_set(FIVEBUS, sol)
    assert alpha.shape == (len(infos),)
    assert np.all((slacks <= 1e-5) == (alpha == 1))
    line_alpha = [a for a, info in zip(alpha, infos) if info.kind.startswith("line")]
    assert sum(line_alpha) == 4
    # duals only on binding constraints (complementary slackness)
    duals = sol.ineq_duals(build_dcopf(FIVEBUS, FACTUAL)[1])
    assert np.all(duals[alpha == 0] <= 1e-6)


def test_backends_agree_on_fivebus():
    a = solve_dcopf(FIVEBUS, FACTUAL, backend=ScipyBackend())
    b = solve_dcopf(FIVEBUS, FACTUAL, backend=BuiltinBackend())
    assert a.is_optimal and b.is_optimal
    assert a.objective == pytest.approx(b.objective, rel=1e-8)
    np.testing.assert_allclose(a.pg, b.pg, atol=1e-5)
