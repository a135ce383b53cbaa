"""Counterfactual demand scenarios for DCOPF dispatch questions.

The bilevel problem (minimal L1 demand change such that a chosen generator
is dispatched at or above a threshold in some optimum) is collapsed to a
single level through the dispatch problem's optimality conditions.  The
complementarity between multipliers and constraint slacks is handled by one
of three interchangeable strategies:

  sos1     branch directly on multiplier/slack pairs,
  mip      Fortuny-Amat big-M binaries per inequality,
  mip+cut  the same with binaries pinned where a historical dataset shows a
           constraint always (or never) binding.

Every accepted answer is re-verified by plain lower-level re-solves; the
demand-versus-dispatch deviation bound holds by construction because the
corresponding cut is part of the model.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cases import DemandScenario, NetworkCase
from .ce_types import (CeConfig, CeResult, SolutionRegionDcopf,
                       VerificationRecord)
from .dcopf import (DispatchSolution, build_dcopf, canonical_inequalities,
                    ineq_slacks, solve_dcopf)
from .solver import (INF, LinearProgram, TolConfig, get_backend, solve_lp,
                     solve_milp, solve_with_complementarity)

METHODS = ("sos1", "mip", "mip+cut")


@dataclass
class BigMTable:
    """Per-inequality big-M values for the Fortuny-Amat linearization."""

    primal_m: np.ndarray   # bounds the constraint slack
    dual_m: np.ndarray     # bounds the multiplier

    def __post_init__(self):
        if np.any(~np.isfinite(self.primal_m)) or np.any(~np.isfinite(self.dual_m)):
            raise ValueError("big-M values must be finite")
        if np.any(self.primal_m <= 0) or np.any(self.dual_m <= 0):
            raise ValueError("big-M values must be positive")


@dataclass
class CeDcopfVarMap:
    theta: list[int]
    dev_up: list[int]
    dev_dn: list[int]
    pg: list[int]
    pl: list[int]
    delta: list[int]
    slack: list[int]          # one per canonical inequality
    lam: list[int]
    mu: list[int]             # nodal-balance multipliers (price sign)
    nu: list[int]             # flow-law multipliers
    z: list[int] | None = None


def derive_bigM(dataset, case: NetworkCase) -> BigMTable:
    """Dataset-informed multipliers bound: 10x the largest recorded value,
    floored at 1; slack bounds straight from the constraint ranges."""
    lam_max = getattr(dataset, "lambda_max", None)
    if lam_max is None or getattr(dataset, "size", 0) == 0:
        raise ValueError("dataset with recorded duals required")
    infos = canonical_inequalities(case)
    if len(lam_max) != len(infos):
        raise ValueError("dataset does not match the case's constraint set")
    dual_m = np.maximum(10.0 * np.abs(np.asarray(lam_max, dtype=float)), 1.0)
    primal_m = np.empty(len(infos))
    for i, info in enumerate(infos):
        if info.kind.startswith("line"):
            primal_m[i] = 2.0 * info.bound
        else:
            gen = case.generators[info.element]
            primal_m[i] = gen.p_max - gen.p_min
        if primal_m[i] <= 0:
            primal_m[i] = 1.0
    return BigMTable(primal_m=primal_m, dual_m=dual_m)


def derive_active_sets(dataset) -> tuple[set[int], set[int]]:
    """Constraint indices binding in every sample (C1) or in none (C0)."""
    alphas = getattr(dataset, "alphas", None)
    if alphas is None or len(alphas) == 0:
        raise ValueError("dataset with recorded active sets required")
    mat = np.asarray(alphas)
    c1 = set(np.where(mat.min(axis=0) == 1)[0].tolist())
    c0 = set(np.where(mat.max(axis=0) == 0)[0].tolist())
    return c1, c0


def build_ce_dcopf(case: NetworkCase, factual: DemandScenario,
                   region: SolutionRegionDcopf, method: str = "sos1",
                   bigm: BigMTable | None = None,
                   fixings: tuple[set[int], set[int]] | None = None,
                   factual_pg: np.ndarray | None = None
                   ) -> tuple[LinearProgram, CeDcopfVarMap]:
    """Single-level image of the counterfactual search.

    Variables are the mutable demands (split into deviation parts for the L1
    objective), the lower-level primal quantities, one multiplier per
    constraint and one explicit slack per inequality.  factual_pg is the
    factual optimal dispatch entering the demand-versus-dispatch bound; when
    omitted it is computed here.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method in ("mip", "mip+cut") and bigm is None:
        raise ValueError(f"{method} requires a BigMTable hint")
    if method == "mip+cut" and fixings is None:
        raise ValueError("mip+cut requires active-set fixings")
    if factual_pg is None:
        base = solve_dcopf(case, factual)
        if not base.is_optimal:
            raise ValueError("factual scenario is not solvable")
        factual_pg = base.pg

    g_idx = _gen_index(case, region.gen_id)
    lp = LinearProgram(f"ce-dcopf-{case.name}-{method}")
    bus_pos = {b: i for i, b in enumerate(case.buses)}
    infos = canonical_inequalities(case)

    theta = [lp.add_var(f"theta_{d.id}", lb=0.0) for d in case.demands]
    dev_up = [lp.add_var(f"devup_{d.id}", lb=0.0, obj=1.0) for d in case.demands]
    dev_dn = [lp.add_var(f"devdn_{d.id}", lb=0.0, obj=1.0) for d in case.demands]
    for k, d in enumerate(case.demands):
        lp.add_row({theta[k]: 1.0, dev_up[k]: -1.0, dev_dn[k]: 1.0}, "==",
                   float(factual.values[k]), f"theta_split_{d.id}")

    pg = [lp.add_var(f"pG_{g.id}", lb=g.p_min, ub=g.p_max)
          for g in case.generators]
    pl = [lp.add_var(f"pL_{e}", lb=-ln.flow_limit, ub=ln.flow_limit)
          for e, ln in enumerate(case.lines)]
    delta = [lp.add_var(f"delta_{b}", lb=-INF, ub=INF) for b in case.buses]
    slack = [lp.add_var(f"s_{i}", lb=0.0) for i in range(len(infos))]
    lam = [lp.add_var(f"lam_{i}", lb=0.0) for i in range(len(infos))]
    mu = [lp.add_var(f"mu_{b}", lb=-INF, ub=INF) for b in case.buses]
    nu = [lp.add_var(f"nu_{e}", lb=-INF, ub=INF) for e in range(len(case.lines))]
    rho = lp.add_var("rho_ref", lb=-INF, ub=INF)

    # primal feasibility: balance with mutable demand, flow law, ref angle
    balance: list[dict[int, float]] = [dict() for _ in case.buses]
    for e, ln in enumerate(case.lines):
        balance[bus_pos[ln.from_bus]][pl[e]] = 1.0
        balance[bus_pos[ln.to_bus]][pl[e]] = -1.0
    for gi, g in enumerate(case.generators):
        balance[bus_pos[g.bus]][pg[gi]] = -1.0
    for k, d in enumerate(case.demands):
        balance[bus_pos[d.bus]][theta[k]] = \
            balance[bus_pos[d.bus]].get(theta[k], 0.0) + 1.0
    for i, coeffs in enumerate(balance):
        lp.add_row(coeffs, "==", 0.0, f"balance_{case.buses[i]}")
    for e, ln in enumerate(case.lines):
        lp.add_row({pl[e]: 1.0, delta[bus_pos[ln.from_bus]]: -ln.susceptance,
                    delta[bus_pos[ln.to_bus]]: ln.susceptance}, "==", 0.0,
                   f"flow_{e}")
    lp.add_row({delta[bus_pos[case.reference_bus]]: 1.0}, "==", 0.0, "ref_angle")

    # explicit slacks of the canonical inequalities
    for i, info in enumerate(infos):
        if info.kind == "line_lower":
            lp.add_row({slack[i]: 1.0, pl[info.element]: -1.0}, "==",
                       info.bound, f"slackdef_{i}")
        elif info.kind == "line_upper":
            lp.add_row({slack[i]: 1.0, pl[info.element]: 1.0}, "==",
                       info.bound, f"slackdef_{i}")
        elif info.kind == "gen_lower":
            lp.add_row({slack[i]: 1.0, pg[info.element]: -1.0}, "==",
                       -info.bound, f"slackdef_{i}")
        else:
            lp.add_row({slack[i]: 1.0, pg[info.element]: 1.0}, "==",
                       info.bound, f"slackdef_{i}")

    # stationarity of the lower level
    by_gen: dict[int, dict[str, int]] = {g: {} for g in range(len(case.generators))}
    by_line: dict[int, dict[str, int]] = {e: {} for e in range(len(case.lines))}
    for i, info in enumerate(infos):
        if info.kind.startswith("gen"):
            by_gen[info.element][info.kind] = i
        else:
            by_line[info.element][info.kind] = i
    for gi, g in enumerate(case.generators):
        coeffs = {mu[bus_pos[g.bus]]: -1.0}
        if "gen_lower" in by_gen[gi]:
            coeffs[lam[by_gen[gi]["gen_lower"]]] = -1.0
        if "gen_upper" in by_gen[gi]:
            coeffs[lam[by_gen[gi]["gen_upper"]]] = 1.0
        lp.add_row(coeffs, "==", -g.cost, f"stat_pG_{g.id}")
    for e, ln in enumerate(case.lines):
        coeffs = {mu[bus_pos[ln.from_bus]]: 1.0, mu[bus_pos[ln.to_bus]]: -1.0,
                  nu[e]: -1.0}
        if "line_lower" in by_line[e]:
            coeffs[lam[by_line[e]["line_lower"]]] = -1.0
        if "line_upper" in by_line[e]:
            coeffs[lam[by_line[e]["line_upper"]]] = 1.0
        lp.add_row(coeffs, "==", 0.0, f"stat_pL_{e}")
    for n, b in enumerate(case.buses):
        coeffs: dict[int, float] = {}
        for e, ln in enumerate(case.lines):
            if bus_pos[ln.from_bus] == n:
                coeffs[nu[e]] = coeffs.get(nu[e], 0.0) - ln.susceptance
            if bus_pos[ln.to_bus] == n:
                coeffs[nu[e]] = coeffs.get(nu[e], 0.0) + ln.susceptance
        if b == case.reference_bus:
            coeffs[rho] = 1.0
        lp.add_row(coeffs, "==", 0.0, f"stat_delta_{b}")

    # solution region
    lp.add_row({pg[g_idx]: 1.0}, ">=", region.threshold_mw, "region")

    # demand deviation bounded by dispatch deviation (valid at optimality)
    gup, gdn = [], []
    cut = {}
    for gi, g in enumerate(case.generators):
        m_up = max(g.p_max - factual_pg[gi], 0.0)
        m_dn = max(factual_pg[gi] - g.p_min, 0.0)
        iu = lp.add_var(f"gup_{g.id}", lb=0.0, ub=m_up)
        idn = lp.add_var(f"gdn_{g.id}", lb=0.0, ub=m_dn)
        lp.add_row({pg[gi]: 1.0, iu: -1.0, idn: 1.0}, "==",
                   float(factual_pg[gi]), f"pg_split_{g.id}")
        cut[iu] = -1.0
        cut[idn] = -1.0
        gup.append(iu)
        gdn.append(idn)
    for k in range(len(case.demands)):
        cut[dev_up[k]] = 1.0
        cut[dev_dn[k]] = 1.0
    lp.add_row(cut, "<=", 0.0, "deviation_bound")

    varmap = CeDcopfVarMap(theta=theta, dev_up=dev_up, dev_dn=dev_dn, pg=pg,
                           pl=pl, delta=delta, slack=slack, lam=lam, mu=mu,
                           nu=nu)
    if method == "sos1":
        for i in range(len(infos)):
            lp.add_comp_pair(lam[i], slack[i])
        for gi in range(len(case.generators)):
            if lp.ub[gup[gi]] > 0 and lp.ub[gdn[gi]] > 0:
                lp.add_comp_pair(gup[gi], gdn[gi])
    else:
        z = []
        c1, c0 = fixings if method == "mip+cut" else (set(), set())
        for i in range(len(infos)):
            lo, hi = (1, 1) if i in c1 else ((0, 0) if i in c0 else (0, 1))
            zi = lp.add_var(f"z_{i}", lb=lo, ub=hi, integer=True)
            lp.add_row({lam[i]: 1.0, zi: -float(bigm.dual_m[i])}, "<=", 0.0,
                       f"bigm_dual_{i}")
            lp.add_row({slack[i]: 1.0, zi: float(bigm.primal_m[i])}, "<=",
                       float(bigm.primal_m[i]), f"bigm_primal_{i}")
            z.append(zi)
        for gi, g in enumerate(case.generators):
            m_up, m_dn = lp.ub[gup[gi]], lp.ub[gdn[gi]]
            if m_up > 0 and m_dn > 0:
                zg = lp.add_var(f"zsplit_{g.id}", lb=0, ub=1, integer=True)
                lp.add_row({gup[gi]: 1.0, zg: -m_up}, "<=", 0.0,
                           f"bigm_gup_{g.id}")
                lp.add_row({gdn[gi]: 1.0, zg: m_dn}, "<=", m_dn,
                           f"bigm_gdn_{g.id}")
                z.append(zg)
        varmap.z = z
    return lp, varmap


def verify_ce(case: NetworkCase, region: SolutionRegionDcopf,
              scenario: DemandScenario, tols: TolConfig,
              backend=None) -> tuple[VerificationRecord, DispatchSolution | None]:
    """Optimistic acceptance test: the region must touch the optimal face."""
    g_idx = _gen_index(case, region.gen_id)
    plain = solve_dcopf(case, scenario, tols, backend=backend)
    if not plain.is_optimal:
        return VerificationRecord(passed=False), None
    if plain.pg[g_idx] >= region.threshold_mw - 10 * tols.feas_tol:
        record = VerificationRecord(passed=True, objective_plain=plain.objective,
                                    objective_region=plain.objective, gap=0.0)
        return record, plain
    lp, varmap = build_dcopf(case, scenario)
    lp.add_row({varmap.pg[g_idx]: 1.0}, ">=", region.threshold_mw, "region")
    restricted = solve_lp(lp, tols, backend=backend)
    if restricted.status != "optimal":
        return VerificationRecord(passed=False,
                                  objective_plain=plain.objective), None
    gap = restricted.objective - plain.objective
    passed = abs(gap) <= tols.abs_opt_gap(plain.objective)
    record = VerificationRecord(passed=passed, objective_plain=plain.objective,
                                objective_region=restricted.objective, gap=gap)
    if not passed:
        return record, None
    sol = DispatchSolution(status="optimal",
                           pg=restricted.x[varmap.pg],
                           pl=restricted.x[varmap.pl],
                           delta=restricted.x[varmap.delta],
                           objective=restricted.objective)
    return record, sol


def kkt_residuals(case: NetworkCase, scenario: DemandScenario,
                  dispatch: DispatchSolution,
                  duals: DispatchSolution) -> tuple[float, float]:
    """Stationarity and complementarity residuals of a primal/dual pairing.

    dispatch supplies the primal point, duals the multipliers (they may come
    from different optimal solutions of the same LP; any optimal pair is
    complementary).
    """
    bus_pos = {b: i for i, b in enumerate(case.buses)}
    stat = 0.0
    for gi, g in enumerate(case.generators):
        r = (g.cost - duals.lambda_kcl[bus_pos[g.bus]]
             - duals.lambda_gen_lower[gi] + duals.lambda_gen_upper[gi])
        stat = max(stat, abs(r))
    for e, ln in enumerate(case.lines):
        r = (duals.lambda_kcl[bus_pos[ln.from_bus]]
             - duals.lambda_kcl[bus_pos[ln.to_bus]] - duals.lambda_kvl[e]
             - duals.lambda_line_lower[e] + duals.lambda_line_upper[e])
        stat = max(stat, abs(r))
    slacks = ineq_slacks(case, dispatch.pg, dispatch.pl)
    lam_vals = duals.ineq_duals(build_dcopf(case, scenario)[1])
    comp = float(np.max(np.minimum(np.abs(lam_vals), np.maximum(slacks, 0.0)),
                        initial=0.0))
    return stat, comp


def explain_dcopf(case: NetworkCase, factual: DemandScenario,
                  region: SolutionRegionDcopf, method: str = "sos1",
                  config: CeConfig | None = None,
                  bigm: BigMTable | None = None,
                  fixings: tuple[set[int], set[int]] | None = None) -> CeResult:
    """Minimal L1 demand perturbation placing the region on the optimal face."""
    config = config or CeConfig()
    tols = config.tols
    backend = config.backend or get_backend()
    start = time.perf_counter()
    g_idx = _gen_index(case, region.gen_id)

    base = solve_dcopf(case, factual, tols, backend=backend)
    if not base.is_optimal:
        return CeResult(status=base.status, method=method,
                        runtime_s=time.perf_counter() - start)
    if base.pg[g_idx] >= region.threshold_mw - 10 * tols.feas_tol:
        record = VerificationRecord(passed=True, objective_plain=base.objective,
                                    objective_region=base.objective, gap=0.0,
                                    stationarity_residual=0.0,
                                    complementarity_residual=0.0)
        return CeResult(status="optimal", method=method, scenario=factual,
                        solution=base, distance_mw=0.0,
                        runtime_s=time.perf_counter() - start,
                        verification=record)

    lp, varmap = build_ce_dcopf(case, factual, region, method, bigm=bigm,
                                fixings=fixings, factual_pg=base.pg)
    theta_idx = np.array(varmap.theta)
    factual_arr = np.array(factual.values)

    def hook(x, _obj):
        theta = np.maximum(x[theta_idx], 0.0)
        scenario = DemandScenario("dcopf-nodal", tuple(theta))
        record, _sol = verify_ce(case, region, scenario, tols, backend=backend)
        if not record.passed:
            return None
        dist = float(np.abs(theta - factual_arr).sum())
        full = x.copy()
        full[theta_idx] = theta
        return dist, full

    if method == "sos1":
        out = solve_with_complementarity(lp, tols, config.time_limit_s,
                                         backend=backend, incumbent_hook=hook)
    else:
        out = solve_milp(lp, tols, config.time_limit_s, backend=backend)

    runtime = time.perf_counter() - start
    if out.status != "optimal" or out.x is None:
        status = out.status
        if status == "infeasible" and method == "mip+cut":
            status = "heuristic-infeasible"
        return CeResult(status=status, method=method, runtime_s=runtime)

    theta = np.maximum(out.x[theta_idx], 0.0)
    scenario = DemandScenario("dcopf-nodal", tuple(float(v) for v in theta))
    return _finalize(case, factual, region, scenario, base, method, tols,
                     backend, start)


def _finalize(case, factual, region, scenario, base, method, tols, backend,
              start) -> CeResult:
    """Re-verify, pick a deviation-minimal counterfactual dispatch, and
    assemble the result."""
    record, _ = verify_ce(case, region, scenario, tols, backend=backend)
    if not record.passed:
        status = "heuristic-infeasible" if method == "mip+cut" else "numerical-failure"
        return CeResult(status=status, method=method, scenario=scenario,
                        runtime_s=time.perf_counter() - start,
                        verification=record)
    plain = solve_dcopf(case, scenario, tols, backend=backend)
    x_ce = _closest_region_optimum(case, scenario, region, plain, base.pg,
                                   tols, backend)
    stat, comp = kkt_residuals(case, scenario, x_ce, plain)
    record.stationarity_residual = stat
    record.complementarity_residual = comp
    distance = scenario.l1_distance(factual)
    return CeResult(status="optimal", method=method, scenario=scenario,
                    solution=x_ce, distance_mw=distance,
                    runtime_s=time.perf_counter() - start, verification=record)


def _closest_region_optimum(case, scenario, region, plain, factual_pg, tols,
                            backend) -> DispatchSolution:
    """Among optimal region-satisfying dispatches, take the one nearest the
    factual dispatch (keeps the deviation bound tight and the output stable)."""
    g_idx = _gen_index(case, region.gen_id)
    lp, varmap = build_dcopf(case, scenario)
    lp.add_row({varmap.pg[g_idx]: 1.0}, ">=", region.threshold_mw, "region")
    cost_row = {varmap.pg[g]: case.generators[g].cost
                for g in range(len(case.generators))}
    lp.add_row(cost_row, "<=",
               plain.objective + tols.abs_opt_gap(plain.objective),
               "optimal_face")
    for idx in list(lp.obj):
        lp.set_obj(idx, 0.0)
    for gi, g in enumerate(case.generators):
        e = lp.add_var(f"dev_{g.id}", lb=0.0, obj=1.0)
        lp.add_row({varmap.pg[gi]: 1.0, e: -1.0}, "<=", float(factual_pg[gi]))
        lp.add_row({varmap.pg[gi]: 1.0, e: 1.0}, ">=", float(factual_pg[gi]))
    out = solve_lp(lp, tols, backend=backend)
    if out.status != "optimal":
        return plain
    return DispatchSolution(status="optimal", pg=out.x[varmap.pg],
                            pl=out.x[varmap.pl], delta=out.x[varmap.delta],
                            lambda_kcl=plain.lambda_kcl,
                            lambda_kvl=plain.lambda_kvl,
                            lambda_line_lower=plain.lambda_line_lower,
                            lambda_line_upper=plain.lambda_line_upper,
                            lambda_gen_lower=plain.lambda_gen_lower,
                            lambda_gen_upper=plain.lambda_gen_upper,
                            objective=float(sum(case.generators[g].cost * out.x[varmap.pg[g]]
                                                for g in range(len(case.generators)))))


def _gen_index(case: NetworkCase, gen_id: str) -> int:
    for i, g in enumerate(case.generators):
        if g.id == gen_id:
            return i
    raise KeyError(f"unknown generator {gen_id!r}")
