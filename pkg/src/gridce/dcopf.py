"""DC optimal power flow: cost-minimal dispatch with full dual extraction.

The LP minimizes c'pG subject to nodal balance, the line flow law
pL = b*(angle difference), flow limits and generator limits, with the
reference bus angle fixed at zero.  Inequality constraints are indexed
canonically (per line: lower then upper; then per generator: lower then
upper); the active-set vector alpha and all counterfactual machinery use
that order.  Lines with an infinite limit contribute no inequality
constraints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cases import DemandScenario, NetworkCase
from .solver import (DEFAULT_TOLS, INF, LinearProgram, SolveOutcome, TolConfig,
                     solve_lp)

#: slack below which an inequality counts as binding [MW]
ACTIVE_TOL = 1e-5


@dataclass(frozen=True)
class IneqInfo:
    """One canonical inequality constraint g_i(x) >= 0 of the DCOPF."""

    kind: str        # line_lower | line_upper | gen_lower | gen_upper
    element: int     # line index or generator index
    bound: float     # the limit value involved
    label: str


@dataclass
class DcopfVarMap:
    """Variable/constraint layout of a built DCOPF LP."""

    pg: list[int]
    pl: list[int]
    delta: list[int]
    balance_rows: list[int]
    flow_rows: list[int]
    ref_row: int
    inequalities: list[IneqInfo]

    @property
    def n_ineq(self) -> int:
        return len(self.inequalities)


@dataclass
class DispatchSolution:
    status: str
    pg: np.ndarray | None = None
    pl: np.ndarray | None = None
    delta: np.ndarray | None = None
    lambda_kcl: np.ndarray | None = None      # per bus [$ / MW]
    lambda_kvl: np.ndarray | None = None      # per line
    lambda_line_lower: np.ndarray | None = None
    lambda_line_upper: np.ndarray | None = None
    lambda_gen_lower: np.ndarray | None = None
    lambda_gen_upper: np.ndarray | None = None
    objective: float = math.nan
    alpha: np.ndarray | None = None           # binding indicator over inequalities
    wallclock_s: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    def ineq_duals(self, varmap: DcopfVarMap) -> np.ndarray:
        """Multipliers in the canonical inequality order."""
        out = np.zeros(varmap.n_ineq)
        for i, info in enumerate(varmap.inequalities):
            if info.kind == "line_lower":
                out[i] = self.lambda_line_lower[info.element]
            elif info.kind == "line_upper":
                out[i] = self.lambda_line_upper[info.element]
            elif info.kind == "gen_lower":
                out[i] = self.lambda_gen_lower[info.element]
            else:
                out[i] = self.lambda_gen_upper[info.element]
        return out


def canonical_inequalities(case: NetworkCase) -> list[IneqInfo]:
    infos: list[IneqInfo] = []
    for e, ln in enumerate(case.lines):
        if math.isfinite(ln.flow_limit):
            label = f"{ln.from_bus}-{ln.to_bus}"
            infos.append(IneqInfo("line_lower", e, ln.flow_limit, f"pL[{label}] >= -limit"))
            infos.append(IneqInfo("line_upper", e, ln.flow_limit, f"pL[{label}] <= limit"))
    for g, gen in enumerate(case.generators):
        infos.append(IneqInfo("gen_lower", g, gen.p_min, f"pG[{gen.id}] >= p_min"))
        if math.isfinite(gen.p_max):
            infos.append(IneqInfo("gen_upper", g, gen.p_max, f"pG[{gen.id}] <= p_max"))
    return infos


def build_dcopf(case: NetworkCase, demand: DemandScenario) -> tuple[LinearProgram, DcopfVarMap]:
    """LP image of the dispatch problem for one demand scenario.

    Bounds are written as explicit rows only where the counterfactual
    reformulation needs duals; here they live on the variables and the
    multipliers come back through reduced costs.
    """
    if demand.kind != "dcopf-nodal":
        raise ValueError("DCOPF needs a dcopf-nodal scenario")
    if len(demand.values) != len(case.demands):
        raise ValueError(f"scenario has {len(demand.values)} values for "
                         f"{len(case.demands)} demands")
    lp = LinearProgram(f"dcopf-{case.name}")
    bus_pos = {b: i for i, b in enumerate(case.buses)}
    pg = [lp.add_var(f"pG_{g.id}", lb=g.p_min, ub=g.p_max, obj=g.cost)
          for g in case.generators]
    pl = [lp.add_var(f"pL_{e}", lb=-ln.flow_limit, ub=ln.flow_limit)
          for e, ln in enumerate(case.lines)]
    delta = [lp.add_var(f"delta_{b}", lb=-INF, ub=INF) for b in case.buses]

    net_injection: list[dict[int, float]] = [dict() for _ in case.buses]
    for e, ln in enumerate(case.lines):
        net_injection[bus_pos[ln.from_bus]][pl[e]] = 1.0
        net_injection[bus_pos[ln.to_bus]][pl[e]] = -1.0
    for gi, g in enumerate(case.generators):
        net_injection[bus_pos[g.bus]][pg[gi]] = -1.0

    load = np.zeros(len(case.buses))
    for d, val in zip(case.demands, demand.values):
        load[bus_pos[d.bus]] += val

    balance_rows = [lp.add_row(coeffs, "==", -load[i], f"balance_{case.buses[i]}")
                    for i, coeffs in enumerate(net_injection)]
    flow_rows = [lp.add_row({pl[e]: 1.0,
                             delta[bus_pos[ln.from_bus]]: -ln.susceptance,
                             delta[bus_pos[ln.to_bus]]: ln.susceptance},
                            "==", 0.0, f"flow_{e}")
                 for e, ln in enumerate(case.lines)]
    ref_row = lp.add_row({delta[bus_pos[case.reference_bus]]: 1.0}, "==", 0.0,
                         "ref_angle")
    varmap = DcopfVarMap(pg=pg, pl=pl, delta=delta, balance_rows=balance_rows,
                         flow_rows=flow_rows, ref_row=ref_row,
                         inequalities=canonical_inequalities(case))
    return lp, varmap


def solve_dcopf(case: NetworkCase, demand: DemandScenario,
                tols: TolConfig = DEFAULT_TOLS, backend=None) -> DispatchSolution:
    lp, varmap = build_dcopf(case, demand)
    out = solve_lp(lp, tols, backend=backend)
    if out.status != "optimal":
        return DispatchSolution(status=out.status, wallclock_s=out.wallclock_s)
    return _extract(case, lp, varmap, out)


def _extract(case: NetworkCase, lp: LinearProgram, varmap: DcopfVarMap,
             out: SolveOutcome) -> DispatchSolution:
    pg = out.x[varmap.pg]
    pl = out.x[varmap.pl]
    delta = out.x[varmap.delta]
    # balance rows were written as (flows - generation) == -load, so the
    # marginal cost of demand at a bus is the negated row shadow price
    lambda_kcl = -out.duals[varmap.balance_rows]
    lambda_kvl = out.duals[varmap.flow_rows].copy()
    nl, ng = len(case.lines), len(case.generators)
    lam_line_lo = np.zeros(nl)
    lam_line_up = np.zeros(nl)
    for e in range(nl):
        rc = out.reduced_costs[varmap.pl[e]]
        lam_line_lo[e] = max(rc, 0.0)
        lam_line_up[e] = max(-rc, 0.0)
    lam_gen_lo = np.zeros(ng)
    lam_gen_up = np.zeros(ng)
    for g in range(ng):
        rc = out.reduced_costs[varmap.pg[g]]
        lam_gen_lo[g] = max(rc, 0.0)
        lam_gen_up[g] = max(-rc, 0.0)
    sol = DispatchSolution(status="optimal", pg=pg, pl=pl, delta=delta,
                           lambda_kcl=lambda_kcl, lambda_kvl=lambda_kvl,
                           lambda_line_lower=lam_line_lo,
                           lambda_line_upper=lam_line_up,
                           lambda_gen_lower=lam_gen_lo,
                           lambda_gen_upper=lam_gen_up,
                           objective=out.objective,
                           wallclock_s=out.wallclock_s)
    sol.alpha = active_set(case, sol)
    return sol


def ineq_slacks(case: NetworkCase, pg: np.ndarray, pl: np.ndarray) -> np.ndarray:
    """Slack g_i(x) >= 0 of every canonical inequality at a primal point."""
    vals = []
    for info in canonical_inequalities(case):
        if info.kind == "line_lower":
            vals.append(pl[info.element] + info.bound)
        elif info.kind == "line_upper":
            vals.append(info.bound - pl[info.element])
        elif info.kind == "gen_lower":
            vals.append(pg[info.element] - info.bound)
        else:
            vals.append(info.bound - pg[info.element])
    return np.array(vals)


def active_set(case: NetworkCase, sol: DispatchSolution,
               active_tol: float = ACTIVE_TOL) -> np.ndarray:
    """alpha_i = 1 iff inequality i's slack is within active_tol of zero."""
    slacks = ineq_slacks(case, sol.pg, sol.pl)
    return (slacks <= active_tol).astype(int)
