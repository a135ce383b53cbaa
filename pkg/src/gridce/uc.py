"""Unit commitment MILP over an hourly horizon.

Commitment, startup and shutdown are binary per unit and hour; output is
coupled to commitment through min/max rows, hours are linked by ramp limits,
the logic identity and minimum up/down windows.  Hour 0 is tied to the
case's initial state: an initially-running unit ramps from its initial
output and may owe remaining minimum-up hours, while a cold unit may start
at hour 0 without a ramp restriction (the horizon boundary is not a ramp
event for units that were off).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cases import DemandScenario, UcCase
from .solver import DEFAULT_TOLS, INF, LinearProgram, TolConfig, solve_milp


@dataclass
class UcVarMap:
    p: list[list[int]]          # |G| x |T| output variable indices
    u: list[list[int]]          # commitment binaries
    su: list[list[int]]         # startup binaries
    sd: list[list[int]]         # shutdown binaries
    balance_rows: list[int]
    demand_vars: list[int] | None = None   # set when demand entered as variables


@dataclass
class UcSchedule:
    status: str
    P: np.ndarray | None = None          # |G| x |T| [MW]
    U: np.ndarray | None = None          # {0,1}
    USU: np.ndarray | None = None
    USD: np.ndarray | None = None
    objective: float = math.nan
    hourly_total: np.ndarray | None = None
    wallclock_s: float = 0.0
    bound: float = math.nan

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def add_uc_block(lp: LinearProgram, case: UcCase, demand, prefix: str = "",
                 integer: bool = True) -> UcVarMap:
    """Append one full set of UC variables and constraints to lp.

    demand is either a sequence of |T| numbers (fixed profile) or a list of
    |T| variable indices already present in lp (the counterfactual master
    passes its mutable demand variables).  Objective coefficients are not
    set here; see cost_terms.
    """
    T = case.horizon
    demand_is_vars = bool(demand) and all(isinstance(v, (int, np.integer))
                                          for v in demand)
    if len(demand) != T:
        raise ValueError(f"demand has {len(demand)} entries for horizon {T}")

    p: list[list[int]] = []
    u: list[list[int]] = []
    su: list[list[int]] = []
    sd: list[list[int]] = []
    for unit in case.units:
        p.append([lp.add_var(f"{prefix}p_{unit.id}_{t}", lb=0.0, ub=unit.p_max)
                  for t in range(T)])
        u.append([lp.add_var(f"{prefix}u_{unit.id}_{t}", lb=0, ub=1,
                             integer=integer) for t in range(T)])
        su.append([lp.add_var(f"{prefix}su_{unit.id}_{t}", lb=0, ub=1,
                              integer=integer) for t in range(T)])
        sd.append([lp.add_var(f"{prefix}sd_{unit.id}_{t}", lb=0, ub=1,
                              integer=integer) for t in range(T)])

    balance_rows = []
    for t in range(T):
        coeffs = {p[g][t]: 1.0 for g in range(len(case.units))}
        if demand_is_vars:
            coeffs[demand[t]] = -1.0
            balance_rows.append(lp.add_row(coeffs, "==", 0.0,
                                           f"{prefix}balance_{t}"))
        else:
            balance_rows.append(lp.add_row(coeffs, "==", float(demand[t]),
                                           f"{prefix}balance_{t}"))

    for g, unit in enumerate(case.units):
        init = case.initial_for(unit)
        for t in range(T):
            lp.add_row({p[g][t]: 1.0, u[g][t]: -unit.p_min}, ">=", 0.0,
                       f"{prefix}pmin_{unit.id}_{t}")
            lp.add_row({p[g][t]: 1.0, u[g][t]: -unit.p_max}, "<=", 0.0,
                       f"{prefix}pmax_{unit.id}_{t}")
            if t >= 1:
                lp.add_row({p[g][t]: 1.0, p[g][t - 1]: -1.0}, "<=", unit.r_up,
                           f"{prefix}rampup_{unit.id}_{t}")
                lp.add_row({p[g][t]: 1.0, p[g][t - 1]: -1.0}, ">=", -unit.r_dn,
                           f"{prefix}rampdn_{unit.id}_{t}")
            elif init.commitment == 1:
                lp.add_row({p[g][t]: 1.0}, "<=", init.output + unit.r_up,
                           f"{prefix}rampup_{unit.id}_0")
                lp.add_row({p[g][t]: 1.0}, ">=", init.output - unit.r_dn,
                           f"{prefix}rampdn_{unit.id}_0")
            # logic: u_t - u_{t-1} = su_t - sd_t
            coeffs = {u[g][t]: 1.0, su[g][t]: -1.0, sd[g][t]: 1.0}
            rhs = 0.0
            if t >= 1:
                coeffs[u[g][t - 1]] = -1.0
            else:
                rhs = float(init.commitment)
            lp.add_row(coeffs, "==", rhs, f"{prefix}logic_{unit.id}_{t}")
            # minimum up / down windows, clipped at the horizon start
            up_window = {su[g][tau]: 1.0
                         for tau in range(max(0, t - unit.t_up + 1), t + 1)}
            up_window[u[g][t]] = up_window.get(u[g][t], 0.0) - 1.0
            lp.add_row(up_window, "<=", 0.0, f"{prefix}minup_{unit.id}_{t}")
            dn_window = {sd[g][tau]: 1.0
                         for tau in range(max(0, t - unit.t_dn + 1), t + 1)}
            dn_window[u[g][t]] = dn_window.get(u[g][t], 0.0) + 1.0
            lp.add_row(dn_window, "<=", 1.0, f"{prefix}mindn_{unit.id}_{t}")
        # remaining minimum up / down owed to the initial state
        if init.commitment == 1:
            for t in range(min(max(unit.t_up - init.hours_in_state, 0), T)):
                lp.add_row({u[g][t]: 1.0}, "==", 1.0,
                           f"{prefix}init_minup_{unit.id}_{t}")
        else:
            for t in range(min(max(unit.t_dn - init.hours_in_state, 0), T)):
                lp.add_row({u[g][t]: 1.0}, "==", 0.0,
                           f"{prefix}init_mindn_{unit.id}_{t}")
    return UcVarMap(p=p, u=u, su=su, sd=sd, balance_rows=balance_rows,
                    demand_vars=list(demand) if demand_is_vars else None)


def cost_terms(case: UcCase, varmap: UcVarMap) -> dict[int, float]:
    """Objective coefficients of the operating cost for one UC block."""
    coeffs: dict[int, float] = {}
    for g, unit in enumerate(case.units):
        for t in range(case.horizon):
            coeffs[varmap.p[g][t]] = unit.c1_pr
            coeffs[varmap.u[g][t]] = unit.c0_pr
            coeffs[varmap.su[g][t]] = unit.c_su
            coeffs[varmap.sd[g][t]] = unit.c_sd
    return coeffs


def build_uc(case: UcCase, profile: DemandScenario) -> tuple[LinearProgram, UcVarMap]:
    if profile.kind != "uc-hourly":
        raise ValueError("unit commitment needs a uc-hourly scenario")
    if len(profile.values) != case.horizon:
        raise ValueError(f"profile has {len(profile.values)} hours for "
                         f"horizon {case.horizon}")
    lp = LinearProgram(f"uc-{case.name}")
    varmap = add_uc_block(lp, case, profile.values)
    for idx, coeff in cost_terms(case, varmap).items():
        lp.set_obj(idx, coeff)
    return lp, varmap


def solve_uc(case: UcCase, profile: DemandScenario,
             time_limit_s: float | None = None,
             tols: TolConfig = DEFAULT_TOLS, backend=None,
             region_cell: tuple[str, int] | None = None) -> UcSchedule:
    """Optimal schedule for a demand profile.

    region_cell = (unit id, hour) additionally forces that commitment to 1,
    which the counterfactual engine uses for its optimality certificate.
    """
    cap = sum(u.p_max for u in case.units)
    if max(profile.values) > cap + tols.feas_tol:
        return UcSchedule(status="infeasible")
    lp, varmap = build_uc(case, profile)
    if region_cell is not None:
        uid, hour = region_cell
        g = _unit_index(case, uid)
        lp.add_row({varmap.u[g][hour]: 1.0}, "==", 1.0, "region")
    out = solve_milp(lp, tols, time_limit_s, backend=backend)
    if out.status not in ("optimal", "timeout") or out.x is None:
        return UcSchedule(status=out.status, wallclock_s=out.wallclock_s,
                          bound=out.bound)
    return extract_schedule(case, varmap, out.x, out.objective,
                            status=out.status, wallclock=out.wallclock_s,
                            bound=out.bound)


def extract_schedule(case: UcCase, varmap: UcVarMap, x: np.ndarray,
                     objective: float, status: str = "optimal",
                     wallclock: float = 0.0,
                     bound: float = math.nan) -> UcSchedule:
    G, T = len(case.units), case.horizon
    P = np.zeros((G, T))
    U = np.zeros((G, T), dtype=int)
    USU = np.zeros((G, T), dtype=int)
    USD = np.zeros((G, T), dtype=int)
    for g in range(G):
        for t in range(T):
            P[g, t] = max(x[varmap.p[g][t]], 0.0)
            U[g, t] = int(round(x[varmap.u[g][t]]))
            USU[g, t] = int(round(x[varmap.su[g][t]]))
            USD[g, t] = int(round(x[varmap.sd[g][t]]))
    P[U == 0] = 0.0
    return UcSchedule(status=status, P=P, U=U, USU=USU, USD=USD,
                      objective=objective, hourly_total=P.sum(axis=0),
                      wallclock_s=wallclock, bound=bound)


def schedule_cost(case: UcCase, schedule: UcSchedule) -> float:
    """Operating cost recomputed from the schedule matrices."""
    total = 0.0
    for g, unit in enumerate(case.units):
        total += unit.c1_pr * float(schedule.P[g].sum())
        total += unit.c0_pr * float(schedule.U[g].sum())
        total += unit.c_su * float(schedule.USU[g].sum())
        total += unit.c_sd * float(schedule.USD[g].sum())
    return total


def check_schedule(case: UcCase, profile: DemandScenario,
                   schedule: UcSchedule, feas_tol: float = 1e-5) -> list[str]:
    """Constraint violations of a schedule; empty when feasible."""
    issues: list[str] = []
    P, U, USU, USD = schedule.P, schedule.U, schedule.USU, schedule.USD
    T = case.horizon
    for t in range(T):
        if abs(P[:, t].sum() - profile.values[t]) > feas_tol:
            issues.append(f"balance violated at hour {t}")
    for g, unit in enumerate(case.units):
        init = case.initial_for(unit)
        for t in range(T):
            if P[g, t] < unit.p_min * U[g, t] - feas_tol or \
               P[g, t] > unit.p_max * U[g, t] + feas_tol:
                issues.append(f"{unit.id} output outside commitment limits at {t}")
            prev_u = U[g, t - 1] if t >= 1 else init.commitment
            if U[g, t] - prev_u != USU[g, t] - USD[g, t]:
                issues.append(f"{unit.id} logic broken at {t}")
            if USU[g, t] and USD[g, t]:
                issues.append(f"{unit.id} starts and stops at {t}")
            if t >= 1:
                delta = P[g, t] - P[g, t - 1]
                if delta > unit.r_up + feas_tol or delta < -unit.r_dn - feas_tol:
                    issues.append(f"{unit.id} ramp violated at {t}")
            elif init.commitment == 1:
                delta = P[g, 0] - init.output
                if delta > unit.r_up + feas_tol or delta < -unit.r_dn - feas_tol:
                    issues.append(f"{unit.id} initial ramp violated")
            if USU[g, t] and sum(USU[g, max(0, t - unit.t_up + 1):t + 1]) > U[g, t]:
                issues.append(f"{unit.id} minimum up violated at {t}")
            if USD[g, t] and sum(USD[g, max(0, t - unit.t_dn + 1):t + 1]) > 1 - U[g, t]:
                issues.append(f"{unit.id} minimum down violated at {t}")
    return issues


def _unit_index(case: UcCase, unit_id: str) -> int:
    for g, unit in enumerate(case.units):
        if unit.id == unit_id:
            return g
    raise KeyError(f"unknown unit {unit_id!r}")
