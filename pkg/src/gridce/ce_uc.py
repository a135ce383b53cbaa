"""Counterfactual hourly demand profiles for unit-commitment questions.

The bilevel problem (minimal L1 change of the aggregate profile such that a
unit is committed at a chosen hour in some optimal schedule) is solved by a
master/subproblem loop.  The master searches over profiles jointly with a
full schedule that must satisfy the region, subject to one optimality cut
per enumerated commitment pattern: the master schedule may not cost more
than that pattern's cost-minimal completion.  Each completion lives in the
master as an embedded block whose own optimality is enforced through its
stationarity and complementarity conditions (big-M form), with elastic
balance slack so that patterns infeasible under the current profile price
themselves out instead of blocking the master.  The subproblem solves the
commitment problem exactly at the master's profile; its schedule either
certifies optimality (the loop stops) or joins the pattern set.

In case of ties in the L1 distance the master prefers deviations at later
hours (tiny decreasing hour weights), which makes results reproducible
across solvers.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cases import DemandScenario, UcCase
from .ce_types import (CeConfig, CeResult, IterationRecord, SolutionRegionUc,
                       VerificationRecord)
from .solver import INF, LinearProgram, TolConfig, get_backend, solve_milp
from .uc import UcSchedule, add_uc_block, cost_terms, schedule_cost, solve_uc

METHODS = ("decomp", "decomp+cut")

#: relative weight slope of the later-hours tie-break
_LEX_EPS = 1e-6


@dataclass
class EnumeratedPatternSet:
    """Distinct commitment matrices collected from subproblem solves."""

    patterns: list[np.ndarray] = field(default_factory=list)

    def add(self, u: np.ndarray) -> bool:
        """Add a pattern unless an identical one is present."""
        u = np.asarray(u, dtype=int)
        for existing in self.patterns:
            if np.array_equal(existing, u):
                return False
        self.patterns.append(u)
        return True

    def __len__(self) -> int:
        return len(self.patterns)


@dataclass
class MasterOutcome:
    status: str
    theta: np.ndarray | None = None
    distance: float = math.nan
    schedule_cost: float = math.nan
    wallclock_s: float = 0.0


def elastic_penalty(case: UcCase) -> float:
    """Per-MWh price of balance slack inside enumerated-pattern blocks.

    Safe once it exceeds the Lipschitz constant of the commitment cost in
    the demand profile: the dearest way to absorb one extra MWh is starting
    the most expensive unit and honouring its minimum up time, which the
    formula below dominates with a factor-ten margin on the variable part.
    Values much beyond that (the fleet-capacity-scaled penalty is about
    1e5 here) make the embedded big-M blocks numerically intractable.
    """
    variable = 10.0 * max(u.c1_pr for u in case.units)
    commitment = max(u.c_su + u.c_sd + u.c0_pr * (u.t_up + 1)
                     for u in case.units)
    return variable + commitment


def pattern_fixed_cost(case: UcCase, u: np.ndarray) -> float:
    """No-load and start/stop cost implied by a commitment matrix."""
    total = 0.0
    for g, unit in enumerate(case.units):
        prev = case.initial_for(unit).commitment
        for t in range(case.horizon):
            total += unit.c0_pr * u[g, t]
            if u[g, t] > prev:
                total += unit.c_su
            if u[g, t] < prev:
                total += unit.c_sd
            prev = u[g, t]
    return total


def _add_pattern_block(lp: LinearProgram, case: UcCase, pattern: np.ndarray,
                       theta_vars: list[int], master_cost: dict[int, float],
                       tag: str) -> None:
    """Embed one pattern's cost-minimal completion and the optimality cut.

    The block is the linear completion problem at fixed commitments with
    elastic balance, plus its optimality conditions; the cut says the master
    schedule costs no more than this completion.
    """
    T = case.horizon
    rho = elastic_penalty(case)
    cap = sum(u.p_max for u in case.units)
    # ramp multipliers chain across the horizon (relaxing one step can
    # relieve slack in every later hour), so their valid box scales with T
    m_dual = (T + 2.0) * rho

    y: dict[tuple[int, int], int] = {}
    # stationarity rows accumulate final coefficients: the multiplier of a
    # g-form constraint (slack = rhs - expr >= 0) contributes +expr_coeff,
    # an equality multiplier contributes -(dh/dy)
    stat: dict[tuple[int, int], dict[int, float]] = {}
    cell_of_var: dict[int, tuple[int, int]] = {}
    for g, unit in enumerate(case.units):
        for t in range(T):
            if pattern[g, t]:
                y[g, t] = lp.add_var(f"{tag}_y_{unit.id}_{t}", lb=unit.p_min,
                                     ub=unit.p_max)
                stat[g, t] = {}
                cell_of_var[y[g, t]] = (g, t)
    sp = [lp.add_var(f"{tag}_sp_{t}", lb=0.0, ub=cap) for t in range(T)]
    sm = [lp.add_var(f"{tag}_sm_{t}", lb=0.0, ub=cap) for t in range(T)]
    mu = [lp.add_var(f"{tag}_mu_{t}", lb=-rho, ub=rho) for t in range(T)]

    pairs: list[tuple[int, int, float, float]] = []  # (dual, slack, Mdual, Mprimal)
    exclusive: list[tuple[int, int]] = []            # pair indices never both tight
    both_pos: list[tuple[int, int]] = []             # multipliers never both zero

    def ineq(slack_name: str, expr: dict[int, float], rhs: float,
             slack_ub: float, dual_name: str) -> int:
        """Row expr + slack == rhs with slack >= 0 and its multiplier."""
        s = lp.add_var(slack_name, lb=0.0, ub=max(slack_ub, 0.0))
        lam = lp.add_var(dual_name, lb=0.0, ub=m_dual)
        coeffs = dict(expr)
        coeffs[s] = 1.0
        lp.add_row(coeffs, "==", rhs, slack_name + "_def")
        for var, coeff in expr.items():
            d = stat[cell_of_var[var]]
            d[lam] = d.get(lam, 0.0) + coeff
        pairs.append((lam, s, m_dual, max(slack_ub, 0.0)))
        return len(pairs) - 1

    # balance with elastic slack: sum(y) + sp - sm - theta == 0
    for t in range(T):
        coeffs = {sp[t]: 1.0, sm[t]: -1.0, theta_vars[t]: -1.0}
        for g in range(len(case.units)):
            if (g, t) in y:
                coeffs[y[g, t]] = 1.0
                stat[g, t][mu[t]] = stat[g, t].get(mu[t], 0.0) - 1.0
        lp.add_row(coeffs, "==", 0.0, f"{tag}_balance_{t}")

    for g, unit in enumerate(case.units):
        init = case.initial_for(unit)
        span = unit.p_max - unit.p_min
        for t in range(T):
            on = (g, t) in y
            prev_on = (g, t - 1) in y if t >= 1 else None
            if on:
                ka = ineq(f"{tag}_slo_{unit.id}_{t}", {y[g, t]: -1.0},
                          -unit.p_min, span, f"{tag}_a_{unit.id}_{t}")
                kb = ineq(f"{tag}_sup_{unit.id}_{t}", {y[g, t]: 1.0},
                          unit.p_max, span, f"{tag}_b_{unit.id}_{t}")
                if span > 1e-9:
                    exclusive.append((ka, kb))
            if t >= 1:
                if on and prev_on:
                    kc = ineq(f"{tag}_sc_{unit.id}_{t}",
                              {y[g, t]: 1.0, y[g, t - 1]: -1.0}, unit.r_up,
                              unit.r_up + unit.r_dn + span,
                              f"{tag}_c_{unit.id}_{t}")
                    kd = ineq(f"{tag}_sd_{unit.id}_{t}",
                              {y[g, t]: -1.0, y[g, t - 1]: 1.0}, unit.r_dn,
                              unit.r_up + unit.r_dn + span,
                              f"{tag}_d_{unit.id}_{t}")
                    if unit.r_up + unit.r_dn > 1e-9:
                        exclusive.append((kc, kd))
                elif on and not prev_on:      # startup hour
                    if unit.r_up < unit.p_min - 1e-9:
                        raise ValueError(f"pattern cannot start {unit.id} at {t}")
                    ineq(f"{tag}_sc_{unit.id}_{t}", {y[g, t]: 1.0}, unit.r_up,
                         unit.r_up, f"{tag}_c_{unit.id}_{t}")
                elif prev_on and not on:      # shutdown hour
                    if unit.r_dn < unit.p_min - 1e-9:
                        raise ValueError(f"pattern cannot stop {unit.id} at {t}")
                    ineq(f"{tag}_sd_{unit.id}_{t}", {y[g, t - 1]: 1.0},
                         unit.r_dn, unit.r_dn, f"{tag}_d_{unit.id}_{t}")
            elif init.commitment == 1 and on:
                kc = ineq(f"{tag}_sc_{unit.id}_0", {y[g, 0]: 1.0},
                          init.output + unit.r_up, unit.r_up + span,
                          f"{tag}_c_{unit.id}_0")
                kd = ineq(f"{tag}_sd_{unit.id}_0", {y[g, 0]: -1.0},
                          unit.r_dn - init.output, unit.r_dn + span,
                          f"{tag}_d_{unit.id}_0")
                if unit.r_up + unit.r_dn > 1e-9:
                    exclusive.append((kc, kd))
            elif init.commitment == 1 and not on and t == 0:
                if init.output > unit.r_dn + 1e-9:
                    raise ValueError(f"pattern cannot stop {unit.id} at hour 0")

    # stationarity: c1 - mu - a + b + ... == 0, written as sum(terms) == -c1
    for (g, t), terms in stat.items():
        lp.add_row(dict(terms), "==", -case.units[g].c1_pr,
                   f"{tag}_stat_{g}_{t}")
    for t in range(T):
        bp = lp.add_var(f"{tag}_bp_{t}", lb=0.0, ub=2.0 * rho)
        bm = lp.add_var(f"{tag}_bm_{t}", lb=0.0, ub=2.0 * rho)
        lp.add_row({bp: -1.0, mu[t]: -1.0}, "==", -rho, f"{tag}_stat_sp_{t}")
        lp.add_row({bm: -1.0, mu[t]: 1.0}, "==", -rho, f"{tag}_stat_sm_{t}")
        pairs.append((bp, sp[t], 2.0 * rho, cap))
        pairs.append((bm, sm[t], 2.0 * rho, cap))
        both_pos.append((len(pairs) - 2, len(pairs) - 1))

    z_of_pair: list[int] = []
    for k, (lam, s, md, mp) in enumerate(pairs):
        z = lp.add_var(f"{tag}_z_{k}", lb=0, ub=1, integer=True)
        lp.add_row({lam: 1.0, z: -md}, "<=", 0.0, f"{tag}_bigm_dual_{k}")
        lp.add_row({s: 1.0, z: mp}, "<=", mp, f"{tag}_bigm_primal_{k}")
        z_of_pair.append(z)
    for ka, kb in exclusive:   # opposite sides can never both be tight
        lp.add_row({z_of_pair[ka]: 1.0, z_of_pair[kb]: 1.0}, "<=", 1.0)
    for ka, kb in both_pos:    # the two multipliers can never both vanish
        lp.add_row({z_of_pair[ka]: 1.0, z_of_pair[kb]: 1.0}, ">=", 1.0)

    # optimality cut: master schedule cost <= this completion's elastic cost
    cut = dict(master_cost)
    for (g, t), var in y.items():
        cut[var] = cut.get(var, 0.0) - case.units[g].c1_pr
    for t in range(T):
        cut[sp[t]] = cut.get(sp[t], 0.0) - rho
        cut[sm[t]] = cut.get(sm[t], 0.0) - rho
    lp.add_row(cut, "<=", pattern_fixed_cost(case, pattern), f"{tag}_optcut")


def build_master(case: UcCase, factual: DemandScenario,
                 region: SolutionRegionUc, patterns: EnumeratedPatternSet,
                 fixings: tuple[set, set] | None = None,
                 distance_bound: float | None = None
                 ) -> tuple[LinearProgram, dict]:
    T = case.horizon
    cap = sum(u.p_max for u in case.units)
    lp = LinearProgram(f"ce-uc-{case.name}")
    theta = [lp.add_var(f"theta_{t}", lb=0.0, ub=cap) for t in range(T)]
    dup = [lp.add_var(f"devup_{t}", lb=0.0,
                      obj=1.0 + _LEX_EPS * (T - 1 - t) / T) for t in range(T)]
    ddn = [lp.add_var(f"devdn_{t}", lb=0.0,
                      obj=1.0 + _LEX_EPS * (T - 1 - t) / T) for t in range(T)]
    for t in range(T):
        lp.add_row({theta[t]: 1.0, dup[t]: -1.0, ddn[t]: 1.0}, "==",
                   float(factual.values[t]), f"theta_split_{t}")

    varmap = add_uc_block(lp, case, theta, prefix="x_")
    g_idx = _unit_index(case, region.unit_id)
    lp.add_row({varmap.u[g_idx][region.hour]: 1.0}, "==", 1.0, "region")

    if fixings is not None:
        b1, b0 = fixings
        for (g, t) in sorted(b1):
            lp.add_row({varmap.u[g][t]: 1.0}, "==", 1.0, f"fix1_{g}_{t}")
        for (g, t) in sorted(b0):
            if (g, t) == (g_idx, region.hour):
                continue
            lp.add_row({varmap.u[g][t]: 1.0}, "==", 0.0, f"fix0_{g}_{t}")
    if distance_bound is not None:
        bound_row = {v: 1.0 for v in dup}
        bound_row.update({v: 1.0 for v in ddn})
        lp.add_row(bound_row, "<=", float(distance_bound), "knn1_bound")

    master_cost = cost_terms(case, varmap)
    for k, pattern in enumerate(patterns.patterns):
        _add_pattern_block(lp, case, pattern, theta, master_cost, tag=f"v{k}")
    info = {"theta": theta, "dup": dup, "ddn": ddn, "varmap": varmap}
    return lp, info


def decomp_master(case: UcCase, factual: DemandScenario,
                  region: SolutionRegionUc, patterns: EnumeratedPatternSet,
                  fixings: tuple[set, set] | None = None,
                  distance_bound: float | None = None,
                  tols: TolConfig | None = None,
                  time_limit_s: float | None = None,
                  backend=None) -> MasterOutcome:
    """One master solve: the candidate profile of minimal deviation."""
    from .solver import DEFAULT_TOLS
    tols = tols or DEFAULT_TOLS
    lp, info = build_master(case, factual, region, patterns, fixings,
                            distance_bound)
    out = solve_milp(lp, tols, time_limit_s, backend=backend)
    if out.status != "optimal" or out.x is None:
        return MasterOutcome(status=out.status, wallclock_s=out.wallclock_s)
    theta = np.maximum(out.x[np.array(info["theta"])], 0.0)
    distance = float(np.abs(theta - np.array(factual.values)).sum())
    cost = sum(coeff * out.x[idx]
               for idx, coeff in cost_terms(case, info["varmap"]).items())
    return MasterOutcome(status="optimal", theta=theta, distance=distance,
                         schedule_cost=float(cost), wallclock_s=out.wallclock_s)


def decomp_subproblem(case: UcCase, theta: np.ndarray,
                      tols: TolConfig | None = None,
                      time_limit_s: float | None = None,
                      backend=None) -> tuple[np.ndarray | None, float, UcSchedule]:
    """Exact commitment solve at a fixed profile: (U*, F*, schedule)."""
    profile = DemandScenario("uc-hourly", tuple(float(v) for v in theta))
    sched = solve_uc(case, profile, time_limit_s=time_limit_s, tols=tols,
                     backend=backend)
    if not sched.is_optimal:
        return None, math.nan, sched
    return sched.U.copy(), sched.objective, sched


def knn1_bound(dataset, factual: DemandScenario, region) -> tuple[DemandScenario, float] | None:
    """Nearest recorded scenario whose stored solution satisfies the region."""
    samples = getattr(dataset, "samples", None)
    if not samples:
        return None
    best = None
    best_dist = math.inf
    for sample in samples:
        if isinstance(region, SolutionRegionUc):
            u = sample.commitment
            if u is None:
                continue
            g = sample.unit_ids.index(region.unit_id)
            if u[g][region.hour] != 1:
                continue
        else:
            pg = sample.pg
            if pg is None:
                continue
            g = sample.gen_ids.index(region.gen_id)
            if pg[g] < region.threshold_mw:
                continue
        dist = factual.l1_distance(sample.scenario)
        if dist < best_dist - 1e-12:
            best_dist = dist
            best = sample.scenario
    if best is None:
        return None
    return best, best_dist


def derive_fixed_binaries(dataset, region: SolutionRegionUc | None = None
                          ) -> tuple[set, set]:
    """Commitment cells on in every sample (B1) or off in every sample (B0).

    The region cell is dropped from B0 so the question stays posable.
    """
    samples = getattr(dataset, "samples", None)
    if not samples:
        raise ValueError("non-empty unit-commitment dataset required")
    mats = [np.asarray(s.commitment) for s in samples if s.commitment is not None]
    if not mats:
        raise ValueError("dataset has no recorded commitments")
    stack = np.stack(mats)
    always_on = np.where(stack.min(axis=0) == 1)
    always_off = np.where(stack.max(axis=0) == 0)
    b1 = set(zip(always_on[0].tolist(), always_on[1].tolist()))
    b0 = set(zip(always_off[0].tolist(), always_off[1].tolist()))
    if region is not None:
        unit_ids = samples[0].unit_ids
        cell = (unit_ids.index(region.unit_id), region.hour)
        b0.discard(cell)
    return b1, b0


def explain_uc(case: UcCase, factual: DemandScenario,
               region: SolutionRegionUc, method: str = "decomp",
               config: CeConfig | None = None, dataset=None) -> CeResult:
    """Iterate master and subproblem until the candidate profile certifies."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    config = config or CeConfig()
    tols = config.tols
    backend = config.backend or get_backend()
    start = time.perf_counter()
    deadline = start + config.time_limit_s
    g_idx = _unit_index(case, region.unit_id)
    if not 0 <= region.hour < case.horizon:
        raise ValueError(f"hour {region.hour} outside horizon")

    base = solve_uc(case, factual, time_limit_s=config.time_limit_s, tols=tols,
                    backend=backend)
    if not base.is_optimal:
        return CeResult(status=base.status, method=method,
                        runtime_s=time.perf_counter() - start)
    if base.U[g_idx, region.hour] == 1:
        record = VerificationRecord(passed=True, objective_plain=base.objective,
                                    objective_region=base.objective, gap=0.0)
        return CeResult(status="optimal", method=method, scenario=factual,
                        solution=base, distance_mw=0.0,
                        runtime_s=time.perf_counter() - start,
                        verification=record, iterations=0)

    fixings = None
    distance_bound = None
    if method == "decomp+cut":
        if dataset is None:
            raise ValueError("decomp+cut requires a dataset")
        fixings = derive_fixed_binaries(dataset, region)
        knn = knn1_bound(dataset, factual, region)
        if knn is not None:
            distance_bound = knn[1]

    patterns = EnumeratedPatternSet()
    patterns.add(base.U)
    trace: list[IterationRecord] = []
    last_bound = 0.0

    for iteration in range(1, 201):
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return CeResult(status="timeout", method=method,
                            runtime_s=time.perf_counter() - start,
                            iterations=iteration - 1, trace=trace)
        master = decomp_master(case, factual, region, patterns, fixings,
                               distance_bound, tols, remaining, backend)
        if master.status != "optimal":
            status = master.status
            if status == "infeasible" and method == "decomp+cut":
                status = "heuristic-infeasible"
            return CeResult(status=status, method=method,
                            runtime_s=time.perf_counter() - start,
                            iterations=iteration - 1, trace=trace)
        last_bound = max(last_bound, master.distance)

        sub_start = time.perf_counter()
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return CeResult(status="timeout", method=method,
                            runtime_s=time.perf_counter() - start,
                            iterations=iteration - 1, trace=trace)
        u_star, f_star, _sched = decomp_subproblem(case, master.theta, tols,
                                                   remaining, backend)
        scenario = DemandScenario("uc-hourly",
                                  tuple(float(v) for v in master.theta))
        if u_star is None:
            return CeResult(status=_sched.status, method=method,
                            scenario=scenario,
                            runtime_s=time.perf_counter() - start,
                            iterations=iteration, trace=trace)
        region_sched = solve_uc(case, scenario,
                                time_limit_s=max(deadline - time.perf_counter(), 1.0),
                                tols=tols, backend=backend,
                                region_cell=(region.unit_id, region.hour))
        sub_elapsed = time.perf_counter() - sub_start
        trace.append(IterationRecord(iteration=iteration,
                                     lower_bound=master.distance,
                                     pattern_count=len(patterns),
                                     master_s=master.wallclock_s,
                                     subproblem_s=sub_elapsed))
        gap_tol = 10.0 * tols.abs_opt_gap(max(abs(f_star), 1.0))
        if region_sched.is_optimal and region_sched.objective <= f_star + gap_tol:
            record = VerificationRecord(
                passed=True, objective_plain=f_star,
                objective_region=region_sched.objective,
                gap=region_sched.objective - f_star)
            return CeResult(status="optimal", method=method, scenario=scenario,
                            solution=region_sched,
                            distance_mw=master.distance,
                            runtime_s=time.perf_counter() - start,
                            verification=record, iterations=iteration,
                            trace=trace)
        added = patterns.add(u_star)
        if not added and region_sched.is_optimal:
            added = patterns.add(region_sched.U)
        if not added:
            return CeResult(status="numerical-failure", method=method,
                            scenario=scenario,
                            runtime_s=time.perf_counter() - start,
                            iterations=iteration, trace=trace)
    return CeResult(status="timeout", method=method,
                    runtime_s=time.perf_counter() - start,
                    iterations=len(trace), trace=trace)


def _unit_index(case: UcCase, unit_id: str) -> int:
    for g, unit in enumerate(case.units):
        if unit.id == unit_id:
            return g
    raise KeyError(f"unknown unit {unit_id!r}")
