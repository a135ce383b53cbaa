"""Independent brute-force oracles used by the test suite.

Everything here is written directly against scipy.optimize so that expected
values are computed through a different code path than the package under
test: pattern enumeration plus LP completion for unit commitment, and plain
lattice search over demand perturbations for counterfactual distances.
"""
import itertools
import math

import numpy as np
from scipy.optimize import linprog


def uc_pattern_feasible(case, U):
    """Logic and minimum up/down feasibility of a commitment matrix."""
    G, T = U.shape
    for g, unit in enumerate(case.units):
        init = case.initial_for(unit)
        if init.commitment == 1:
            owe = max(unit.t_up - init.hours_in_state, 0)
        else:
            owe = 0
        for t in range(min(owe, T)):
            if U[g, t] != 1:
                return False
        if init.commitment == 0:
            for t in range(min(max(unit.t_dn - init.hours_in_state, 0), T)):
                if U[g, t] != 0:
                    return False
        prev = init.commitment
        su = np.zeros(T, dtype=int)
        sd = np.zeros(T, dtype=int)
        for t in range(T):
            su[t] = max(U[g, t] - prev, 0)
            sd[t] = max(prev - U[g, t], 0)
            prev = U[g, t]
        for t in range(T):
            if su[max(0, t - unit.t_up + 1):t + 1].sum() > U[g, t]:
                return False
            if sd[max(0, t - unit.t_dn + 1):t + 1].sum() > 1 - U[g, t]:
                return False
    return True


def uc_fixed_cost(case, U):
    """No-load plus startup/shutdown cost implied by a commitment matrix."""
    G, T = U.shape
    total = 0.0
    for g, unit in enumerate(case.units):
        prev = case.initial_for(unit).commitment
        for t in range(T):
            total += unit.c0_pr * U[g, t]
            if U[g, t] > prev:
                total += unit.c_su
            if U[g, t] < prev:
                total += unit.c_sd
            prev = U[g, t]
    return total


def uc_completion_lp(case, U, demand):
    """Minimal production cost at fixed commitments, or None if infeasible."""
    G, T = U.shape
    nv = G * T
    idx = lambda g, t: g * T + t
    c = np.zeros(nv)
    lb = np.zeros(nv)
    ub = np.zeros(nv)
    for g, unit in enumerate(case.units):
        for t in range(T):
            c[idx(g, t)] = unit.c1_pr
            lb[idx(g, t)] = unit.p_min * U[g, t]
            ub[idx(g, t)] = unit.p_max * U[g, t]
    a_eq = np.zeros((T, nv))
    for t in range(T):
        for g in range(G):
            a_eq[t, idx(g, t)] = 1.0
    b_eq = np.asarray(demand, dtype=float)
    a_ub, b_ub = [], []
    for g, unit in enumerate(case.units):
        init = case.initial_for(unit)
        for t in range(T):
            if t >= 1:
                row = np.zeros(nv)
                row[idx(g, t)] = 1.0
                row[idx(g, t - 1)] = -1.0
                a_ub.append(row); b_ub.append(unit.r_up)
                a_ub.append(-row); b_ub.append(unit.r_dn)
            elif init.commitment == 1:
                row = np.zeros(nv)
                row[idx(g, t)] = 1.0
                a_ub.append(row); b_ub.append(init.output + unit.r_up)
                a_ub.append(-row); b_ub.append(unit.r_dn - init.output)
    res = linprog(c, A_ub=np.array(a_ub) if a_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=a_eq, b_eq=b_eq, bounds=list(zip(lb, ub)),
                  method="highs")
    if res.status != 0:
        return None
    return float(res.fun)


def brute_force_uc(case, demand):
    """Exact UC optimum by enumerating every commitment matrix."""
    G, T = len(case.units), case.horizon
    best = math.inf
    best_U = None
    for bits in itertools.product((0, 1), repeat=G * T):
        U = np.array(bits, dtype=int).reshape(G, T)
        if not uc_pattern_feasible(case, U):
            continue
        prod = uc_completion_lp(case, U, demand)
        if prod is None:
            continue
        total = prod + uc_fixed_cost(case, U)
        if total < best - 1e-12:
            best = total
            best_U = U
    return best, best_U


def uc_region_optimal(case, demand, unit_id, hour, tol=1e-6):
    """Does some optimal schedule commit unit_id at hour?  Uses enumeration."""
    G, T = len(case.units), case.horizon
    g = next(i for i, u in enumerate(case.units) if u.id == unit_id)
    best = math.inf
    best_region = math.inf
    for bits in itertools.product((0, 1), repeat=G * T):
        U = np.array(bits, dtype=int).reshape(G, T)
        if not uc_pattern_feasible(case, U):
            continue
        prod = uc_completion_lp(case, U, demand)
        if prod is None:
            continue
        total = prod + uc_fixed_cost(case, U)
        best = min(best, total)
        if U[g, hour] == 1:
            best_region = min(best_region, total)
    if not math.isfinite(best):
        return False
    return best_region <= best + tol * max(1.0, abs(best))


def brute_force_uc_ce_lattice(case, factual, unit_id, hour, radius, coarse, fine):
    """Counterfactual distance by lattice search over demand perturbations.

    Scans a coarse lattice of per-hour deviations, then refines around the
    coarse optimum.  Exact only up to the fine lattice step; used as an
    independent cross-check, not as the equality oracle.
    """
    base = np.asarray(factual, dtype=float)
    T = len(base)

    def scan(center, step, span):
        best = (math.inf, None)
        offsets = np.arange(-span, span + step / 2, step)
        for combo in itertools.product(offsets, repeat=T):
            theta = center + np.array(combo)
            if np.any(theta < 0):
                continue
            dist = float(np.abs(theta - base).sum())
            if dist >= best[0]:
                continue
            if uc_region_optimal(case, theta, unit_id, hour):
                best = (dist, theta)
        return best

    dist, theta = scan(base, coarse, radius)
    if theta is None:
        return math.inf, None
    dist2, theta2 = scan(theta, fine, coarse)
    if dist2 < dist:
        return dist2, theta2
    return dist, theta


# -- DCOPF --------------------------------------------------------------------

def dcopf_lp(case, demand, gmin_override=None):
    """Plain scipy DCOPF; returns (status, pg, objective)."""
    nb = len(case.buses)
    nl = len(case.lines)
    ng = len(case.generators)
    bus_pos = {b: i for i, b in enumerate(case.buses)}
    nv = ng + nl + nb
    c = np.zeros(nv)
    for i, g in enumerate(case.generators):
        c[i] = g.cost
    a_eq, b_eq = [], []
    load = np.zeros(nb)
    for d, v in zip(case.demands, demand):
        load[bus_pos[d.bus]] += v
    for n, bus in enumerate(case.buses):
        row = np.zeros(nv)
        for e, ln in enumerate(case.lines):
            if bus_pos[ln.from_bus] == n:
                row[ng + e] += 1
            if bus_pos[ln.to_bus] == n:
                row[ng + e] -= 1
        for i, g in enumerate(case.generators):
            if bus_pos[g.bus] == n:
                row[i] -= 1
        a_eq.append(row)
        b_eq.append(-load[n])
    for e, ln in enumerate(case.lines):
        row = np.zeros(nv)
        row[ng + e] = 1.0
        row[ng + nl + bus_pos[ln.from_bus]] = -ln.susceptance
        row[ng + nl + bus_pos[ln.to_bus]] = ln.susceptance
        a_eq.append(row)
        b_eq.append(0.0)
    row = np.zeros(nv)
    row[ng + nl + bus_pos[case.reference_bus]] = 1.0
    a_eq.append(row)
    b_eq.append(0.0)
    bounds = []
    for i, g in enumerate(case.generators):
        lo = g.p_min
        if gmin_override and i in gmin_override:
            lo = max(lo, gmin_override[i])
        bounds.append((lo, g.p_max))
    bounds += [(-ln.flow_limit, ln.flow_limit) for ln in case.lines]
    bounds += [(None, None)] * nb
    res = linprog(c, A_eq=np.array(a_eq), b_eq=np.array(b_eq), bounds=bounds,
                  method="highs")
    if res.status != 0:
        return ("infeasible" if res.status == 2 else "failed"), None, math.nan
    return "optimal", res.x[:ng], float(res.fun)


def dcopf_region_optimal(case, demand, gen_index, threshold, tol=1e-6):
    """Region test: some optimum dispatches gen_index at or above threshold."""
    status, pg, obj = dcopf_lp(case, demand)
    if status != "optimal":
        return False
    if pg[gen_index] >= threshold - 1e-7:
        return True
    status_x, _, obj_x = dcopf_lp(case, demand,
                                  gmin_override={gen_index: threshold})
    if status_x != "optimal":
        return False
    return obj_x <= obj + tol * max(1.0, abs(obj))


def brute_force_dcopf_ce_lattice(case, factual, gen_index, threshold,
                                 radius=50.0, step=1.0, mutable=None):
    """Minimal L1 demand change on a lattice making the region optimal."""
    base = np.asarray(factual, dtype=float)
    nd = len(base)
    idxs = list(range(nd)) if mutable is None else list(mutable)
    offsets = np.arange(-radius, radius + step / 2, step)
    best = (math.inf, None)
    for combo in itertools.product(offsets, repeat=len(idxs)):
        theta = base.copy()
        for k, di in enumerate(idxs):
            theta[di] += combo[k]
        if np.any(theta < 0):
            continue
        dist = float(np.abs(theta - base).sum())
        if dist >= best[0]:
            continue
        if dcopf_region_optimal(case, theta, gen_index, threshold):
            best = (dist, theta)
    return best
