"""Dense bounded-variable two-phase simplex with dual extraction.

The implementation keeps an explicit basis inverse, refactorizing
periodically.  It is meant for the moderate problem sizes this package
produces itself (hundreds of rows); the scipy backend covers anything
bigger.  Shadow prices follow the d(objective)/d(rhs) convention, reduced
costs are c_j - y'A_j.
"""
from __future__ import annotations

import time

import numpy as np

from .model import INF, LinearProgram, SolveOutcome, TolConfig, DEFAULT_TOLS

_REFACTOR_EVERY = 64
_STALL_LIMIT = 60


class _Tableau:
    def __init__(self, lp: LinearProgram):
        a, rels, rhs = lp.dense()
        m, n = a.shape
        self.m, self.n = m, n
        self.ncols = n + m
        self.A = np.hstack([a, np.eye(m)]) if m else a.reshape(0, n)
        self.b = rhs
        lb, ub = lp.bounds_arrays()
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, rel in enumerate(rels):
            if rel == "<=":
                slack_lb[i], slack_ub[i] = 0.0, INF
            elif rel == ">=":
                slack_lb[i], slack_ub[i] = -INF, 0.0
            else:
                slack_lb[i], slack_ub[i] = 0.0, 0.0
        self.lb = np.concatenate([lb, slack_lb])
        self.ub = np.concatenate([ub, slack_ub])
        self.c = np.concatenate([lp.objective_vector(), np.zeros(m)])


def _initial_point(t: _Tableau) -> np.ndarray:
    """Each structural at its finite bound nearest zero, free vars at 0."""
    z = np.zeros(t.ncols)
    for j in range(t.n):
        lo, hi = t.lb[j], t.ub[j]
        if np.isfinite(lo) and np.isfinite(hi):
            z[j] = lo if abs(lo) <= abs(hi) else hi
        elif np.isfinite(lo):
            z[j] = lo
        elif np.isfinite(hi):
            z[j] = hi
    return z


def solve_simplex(lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
                  max_iter: int | None = None) -> SolveOutcome:
    start = time.perf_counter()
    t = _Tableau(lp)
    m, n = t.m, t.n
    if m == 0:
        return _solve_unconstrained(lp, t, start)
    if max_iter is None:
        max_iter = 200 * (m + n) + 20000

    basis = np.arange(n, n + m)
    in_basis = np.zeros(t.ncols, dtype=bool)
    in_basis[basis] = True
    binv = np.eye(m)
    z = _initial_point(t)
    z[basis] = t.b - t.A[:, :n] @ z[:n]

    feas_tol = max(tols.feas_tol, 1e-9)
    d_tol = 1e-9 * max(1.0, float(np.max(np.abs(t.c), initial=0.0)))
    iters = 0
    stall = 0
    bland = False
    last_refactor = 0

    def refactor():
        nonlocal binv
        bmat = t.A[:, basis]
        try:
            binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:
            binv = np.linalg.pinv(bmat)
        z[basis] = binv @ (t.b - t.A[:, ~in_basis] @ z[~in_basis])

    def infeasibility() -> np.ndarray:
        vb = z[basis]
        return np.maximum(vb - t.ub[basis], 0.0) + np.maximum(t.lb[basis] - vb, 0.0)

    for phase in (1, 2):
        while True:
            if iters >= max_iter:
                return SolveOutcome(status="numerical-failure", iterations=iters,
                                    wallclock_s=time.perf_counter() - start)
            if iters - last_refactor >= _REFACTOR_EVERY:
                refactor()
                last_refactor = iters

            infeas = infeasibility()
            total_infeas = float(infeas.sum())
            if phase == 1:
                if total_infeas <= feas_tol:
                    break
                cost = np.zeros(t.ncols)
                vb = z[basis]
                cost[basis] = np.where(vb > t.ub[basis] + feas_tol, 1.0,
                                       np.where(vb < t.lb[basis] - feas_tol, -1.0, 0.0))
                if not np.any(cost[basis]):
                    break
            else:
                cost = t.c

            y = cost[basis] @ binv
            d = cost - y @ t.A
            d[basis] = 0.0

            entering, direction = _choose_entering(t, z, in_basis, d, d_tol, bland)
            if entering < 0:
                if phase == 1:
                    return SolveOutcome(status="infeasible", iterations=iters,
                                        wallclock_s=time.perf_counter() - start)
                return _finish(lp, t, z, basis, binv, iters, start, tols)

            g = direction * (binv @ t.A[:, entering])
            step, leave_pos, leave_bound = _ratio_test(t, z, basis, g, entering,
                                                       direction, feas_tol, phase)
            if step is None:
                if phase == 2:
                    return SolveOutcome(status="unbounded", iterations=iters,
                                        wallclock_s=time.perf_counter() - start)
                return SolveOutcome(status="numerical-failure", iterations=iters,
                                    wallclock_s=time.perf_counter() - start)

            if step <= feas_tol:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False

            z[basis] -= step * g
            z[entering] += direction * step
            iters += 1

            if leave_pos is None:
                continue  # bound flip of the entering variable
            leaving = basis[leave_pos]
            z[leaving] = leave_bound  # snap exactly onto its bound
            basis[leave_pos] = entering
            in_basis[leaving] = False
            in_basis[entering] = True
            # eta update of the inverse
            col = g * direction  # binv @ A[:, entering]
            piv = col[leave_pos]
            if abs(piv) < 1e-11:
                refactor()
                last_refactor = iters
                continue
            row = binv[leave_pos, :] / piv
            binv -= np.outer(col, row)
            binv[leave_pos, :] = row
        if phase == 1:
            refactor()
            last_refactor = iters
    raise AssertionError("unreachable")


def _choose_entering(t, z, in_basis, d, d_tol, bland):
    """Return (column, direction) or (-1, 0) when no candidate improves."""
    best, best_score, best_dir = -1, d_tol, 0
    for j in range(t.ncols):
        if in_basis[j]:
            continue
        dj = d[j]
        at_lower = np.isfinite(t.lb[j]) and z[j] <= t.lb[j] + 1e-9
        at_upper = np.isfinite(t.ub[j]) and z[j] >= t.ub[j] - 1e-9
        if at_lower and at_upper:  # fixed variable
            continue
        if at_lower:
            score, direction = -dj, 1
        elif at_upper:
            score, direction = dj, -1
        else:  # free (or superbasic) variable
            score, direction = abs(dj), (1 if dj < 0 else -1)
        if score > best_score:
            if bland:
                return j, direction
            best, best_score, best_dir = j, score, direction
    return best, best_dir


def _ratio_test(t, z, basis, g, entering, direction, feas_tol, phase):
    """Smallest step at which a basic variable (or the entering one) blocks.

    Returns (step, leaving_position, bound_value); leaving_position is None
    for a bound flip.  step None signals an unbounded ray.
    """
    best_step = INF
    leave_pos = None
    leave_bound = 0.0
    best_piv = 0.0
    vb = z[basis]
    lbb, ubb = t.lb[basis], t.ub[basis]
    for i in range(len(basis)):
        gi = g[i]
        if abs(gi) < 1e-11:
            continue
        above = vb[i] > ubb[i] + feas_tol
        below = vb[i] < lbb[i] - feas_tol
        if phase == 1 and above:
            if gi > 0:  # moving down towards its violated upper bound
                step = (vb[i] - ubb[i]) / gi
                bound = ubb[i]
            else:
                continue
        elif phase == 1 and below:
            if gi < 0:
                step = (vb[i] - lbb[i]) / gi
                bound = lbb[i]
            else:
                continue
        else:
            if gi > 0:
                if not np.isfinite(lbb[i]):
                    continue
                step = (vb[i] - lbb[i]) / gi
                bound = lbb[i]
            else:
                if not np.isfinite(ubb[i]):
                    continue
                step = (vb[i] - ubb[i]) / gi
                bound = ubb[i]
        step = max(step, 0.0)
        if step < best_step - 1e-12 or (step < best_step + 1e-12 and abs(gi) > abs(best_piv)):
            best_step, leave_pos, leave_bound, best_piv = step, i, bound, gi

    # entering variable hitting its opposite bound
    rng = t.ub[entering] - t.lb[entering]
    if np.isfinite(rng) and rng < best_step:
        return rng, None, 0.0
    if not np.isfinite(best_step):
        return None, None, 0.0
    return best_step, leave_pos, leave_bound


def _finish(lp, t, z, basis, binv, iters, start, tols):
    # recompute from a fresh factorization for accurate values and duals
    bmat = t.A[:, basis]
    try:
        binv = np.linalg.inv(bmat)
    except np.linalg.LinAlgError:
        binv = np.linalg.pinv(bmat)
    mask = np.ones(t.ncols, dtype=bool)
    mask[basis] = False
    z[basis] = binv @ (t.b - t.A[:, mask] @ z[mask])
    y = t.c[basis] @ binv
    d = t.c - y @ t.A
    x = z[:t.n]
    obj = float(t.c[:t.n] @ x)
    feas = lp.feasibility_residual(x)
    if feas > max(10 * tols.feas_tol, 1e-6):
        return SolveOutcome(status="numerical-failure", x=x, objective=obj,
                            iterations=iters, feas_residual=feas,
                            wallclock_s=time.perf_counter() - start)
    # duality gap through complementary residuals
    gap = 0.0
    for j in range(t.n):
        if z[j] > t.lb[j] + 1e-7 and z[j] < t.ub[j] - 1e-7:
            gap = max(gap, abs(d[j]) * min(1.0, abs(z[j])))
    return SolveOutcome(status="optimal", x=x.copy(), objective=obj,
                        duals=y.copy(), reduced_costs=d[:t.n].copy(),
                        bound=obj, iterations=iters, feas_residual=feas,
                        duality_gap=gap, wallclock_s=time.perf_counter() - start)


def _solve_unconstrained(lp, t, start):
    x = np.zeros(t.n)
    for j in range(t.n):
        cj = t.c[j]
        if cj > 0:
            if not np.isfinite(t.lb[j]):
                return SolveOutcome(status="unbounded", wallclock_s=time.perf_counter() - start)
            x[j] = t.lb[j]
        elif cj < 0:
            if not np.isfinite(t.ub[j]):
                return SolveOutcome(status="unbounded", wallclock_s=time.perf_counter() - start)
            x[j] = t.ub[j]
        else:
            x[j] = np.clip(0.0, t.lb[j], t.ub[j])
    return SolveOutcome(status="optimal", x=x, objective=float(t.c[:t.n] @ x),
                        duals=np.zeros(0), reduced_costs=t.c[:t.n].copy(),
                        bound=float(t.c[:t.n] @ x), feas_residual=0.0,
                        duality_gap=0.0, wallclock_s=time.perf_counter() - start)
