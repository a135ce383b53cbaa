"""Branch-and-bound: integer branching and complementarity-pair branching.

Both searches are best-first on the node LP relaxation bound with
deterministic tie-breaking (insertion order), so repeated runs return
identical objectives.  Node LPs are solved through whichever backend was
selected; bounds are tightened in place on a scratch copy of the program.
"""
from __future__ import annotations

import heapq
import math
import time
from typing import Callable

import numpy as np

from .model import LinearProgram, SolveOutcome, TolConfig, DEFAULT_TOLS


def _cutoff(best_obj: float, tols: TolConfig) -> float:
    """Nodes with bound at or above this cannot improve the incumbent."""
    if not math.isfinite(best_obj):
        return math.inf
    return best_obj - tols.abs_opt_gap(best_obj) / 2


def _apply_overrides(lp: LinearProgram, overrides: dict[int, tuple[float, float]]):
    saved = {}
    for j, (lo, hi) in overrides.items():
        saved[j] = (lp.lb[j], lp.ub[j])
        lp.lb[j] = max(lp.lb[j], lo)
        lp.ub[j] = min(lp.ub[j], hi)
    return saved


def _restore(lp: LinearProgram, saved: dict[int, tuple[float, float]]):
    for j, (lo, hi) in saved.items():
        lp.lb[j] = lo
        lp.ub[j] = hi


def _most_fractional(x: np.ndarray, int_idx: list[int], int_tol: float) -> int:
    best, best_score = -1, int_tol
    for j in int_idx:
        frac = abs(x[j] - round(x[j]))
        score = min(frac, 1.0 - frac) if frac <= 0.5 else frac
        score = 0.5 - abs(frac - 0.5)
        if frac > int_tol and score > best_score - 1e-15:
            if score > best_score + 1e-15 or best < 0:
                best, best_score = j, score
    return best


def branch_and_bound_milp(lp: LinearProgram, solve_lp: Callable[..., SolveOutcome],
                          tols: TolConfig = DEFAULT_TOLS,
                          time_limit_s: float | None = None) -> SolveOutcome:
    """Exact MILP search over lp's integer-marked variables."""
    start = time.perf_counter()
    int_idx = [j for j, flag in enumerate(lp.integer) if flag]
    deadline = start + time_limit_s if time_limit_s else None

    incumbent: SolveOutcome | None = None
    best_obj = math.inf
    heap: list = []
    seq = 0
    nodes = 0

    root = solve_lp(lp, tols)
    if root.status in ("infeasible", "unbounded", "numerical-failure"):
        root.nodes = 1
        return root
    heapq.heappush(heap, (root.objective, seq, {}, root))

    while heap:
        if deadline and time.perf_counter() > deadline:
            return _bnb_result("timeout", incumbent, heap, nodes, start)
        bound, _, overrides, relax = heapq.heappop(heap)
        if bound >= _cutoff(best_obj, tols):
            continue
        nodes += 1
        j = _most_fractional(relax.x, int_idx, tols.int_tol)
        if j < 0:
            if relax.objective < best_obj:
                x = relax.x.copy()
                for k in int_idx:
                    x[k] = round(x[k])
                incumbent = SolveOutcome(status="optimal", x=x,
                                         objective=relax.objective,
                                         bound=relax.objective)
                best_obj = relax.objective
            continue
        lo_val = math.floor(relax.x[j])
        for child_bounds in ((-math.inf, lo_val), (lo_val + 1, math.inf)):
            child = dict(overrides)
            prev = child.get(j, (-math.inf, math.inf))
            child[j] = (max(prev[0], child_bounds[0]), min(prev[1], child_bounds[1]))
            saved = _apply_overrides(lp, child)
            feasible_bounds = all(lp.lb[k] <= lp.ub[k] for k in child)
            out = solve_lp(lp, tols) if feasible_bounds else None
            _restore(lp, saved)
            if out is None or out.status != "optimal":
                continue
            if out.objective < _cutoff(best_obj, tols):
                seq += 1
                heapq.heappush(heap, (out.objective, seq, child, out))
    return _bnb_result("optimal" if incumbent else "infeasible",
                       incumbent, heap, nodes, start)


def solve_complementarity(lp: LinearProgram, solve_lp: Callable[..., SolveOutcome],
                          tols: TolConfig = DEFAULT_TOLS,
                          time_limit_s: float | None = None,
                          incumbent_hook: Callable[[np.ndarray, float], tuple[float, np.ndarray] | None] | None = None,
                          initial_bound: float | None = None) -> SolveOutcome:
    """Global search over the complementarity pairs of lp.

    Branching forces one side of the most violated pair to zero; the
    relaxation drops all pairs.  incumbent_hook may turn a relaxation point
    into a verified feasible solution (returning its objective and full
    variable vector), which tightens the upper bound early.
    """
    start = time.perf_counter()
    pairs = list(lp.comp_pairs)
    deadline = start + time_limit_s if time_limit_s else None

    incumbent: SolveOutcome | None = None
    best_obj = math.inf if initial_bound is None else initial_bound
    heap: list = []
    seq = 0
    nodes = 0
    seen_hook_keys: set = set()

    root = solve_lp(lp, tols)
    if root.status in ("infeasible", "unbounded", "numerical-failure"):
        root.nodes = 1
        return root
    heapq.heappush(heap, (root.objective, seq, {}, root))

    while heap:
        if deadline and time.perf_counter() > deadline:
            return _bnb_result("timeout", incumbent, heap, nodes, start)
        bound, _, overrides, relax = heapq.heappop(heap)
        if bound >= _cutoff(best_obj, tols):
            continue
        nodes += 1
        viol_idx, viol = -1, tols.comp_tol
        for k, (a, b) in enumerate(pairs):
            v = min(relax.x[a], relax.x[b])
            if v > viol:
                viol_idx, viol = k, v
        if viol_idx < 0:
            if relax.objective < best_obj:
                incumbent = SolveOutcome(status="optimal", x=relax.x.copy(),
                                         objective=relax.objective,
                                         bound=relax.objective)
                best_obj = relax.objective
            continue
        if incumbent_hook is not None:
            key = tuple(np.round(relax.x[: min(len(relax.x), 64)], 6))
            if key not in seen_hook_keys:
                seen_hook_keys.add(key)
                cand = incumbent_hook(relax.x, relax.objective)
                if cand is not None and cand[0] < best_obj:
                    incumbent = SolveOutcome(status="optimal", x=cand[1],
                                             objective=cand[0], bound=bound)
                    best_obj = cand[0]
                    if bound >= _cutoff(best_obj, tols):
                        continue
        a, b = pairs[viol_idx]
        for fix_var in (a, b):
            child = dict(overrides)
            child[fix_var] = (-math.inf, 0.0)
            saved = _apply_overrides(lp, child)
            out = solve_lp(lp, tols)
            _restore(lp, saved)
            if out.status != "optimal":
                continue
            if out.objective < _cutoff(best_obj, tols):
                seq += 1
                heapq.heappush(heap, (out.objective, seq, child, out))
    return _bnb_result("optimal" if incumbent else "infeasible",
                       incumbent, heap, nodes, start)


def _bnb_result(status: str, incumbent: SolveOutcome | None, heap, nodes: int,
                start: float) -> SolveOutcome:
    open_bound = min((entry[0] for entry in heap), default=math.inf)
    wall = time.perf_counter() - start
    if incumbent is not None:
        bound = min(open_bound, incumbent.objective)
        return SolveOutcome(status=status if status != "infeasible" else "optimal",
                            x=incumbent.x, objective=incumbent.objective,
                            bound=bound, nodes=nodes, wallclock_s=wall)
    if status == "timeout":
        return SolveOutcome(status="timeout", bound=open_bound, nodes=nodes,
                            wallclock_s=wall)
    return SolveOutcome(status="infeasible", nodes=nodes, wallclock_s=wall)
