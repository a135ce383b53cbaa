"""Solver backends behind one contract.

``builtin`` is the self-contained dense simplex plus branch-and-bound;
``scipy`` delegates to scipy.optimize (HiGHS) and is the default because it
is much faster on the larger unit-commitment programs.  Select globally via
the GRIDCE_BACKEND environment variable or per call site.
"""
from __future__ import annotations

import math
import os
import time

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from . import bnb, simplex
from .model import INF, LinearProgram, SolveOutcome, TolConfig, DEFAULT_TOLS


class BuiltinBackend:
    """Dense simplex + own branch-and-bound; no solver dependency."""

    name = "builtin"

    def solve_lp(self, lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS) -> SolveOutcome:
        _require(not lp.has_integers, "solve_lp forbids integrality marks")
        _require(not lp.comp_pairs, "solve_lp forbids complementarity pairs")
        return simplex.solve_simplex(lp, tols)

    def _relax_lp(self, lp: LinearProgram, tols: TolConfig) -> SolveOutcome:
        return simplex.solve_simplex(lp, tols)

    def solve_milp(self, lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
                   time_limit_s: float | None = None) -> SolveOutcome:
        _require(not lp.comp_pairs, "solve_milp forbids complementarity pairs; "
                                    "encode them with big-M first")
        if not lp.has_integers:
            return self.solve_lp(lp, tols)
        return bnb.branch_and_bound_milp(lp, self._relax_lp, tols, time_limit_s)


class ScipyBackend:
    """HiGHS via scipy.optimize.linprog / scipy.optimize.milp."""

    name = "scipy"

    def solve_lp(self, lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS) -> SolveOutcome:
        _require(not lp.has_integers, "solve_lp forbids integrality marks")
        _require(not lp.comp_pairs, "solve_lp forbids complementarity pairs")
        return self._relax_lp(lp, tols)

    def _relax_lp(self, lp: LinearProgram, tols: TolConfig) -> SolveOutcome:
        start = time.perf_counter()
        c = lp.objective_vector()
        a, rels, rhs = lp.dense()
        ub_rows = [i for i, r in enumerate(rels) if r != "=="]
        eq_rows = [i for i, r in enumerate(rels) if r == "=="]
        sign = np.array([1.0 if rels[i] == "<=" else -1.0 for i in ub_rows])
        a_ub = a[ub_rows] * sign[:, None] if ub_rows else None
        b_ub = rhs[ub_rows] * sign if ub_rows else None
        a_eq = a[eq_rows] if eq_rows else None
        b_eq = rhs[eq_rows] if eq_rows else None
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=list(zip(lp.lb, lp.ub)), method="highs")
        wall = time.perf_counter() - start
        status = {0: "optimal", 1: "numerical-failure", 2: "infeasible",
                  3: "unbounded"}.get(res.status, "numerical-failure")
        if status != "optimal":
            return SolveOutcome(status=status, wallclock_s=wall,
                                iterations=int(getattr(res, "nit", 0) or 0))
        duals = np.zeros(lp.nrows)
        if ub_rows:
            duals[ub_rows] = res.ineqlin.marginals * sign
        if eq_rows:
            duals[eq_rows] = res.eqlin.marginals
        reduced = res.lower.marginals + res.upper.marginals
        x = np.asarray(res.x)
        return SolveOutcome(status="optimal", x=x, objective=float(res.fun),
                            duals=duals, reduced_costs=np.asarray(reduced),
                            bound=float(res.fun),
                            iterations=int(getattr(res, "nit", 0) or 0),
                            feas_residual=lp.feasibility_residual(x),
                            duality_gap=0.0, wallclock_s=wall)

    def solve_milp(self, lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
                   time_limit_s: float | None = None) -> SolveOutcome:
        _require(not lp.comp_pairs, "solve_milp forbids complementarity pairs; "
                                    "encode them with big-M first")
        if not lp.has_integers:
            return self.solve_lp(lp, tols)
        start = time.perf_counter()
        c = lp.objective_vector()
        a, rels, rhs = lp.dense()
        lo = np.where([r == "<=" for r in rels], -np.inf, rhs)
        hi = np.where([r == ">=" for r in rels], np.inf, rhs)
        constraints = LinearConstraint(a, lo, hi) if lp.nrows else ()
        options = {"mip_rel_gap": min(tols.opt_tol, 1e-6)}
        if time_limit_s is not None:
            options["time_limit"] = max(time_limit_s, 0.01)
        # integral hull of integer bounds; HiGHS presolve mishandles
        # fractional bounds on integer columns
        vlb, vub = np.array(lp.lb), np.array(lp.ub)
        for j, is_int in enumerate(lp.integer):
            if is_int:
                if np.isfinite(vlb[j]):
                    vlb[j] = math.ceil(vlb[j] - tols.int_tol)
                if np.isfinite(vub[j]):
                    vub[j] = math.floor(vub[j] + tols.int_tol)
        res = milp(c, constraints=constraints,
                   integrality=np.array(lp.integer, dtype=int),
                   bounds=Bounds(vlb, vub),
                   options=options)
        wall = time.perf_counter() - start
        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        raw_bound = getattr(res, "mip_dual_bound", None)
        bound = float(raw_bound) if raw_bound is not None else math.nan
        if res.status == 0:
            x = np.asarray(res.x)
            return SolveOutcome(status="optimal", x=x, objective=float(res.fun),
                                bound=bound, nodes=nodes,
                                feas_residual=lp.feasibility_residual(x),
                                wallclock_s=wall)
        if res.status == 1:  # hit a limit; incumbent may exist
            if res.x is not None:
                return SolveOutcome(status="timeout", x=np.asarray(res.x),
                                    objective=float(res.fun), bound=bound,
                                    nodes=nodes, wallclock_s=wall)
            return SolveOutcome(status="timeout", bound=bound, nodes=nodes,
                                wallclock_s=wall)
        status = {2: "infeasible", 3: "unbounded"}.get(res.status, "numerical-failure")
        return SolveOutcome(status=status, nodes=nodes, wallclock_s=wall)


_BACKENDS = {"builtin": BuiltinBackend, "scipy": ScipyBackend}
_DEFAULT = "scipy"


def get_backend(name: str | None = None):
    """Resolve a backend by name, GRIDCE_BACKEND, or the scipy default."""
    chosen = name or os.environ.get("GRIDCE_BACKEND", _DEFAULT)
    try:
        return _BACKENDS[chosen]()
    except KeyError:
        raise ValueError(f"unknown solver backend {chosen!r}; "
                         f"choose from {sorted(_BACKENDS)}") from None


def solve_lp(lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
             backend=None) -> SolveOutcome:
    backend = backend or get_backend()
    return backend.solve_lp(lp, tols)


def solve_milp(lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
               time_limit_s: float | None = None, backend=None) -> SolveOutcome:
    backend = backend or get_backend()
    return backend.solve_milp(lp, tols, time_limit_s)


def solve_with_complementarity(lp: LinearProgram, tols: TolConfig = DEFAULT_TOLS,
                               time_limit_s: float | None = None, backend=None,
                               incumbent_hook=None,
                               initial_bound: float | None = None) -> SolveOutcome:
    """Complementarity-pair branching over the chosen backend's LP solver."""
    _require(not lp.has_integers,
             "solve_with_complementarity forbids integrality marks")
    _require(bool(lp.comp_pairs), "no complementarity pairs present")
    backend = backend or get_backend()
    return bnb.solve_complementarity(lp, backend._relax_lp, tols, time_limit_s,
                                     incumbent_hook=incumbent_hook,
                                     initial_bound=initial_bound)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)
