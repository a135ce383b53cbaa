"""Linear/mixed-integer program container shared by all solver backends."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INF = float("inf")

#: relation tokens accepted by add_row
RELATIONS = ("<=", ">=", "==")


@dataclass
class TolConfig:
    """Numerical tolerances.

    feas_tol is absolute on row residuals (rows are expected to be reasonably
    scaled); opt_tol is relative on objective comparisons; int_tol bounds the
    distance of an integer variable from the nearest integer; comp_tol bounds
    min(a, b) of a satisfied complementarity pair.
    """

    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    int_tol: float = 1e-6
    comp_tol: float = 1e-6

    def abs_opt_gap(self, reference: float) -> float:
        return self.opt_tol * max(1.0, abs(reference))


DEFAULT_TOLS = TolConfig()


class LinearProgram:
    """A minimization LP/MILP built incrementally.

    Variables carry bounds and an optional integrality mark.  Rows relate a
    linear expression to a right-hand side with one of <=, >=, ==.
    Complementarity pairs name two nonnegative variables of which at most one
    may be nonzero in a solution; they are honoured by
    solve_with_complementarity only.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.integer: list[bool] = []
        self.obj: dict[int, float] = {}
        self.rows: list[tuple[dict[int, float], str, float, str]] = []
        self.comp_pairs: list[tuple[int, int]] = []
        self._index: dict[str, int] = {}

    # -- construction -----------------------------------------------------
    def add_var(self, name: str, lb: float = 0.0, ub: float = INF,
                integer: bool = False, obj: float = 0.0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if lb > ub:
            raise ValueError(f"variable {name!r} has lb > ub")
        idx = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.integer.append(bool(integer))
        if obj:
            self.obj[idx] = float(obj)
        self._index[name] = idx
        return idx

    def set_obj(self, idx: int, coeff: float) -> None:
        self._check_idx(idx)
        if coeff:
            self.obj[idx] = float(coeff)
        else:
            self.obj.pop(idx, None)

    def add_row(self, coeffs: dict[int, float], rel: str, rhs: float,
                name: str = "") -> int:
        if rel not in RELATIONS:
            raise ValueError(f"unknown relation {rel!r}")
        for idx in coeffs:
            self._check_idx(idx)
        self.rows.append(({k: float(v) for k, v in coeffs.items() if v != 0.0},
                          rel, float(rhs), name))
        return len(self.rows) - 1

    def add_comp_pair(self, a: int, b: int) -> None:
        self._check_idx(a)
        self._check_idx(b)
        if self.lb[a] < 0 or self.lb[b] < 0:
            raise ValueError("complementarity pairs require nonnegative variables")
        self.comp_pairs.append((a, b))

    def _check_idx(self, idx: int) -> None:
        if not 0 <= idx < len(self.var_names):
            raise ValueError(f"variable index {idx} out of range")

    def index_of(self, name: str) -> int:
        return self._index[name]

    # -- views -------------------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.var_names)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def has_integers(self) -> bool:
        return any(self.integer)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.nvars)
        for idx, coeff in self.obj.items():
            c[idx] = coeff
        return c

    def dense(self) -> tuple[np.ndarray, list[str], np.ndarray]:
        """Rows as (matrix, relations, rhs)."""
        a = np.zeros((self.nrows, self.nvars))
        rels: list[str] = []
        rhs = np.zeros(self.nrows)
        for i, (coeffs, rel, b, _) in enumerate(self.rows):
            for j, v in coeffs.items():
                a[i, j] = v
            rels.append(rel)
            rhs[i] = b
        return a, rels, rhs

    def bounds_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lb, dtype=float), np.array(self.ub, dtype=float)

    def objective_value(self, x: np.ndarray) -> float:
        return float(sum(coeff * x[idx] for idx, coeff in self.obj.items()))

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        act = np.zeros(self.nrows)
        for i, (coeffs, _, _, _) in enumerate(self.rows):
            act[i] = sum(v * x[j] for j, v in coeffs.items())
        return act

    def feasibility_residual(self, x: np.ndarray) -> float:
        """Largest violation of rows and bounds at x."""
        res = 0.0
        act = self.row_activity(x)
        for i, (_, rel, rhs, _) in enumerate(self.rows):
            if rel == "<=":
                res = max(res, act[i] - rhs)
            elif rel == ">=":
                res = max(res, rhs - act[i])
            else:
                res = max(res, abs(act[i] - rhs))
        lb, ub = self.bounds_arrays()
        res = max(res, float(np.max(lb - x, initial=0.0)))
        res = max(res, float(np.max(x - ub, initial=0.0)))
        return res


@dataclass
class SolveOutcome:
    """Result of one LP/MILP solve.

    duals holds one shadow price per row (d objective / d rhs); reduced_costs
    one entry per variable.  Both are None for MILP solves.  bound is the
    best-known lower bound (MILP); for optimal LPs it equals objective.
    """

    status: str                       # optimal | infeasible | unbounded | timeout | numerical-failure
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    bound: float = float("nan")
    iterations: int = 0
    nodes: int = 0
    wallclock_s: float = 0.0
    feas_residual: float = float("nan")
    duality_gap: float = float("nan")

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, idx: int) -> float:
        if self.x is None:
            raise ValueError("no primal solution available")
        return float(self.x[idx])
