"""Exact LP/MILP solving with dual extraction and complementarity branching."""
from .backends import (BuiltinBackend, ScipyBackend, get_backend, solve_lp,
                       solve_milp, solve_with_complementarity)
from .lptext import dump_lp
from .model import (DEFAULT_TOLS, INF, LinearProgram, SolveOutcome, TolConfig)

__all__ = [
    "BuiltinBackend", "ScipyBackend", "get_backend", "solve_lp", "solve_milp",
    "solve_with_complementarity", "dump_lp", "DEFAULT_TOLS", "INF",
    "LinearProgram", "SolveOutcome", "TolConfig",
]
