"""Shared counterfactual-explanation types: regions, results, configuration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .cases import DemandScenario
from .solver import DEFAULT_TOLS, TolConfig


@dataclass(frozen=True)
class SolutionRegionDcopf:
    """Require generator gen_id to be dispatched at or above threshold_mw."""

    gen_id: str
    threshold_mw: float


@dataclass(frozen=True)
class SolutionRegionUc:
    """Require unit unit_id to be committed at hour."""

    unit_id: str
    hour: int


@dataclass
class CeConfig:
    time_limit_s: float = 600.0
    tols: TolConfig = field(default_factory=lambda: DEFAULT_TOLS)
    backend: object | None = None


@dataclass
class VerificationRecord:
    """Outcome of the optimistic acceptance re-solve at the returned scenario."""

    passed: bool
    objective_plain: float = math.nan      # lower-level optimum at theta_ce
    objective_region: float = math.nan     # same plus the region constraint
    gap: float = math.nan
    stationarity_residual: float = math.nan
    complementarity_residual: float = math.nan


@dataclass
class IterationRecord:
    """One master/subproblem round of the decomposition loop."""

    iteration: int
    lower_bound: float
    pattern_count: int
    master_s: float
    subproblem_s: float


@dataclass
class CeResult:
    status: str                       # optimal | infeasible | timeout | heuristic-infeasible | numerical-failure
    method: str
    scenario: DemandScenario | None = None
    solution: object | None = None    # DispatchSolution or UcSchedule at the scenario
    distance_mw: float = math.nan
    runtime_s: float = 0.0
    verification: VerificationRecord | None = None
    iterations: int = 0
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"
