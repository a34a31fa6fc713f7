"""
Pydantic models and exceptions for the non-adaptive α-estimator.

EstimatorConfig      - problem instance: n, λ, α, [L, U] promise, failure probability δ
CalibratedConstants  - every constant the algorithm needs, derived from the config
EstimatePlan         - a sealed plan: t p-queries per grid level, then the optional small-d block
EstimateResult       - the output D plus diagnostics

Author: Agent
Date: 2025-10-18
"""

from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from oracle.models import QueryPlan


# ============================================================================
# EXCEPTIONS
# ============================================================================

class ConfigurationError(ValueError):
    """The configuration cannot be served (e.g. λ >= 2 with L below d′)."""


class CalibrationError(RuntimeError):
    """Constants could not be derived at floating-point precision."""


class NoLevelFoundError(RuntimeError):
    """No grid level passed the decision threshold."""


# ============================================================================
# ENUMS
# ============================================================================

class DecisionPath(str, Enum):
    """How the estimate was obtained."""
    LEVELS = 'levels'          # first-passing grid level
    EXACT = 'exact'            # small-d gate accepted, singleton queries counted


# ============================================================================
# CONFIG
# ============================================================================

class EstimatorConfig(BaseModel):
    """
    Instance of the estimation problem under the [L, U]-promise.

    `lambda`, `L` and `U` are accepted by those names as well as by the
    Python attribute names lambda_, lower and upper.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    n: int = Field(gt=0, description="Universe size")
    lambda_: int = Field(default=1, ge=1, alias='lambda', description="Threshold λ")
    alpha: float = Field(gt=1.0, description="Approximation factor α")
    lower: int = Field(alias='L', description="Promise lower bound L")
    upper: int = Field(alias='U', description="Promise upper bound U")
    delta: float = Field(default=0.1, gt=0.0, lt=0.5, description="Failure probability δ")
    repetitions: Optional[int] = Field(default=None, ge=1, description="Override of the calibrated t")
    exact_fallback: bool = Field(default=False, description="λ = 1: add the small-d gate and singleton queries when L < d′ (off by default)")

    @model_validator(mode='after')
    def check_promise(self) -> 'EstimatorConfig':
        if self.lower < self.lambda_:
            raise ValueError(f"promise requires lambda <= L, got lambda={self.lambda_}, L={self.lower}")
        if self.lower >= self.upper:
            raise ValueError(f"promise requires L < U, got L={self.lower}, U={self.upper}")
        if self.upper > self.n:
            raise ValueError(f"promise requires U <= n, got U={self.upper}, n={self.n}")
        return self


class CalibratedConstants(BaseModel):
    """Constants of the estimator; see estimator.calibration for how each is derived."""
    model_config = ConfigDict(frozen=True)

    lambda_: int = Field(ge=1, description="Threshold λ the constants were derived for")
    alpha: float = Field(gt=1.0, description="Grid factor α (step α^{1/4})")
    alpha_eff: float = Field(gt=1.0, le=2.0, description="min(α, 2), used for every constant")
    c: float = Field(ge=1.0, description="Query-scale constant c")
    c_prime: float = Field(gt=0.0, lt=1.0, description="Level-decay factor c′")
    decay_levels: int = Field(ge=1, description="Smallest j0 with c′^j0 <= Δ/32")
    delta_alpha: float = Field(gt=0.0, description="Gap Δ_λ(α) after the 0.9 safety factor")
    d_prime: int = Field(ge=1, description="Small-d cutoff d′")
    reference: float = Field(description="P_λ(d′, λ/(c d′))")
    limit: float = Field(description="Poisson limit of P_λ(x, λ/(cx))")
    slack_levels: int = Field(ge=0, description="G0, levels below λ/(cU)")
    grid: List[float] = Field(description="p_0 < … < p_G, clamped to (0, 1]")
    grid_scale: float = Field(gt=0.0, description="λ/(cU), the unclamped value of level G0")
    t: int = Field(ge=1, description="Repetitions per grid level")
    calibrated_t: int = Field(ge=1, description="t before any override")
    gate_p: Optional[float] = Field(default=None, description="Gate query probability λ/(c d′)")
    gate_size: int = Field(default=0, ge=0, description="Gate p-queries (0 when the gate is off)")
    gate_threshold: Optional[float] = Field(default=None, description="Accept iff gate hit frequency <= this")
    singleton_queries: int = Field(default=0, ge=0, description="Singleton queries behind the gate")

    @property
    def levels(self) -> int:
        """G + 1."""
        return len(self.grid)

    @property
    def decision_threshold(self) -> float:
        """A level passes when its estimate exceeds reference - Δ/4."""
        return self.reference - self.delta_alpha / 4

    @property
    def level_queries(self) -> int:
        return self.t * self.levels

    @property
    def gate_enabled(self) -> bool:
        return self.gate_size > 0

    @property
    def total_queries(self) -> int:
        return self.level_queries + self.gate_size + self.singleton_queries

    def nominal_p(self, i: int) -> float:
        """Unclamped λ α^{(i-G0)/4} / (cU) for any integer level i."""
        return self.grid_scale * self.alpha ** ((i - self.slack_levels) / 4)


# ============================================================================
# PLAN AND RESULT
# ============================================================================

class EstimatePlan(BaseModel):
    """
    A sealed estimation plan.

    Queries [i·t, (i+1)·t) belong to grid level i; when the gate is on they
    are followed by `gate_size` gate queries and then the n singletons.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    config: EstimatorConfig
    constants: CalibratedConstants
    plan: QueryPlan

    @model_validator(mode='after')
    def check_size(self) -> 'EstimatePlan':
        if self.plan.num_queries != self.constants.total_queries:
            raise ValueError(f"plan has {self.plan.num_queries} queries, constants expect {self.constants.total_queries}")
        return self

    def level_index(self) -> np.ndarray:
        """Grid level of every query position; -1 for the gate, -2 for singletons."""
        c = self.constants
        index = np.full(c.total_queries, -2, dtype=np.int64)
        index[:c.level_queries] = np.repeat(np.arange(c.levels), c.t)
        index[c.level_queries:c.level_queries + c.gate_size] = -1
        return index


class EstimateResult(BaseModel):
    """Outcome of one estimation run."""

    D: int = Field(ge=0, description="Estimate of d")
    i1: Optional[int] = Field(default=None, description="Selected grid level (None on the exact path)")
    queries_used: int = Field(ge=0, description="Plan size")
    level_estimates: List[float] = Field(default_factory=list, description="Empirical P̂_i per level")
    path: DecisionPath = Field(default=DecisionPath.LEVELS)
    gate_accepted: Optional[bool] = Field(default=None, description="Gate verdict when the gate ran")
    promise_unverified: bool = Field(default=False, description="True when the true d was known to violate [L, U]")

    def contains(self, d: int, alpha: float) -> bool:
        """d <= D <= α d."""
        return d <= self.D <= alpha * d
