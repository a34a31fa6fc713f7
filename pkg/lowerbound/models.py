"""
Pydantic models and exceptions for the lower-bound lab.

SizeClasses           - the interleaved even/odd defect-set sizes of the hard instance
DiscreteDistribution  - a finite law over response strings, exact (Fraction) or sampled
CouplingSample        - one draw (j, X, Y) of the level coupling
Disagreement          - Pr(Q(X) != Q(Y)) for one query size and one level, split in two products
BucketReport          - per-bucket sums of the disagreement terms with their analytic bounds

Author: Agent
Date: 2025-10-18
"""

import math
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from oracle.models import DefectSet, QueryPlan
from probability.hypergeom import Probability


# ============================================================================
# EXCEPTIONS
# ============================================================================

class NoClassesError(ValueError):
    """Lβ² > U: the promise gap is too narrow for even one pair of classes."""


class BudgetExceededError(RuntimeError):
    """Exact enumeration would exceed the configured budget."""


class ClassSizeError(ValueError):
    """A class size exceeds the universe size n."""


# ============================================================================
# ENUMS
# ============================================================================

class Parity(str, Enum):
    """Which planted distribution a defect set comes from."""
    EVEN = 'even'    # sizes Lβ², Lβ⁴, …
    ODD = 'odd'      # sizes Lβ, Lβ³, …

    @property
    def bit(self) -> int:
        return 0 if self is Parity.EVEN else 1

    @classmethod
    def from_bit(cls, bit: int) -> 'Parity':
        if bit not in (0, 1):
            raise ValueError(f"parity bit must be 0 or 1, got {bit}")
        return cls.EVEN if bit == 0 else cls.ODD


class InducedMode(str, Enum):
    EXACT = 'exact'
    MONTECARLO = 'mc'


# ============================================================================
# SIZE CLASSES
# ============================================================================

class SizeClasses(BaseModel):
    """
    Defect-set sizes of the two planted distributions.

    even_sizes[j-1] = Lβ^{2j} and odd_sizes[j-1] = Lβ^{2j-1} for j = 1..m,
    with β = ⌊α⌋ + 1 so that no two windows [s, αs] overlap.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float = Field(gt=1.0, description="Approximation factor α")
    beta: int = Field(ge=2, description="⌊α⌋ + 1")
    lower: int = Field(ge=1, alias='L', description="Promise lower bound L")
    upper: int = Field(alias='U', description="Promise upper bound U")
    m: int = Field(ge=1, description="Number of class pairs")
    even_sizes: List[int] = Field(description="Lβ², Lβ⁴, …, Lβ^{2m}")
    odd_sizes: List[int] = Field(description="Lβ, Lβ³, …, Lβ^{2m-1}")

    @model_validator(mode='after')
    def check_classes(self) -> 'SizeClasses':
        if len(self.even_sizes) != self.m or len(self.odd_sizes) != self.m:
            raise ValueError(f"expected {self.m} sizes per parity")
        merged = self.all_sizes()
        if any(b != a * self.beta for a, b in zip(merged, merged[1:])):
            raise ValueError("consecutive class sizes must differ by exactly beta")
        if merged[0] != self.lower * self.beta or merged[-1] > self.upper:
            raise ValueError(f"class sizes must lie in [L*beta, U], got {merged[0]}..{merged[-1]}")
        windows = self.windows()
        for (_, high, _), (low, _, _) in zip(windows, windows[1:]):
            if not high < low:
                raise ValueError(f"windows overlap at {high} >= {low}")
        return self

    def sizes(self, parity: Parity) -> List[int]:
        return self.even_sizes if Parity(parity) is Parity.EVEN else self.odd_sizes

    def level_sizes(self, j: int) -> Tuple[int, int]:
        """(Lβ^{2j}, Lβ^{2j-1}) for 1 <= j <= m."""
        if not 1 <= j <= self.m:
            raise ValueError(f"level j={j} outside 1..{self.m}")
        return self.even_sizes[j - 1], self.odd_sizes[j - 1]

    def all_sizes(self) -> List[int]:
        """Odd and even sizes merged in increasing order."""
        return [s for pair in zip(self.odd_sizes, self.even_sizes) for s in pair]

    @property
    def max_size(self) -> int:
        return self.even_sizes[-1]

    def windows(self) -> List[Tuple[int, float, Parity]]:
        """(s, αs, parity) for every class size, increasing in s."""
        parity = {s: Parity.EVEN for s in self.even_sizes}
        parity.update({s: Parity.ODD for s in self.odd_sizes})
        return [(s, self.alpha * s, parity[s]) for s in self.all_sizes()]

    def parity_of(self, estimate: float) -> Optional[Parity]:
        """Parity of the unique s with estimate in [s, αs], or None."""
        for low, high, parity in self.windows():
            if low <= estimate <= high:
                return parity
        return None


# ============================================================================
# DISTRIBUTIONS AND SAMPLES
# ============================================================================

class DiscreteDistribution(BaseModel):
    """
    Finite law over outcomes (response strings such as "0110").

    Exact distributions carry Fraction masses summing to exactly 1; sampled
    ones carry float frequencies plus their standard errors.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    masses: Dict[str, Probability] = Field(description="Outcome -> probability")
    std_errors: Optional[Dict[str, float]] = Field(default=None, description="Per-outcome standard errors (sampled laws)")
    samples: Optional[int] = Field(default=None, ge=1, description="Number of draws behind a sampled law")

    @model_validator(mode='after')
    def check_masses(self) -> 'DiscreteDistribution':
        if not self.masses:
            raise ValueError("a distribution needs at least one outcome")
        if any(mass < 0 for mass in self.masses.values()):
            raise ValueError("masses must be non-negative")
        if self.exact:
            total = sum(self.masses.values(), Fraction(0))
            if total != 1:
                raise ValueError(f"exact masses sum to {total}, not 1")
        elif abs(math.fsum(float(v) for v in self.masses.values()) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1 within 1e-12")
        return self

    @classmethod
    def point_mass(cls, outcome: str) -> 'DiscreteDistribution':
        return cls(masses={outcome: Fraction(1)})

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.masses.values())

    @property
    def outcomes(self) -> List[str]:
        return sorted(self.masses)

    def mass(self, outcome: str) -> Probability:
        zero = Fraction(0) if self.exact else 0.0
        return self.masses.get(outcome, zero)


class CouplingSample(BaseModel):
    """One coupled pair: X of size Lβ^{2j} (even law), Y of size Lβ^{2j-1} (odd law)."""
    model_config = ConfigDict(frozen=True)

    j: int = Field(ge=1, description="Level, uniform on 1..m")
    X: DefectSet
    Y: DefectSet

    @model_validator(mode='after')
    def check_universe(self) -> 'CouplingSample':
        if self.X.universe_size != self.Y.universe_size:
            raise ValueError("X and Y must share a universe")
        return self


# ============================================================================
# DISAGREEMENT REPORTS
# ============================================================================

class Disagreement(BaseModel):
    """
    For a query of size k at level j:
    p1 = Pr(H_{n,k,Lβ^{2j}} >= λ)·Pr(H_{n,k,Lβ^{2j-1}} < λ) and p2 the mirrored product.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    j: int = Field(ge=1)
    k: int = Field(ge=0)
    p1: Probability
    p2: Probability

    @property
    def total(self) -> Probability:
        return self.p1 + self.p2


class BucketSums(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    low: Probability
    mid: Probability
    high: Probability

    @property
    def total(self) -> Probability:
        return self.low + self.mid + self.high


class BucketReport(BaseModel):
    """
    Split of levels 1..m around m* = max{j : kLβ^{2j} <= λn}:
    low = j <= m*, mid = j = m*+1, high = j >= m*+2.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int = Field(ge=0, description="Query size")
    n: int = Field(gt=0)
    lambda_: int = Field(ge=1)
    m_star: Optional[int] = Field(description="None stands for +inf (k = 0)")
    j_low: List[int]
    j_mid: List[int]
    j_high: List[int]
    p1: BucketSums = Field(description="Sums of the first products per bucket")
    p2: BucketSums = Field(description="Sums of the mirrored products per bucket")
    low_bound: Probability = Field(description="β²/(β²-1)·kLβ^{2 min(m*, m)}/(λn), 0 when the low bucket is empty")
    mid_bound: Probability = Field(description="1 when the mid bucket is non-empty, else 0")
    high_bound: float = Field(description="e^{-λ/4}/(1-e^{-λ/4})")

    @property
    def total(self) -> Probability:
        return self.p1.total + self.p2.total

    def holds(self, slack: float = 1e-12) -> bool:
        """Every bucket sum, of both products, within its analytic bound."""
        return all(
            sums.low <= self.low_bound + slack
            and sums.mid <= self.mid_bound + slack
            and sums.high <= self.high_bound + slack
            for sums in (self.p1, self.p2)
        )


class ScalingRow(BaseModel):
    """Disagreement of one query size as U grows."""

    upper: int = Field(description="Promise upper bound U")
    m: int
    k: int
    per_query: float = Field(description="(1/m)·Σ_j P_j")
    scaled: float = Field(description="m·per_query = Σ_j P_j")
    bound: float = Field(description="Sum of the analytic bucket bounds over both products")


class CouplingBound(BaseModel):
    """Union bound Σ_i Pr(Q_i(X) != Q_i(Y)) on the induced TV, with the TV itself when computed."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    per_query: List[Probability]
    tv_upper: Probability
    induced_tv: Optional[Probability] = None

    def holds(self, slack: float = 1e-12) -> Optional[bool]:
        if self.induced_tv is None:
            return None
        if isinstance(self.induced_tv, Fraction) and isinstance(self.tv_upper, Fraction):
            return self.induced_tv <= self.tv_upper
        return float(self.induced_tv) <= float(self.tv_upper) + slack


class PushforwardReport(BaseModel):
    """Coupled marginals pushed through a plan versus independent draws of each law."""

    samples: int = Field(ge=1)
    outcomes: int = Field(ge=1, description="Distinct response strings seen")
    max_discrepancy: float = Field(ge=0.0, description="Largest |coupled - independent| frequency")
    max_z: float = Field(ge=0.0, description="Largest discrepancy in standard errors")

    def within(self, sigmas: float = 4.0) -> bool:
        return self.max_z <= sigmas


class DerandomizeResult(BaseModel):
    """Best seed found and the fixed plan and parity rule it induces."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    best_seed: int
    success: float = Field(description="Winner's success on the selection trials")
    validated_success: float = Field(description="Winner's success on fresh trials at 4x the budget")
    seed_successes: List[Tuple[int, float]] = Field(description="(seed, success) for every candidate")
    plan: QueryPlan
    rule: object = Field(description="Callable mapping responses to a Parity")
