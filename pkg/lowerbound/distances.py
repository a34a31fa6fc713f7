"""
Total variation and distinguishers on finite outcome spaces.

A distinguisher maps an outcome to a guess (0 = first law, 1 = second);
its advantage μ0(A) - μ1(A), A = {x : rule(x) = 0}, never exceeds the TV
distance, with equality for the rule that picks the heavier law pointwise.
"""

import math
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict

from estimator.models import NoLevelFoundError
from oracle.models import ResponseVector
from probability.hypergeom import Probability

from .models import DiscreteDistribution, Parity, SizeClasses

EVENT_OUTCOMES_MAX = 16

Outcome = Union[str, ResponseVector]


def _union(d0: DiscreteDistribution, d1: DiscreteDistribution) -> List[str]:
    return sorted(set(d0.masses) | set(d1.masses))


def _sum(values, exact: bool) -> Probability:
    return sum(values, Fraction(0)) if exact else math.fsum(float(v) for v in values)


def tv_distance(d0: DiscreteDistribution, d1: DiscreteDistribution) -> Probability:
    """½ Σ_ω |d0(ω) - d1(ω)|; a Fraction when both laws are exact."""
    exact = d0.exact and d1.exact
    total = _sum((abs(d0.mass(w) - d1.mass(w)) for w in _union(d0, d1)), exact)
    return total / 2


def tv_distance_by_events(d0: DiscreteDistribution, d1: DiscreteDistribution) -> Probability:
    """
    sup over events A of |d0(A) - d1(A)|, by enumerating every subset.

    Raises:
        ValueError: more than 16 outcomes
    """
    outcomes = _union(d0, d1)
    if len(outcomes) > EVENT_OUTCOMES_MAX:
        raise ValueError(f"{len(outcomes)} outcomes exceed the event enumeration limit of {EVENT_OUTCOMES_MAX}")
    exact = d0.exact and d1.exact
    diffs = [d0.mass(w) - d1.mass(w) for w in outcomes]
    if not exact:
        diffs = [float(v) for v in diffs]
    # subset sums by lowest set bit
    sums = [Fraction(0) if exact else 0.0] * (1 << len(diffs))
    best = sums[0]
    for mask in range(1, len(sums)):
        low = (mask & -mask).bit_length() - 1
        sums[mask] = sums[mask & (mask - 1)] + diffs[low]
        best = max(best, abs(sums[mask]))
    return best


def guess_bit(value) -> int:
    """0 or 1 from a rule output (a bit or a Parity)."""
    if isinstance(value, Parity):
        return value.bit
    if value in (0, 1):
        return int(value)
    raise ValueError(f"rule returned {value!r}; expected 0, 1 or a Parity")


def _guess(rule: Callable, outcome: str) -> int:
    try:
        return guess_bit(rule(outcome))
    except LookupError as e:
        raise ValueError(f"rule is undefined on outcome {outcome!r}") from e


def distinguisher_advantage(rule: Callable, d0: DiscreteDistribution, d1: DiscreteDistribution) -> Probability:
    """
    2·(accuracy - ½) when the law is picked by a fair coin:
    d0(A) - d1(A) for A = {x : rule(x) = 0}.

    Raises:
        ValueError: the rule is undefined or not binary on some outcome
    """
    exact = d0.exact and d1.exact
    accept = [w for w in _union(d0, d1) if _guess(rule, w) == 0]
    return _sum((d0.mass(w) for w in accept), exact) - _sum((d1.mass(w) for w in accept), exact)


class OutcomeRule(BaseModel):
    """Table rule: the stored guess per outcome, `default` elsewhere."""
    model_config = ConfigDict(frozen=True)

    choices: Dict[str, int]
    default: int = 0

    def __call__(self, outcome: Outcome) -> int:
        key = outcome.as_string() if isinstance(outcome, ResponseVector) else outcome
        return self.choices.get(key, self.default)


def optimal_rule(d0: DiscreteDistribution, d1: DiscreteDistribution) -> OutcomeRule:
    """Guess 0 wherever d0 puts at least as much mass as d1."""
    return OutcomeRule(choices={w: 0 if d0.mass(w) >= d1.mass(w) else 1 for w in _union(d0, d1)})


class EstimateDistinguisher(BaseModel):
    """
    Turns an estimator into a parity guess.

    The estimate D lands in at most one window [s, αs]; its parity is the
    guess. Estimates outside every window, and runs where no level passed,
    fall back to `default`.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    estimate_rule: Callable[[ResponseVector], float]
    classes: SizeClasses
    default: Parity = Parity.EVEN

    def estimate(self, outcome: Outcome) -> Optional[float]:
        responses = ResponseVector.from_bits(int(ch) for ch in outcome) if isinstance(outcome, str) else outcome
        try:
            return self.estimate_rule(responses)
        except NoLevelFoundError:
            return None

    def __call__(self, outcome: Outcome) -> Parity:
        value = self.estimate(outcome)
        if value is None:
            return self.default
        return self.classes.parity_of(value) or self.default


def estimator_as_distinguisher(estimate_rule: Callable[[ResponseVector], float], classes: SizeClasses) -> EstimateDistinguisher:
    return EstimateDistinguisher(estimate_rule=estimate_rule, classes=classes)
