"""
Induced distributions of a fixed plan under the planted laws.

Exact mode enumerates every defect set of every class size (bitmask
popcounts against each query), weighting sets uniformly within a class and
classes uniformly within the parity. Monte Carlo mode samples the law.

Author: Agent
Date: 2025-10-18
"""

import itertools
import math
from collections import Counter
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np
from icecream import ic

from harness.settings import SETTINGS
from oracle.models import QueryPlan, UniverseMismatchError
from oracle.sampling import evaluate_plan
from probability import binomial_exact

from .disagreement import level_average
from .distances import tv_distance
from .hard_distributions import check_fits, sample_planted
from .models import (
    BudgetExceededError,
    CouplingBound,
    DiscreteDistribution,
    InducedMode,
    Parity,
    PushforwardReport,
    SizeClasses,
)

ic.configureOutput(prefix='[LAB] ')

# Rows of 0/1 membership per batch when pushing sampled sets through a plan
PUSHFORWARD_CELLS = 1 << 22


def _check_plan(plan: QueryPlan, classes: SizeClasses, n: int) -> None:
    if plan.universe_size != n:
        raise UniverseMismatchError(f"plan is over [{plan.universe_size}], expected [{n}]")
    check_fits(classes, n)


def _query_masks(plan: QueryPlan) -> List[int]:
    return [sum(1 << (int(i) - 1) for i in row) for row in plan.rows()]


def _enumerate_class(masks: List[int], lam: int, n: int, size: int) -> Counter:
    """Response string counts over all C(n, size) defect sets."""
    counts: Counter = Counter()
    for combo in itertools.combinations(range(n), size):
        b = 0
        for i in combo:
            b |= 1 << i
        counts[''.join('1' if (w & b).bit_count() >= lam else '0' for w in masks)] += 1
    return counts


def exact_induced(plan: QueryPlan, classes: SizeClasses, parity: Parity, n: int, budget: Optional[int] = None) -> DiscreteDistribution:
    """
    Exact law of the response string, with Fraction masses.

    Args:
        budget: Largest number of defect sets enumerated per class
            (default GT_ENUM_CLASS_MAX)

    Raises:
        BudgetExceededError: n above GT_ENUM_N_MAX or a class above the budget
    """
    _check_plan(plan, classes, n)
    if n > SETTINGS.enum_n_max:
        raise BudgetExceededError(f"n={n} exceeds the enumeration limit {SETTINGS.enum_n_max}")
    limit = budget if budget is not None else SETTINGS.enum_class_max
    sizes = classes.sizes(parity)
    for s in sizes:
        if binomial_exact(n, s) > limit:
            raise BudgetExceededError(f"C({n}, {s}) = {binomial_exact(n, s)} defect sets exceed the budget {limit}")

    masks = _query_masks(plan)
    masses: Dict[str, Fraction] = {}
    for s in sizes:
        weight = Fraction(1, len(sizes) * binomial_exact(n, s))
        for outcome, count in _enumerate_class(masks, plan.lambda_, n, s).items():
            masses[outcome] = masses.get(outcome, Fraction(0)) + count * weight
    return DiscreteDistribution(masses=masses)


def sampled_induced(plan: QueryPlan, classes: SizeClasses, parity: Parity, n: int, samples: int, rng: np.random.Generator) -> DiscreteDistribution:
    """Empirical law of the response string over `samples` planted draws."""
    _check_plan(plan, classes, n)
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    counts = Counter(evaluate_plan(plan, sample_planted(classes, parity, n, rng)).as_string() for _ in range(samples))
    masses = {w: c / samples for w, c in counts.items()}
    errors = {w: math.sqrt(f * (1 - f) / samples) for w, f in masses.items()}
    return DiscreteDistribution(masses=masses, std_errors=errors, samples=samples)


def induced_distribution(
    plan: QueryPlan,
    classes: SizeClasses,
    parity: Parity,
    n: int,
    mode: InducedMode = InducedMode.EXACT,
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> DiscreteDistribution:
    """
    Law of the response string of `plan` when B follows the planted `parity` law.

    In exact mode `budget` caps the defect sets per class; in Monte Carlo
    mode it is the number of samples and `rng` is required.
    """
    if InducedMode(mode) is InducedMode.EXACT:
        return exact_induced(plan, classes, parity, n, budget)
    if rng is None or budget is None:
        raise ValueError("Monte Carlo mode needs a sample budget and a random stream")
    return sampled_induced(plan, classes, parity, n, budget, rng)


def coupling_tv_bound(
    plan: QueryPlan,
    classes: SizeClasses,
    n: int,
    mode: Optional[InducedMode] = InducedMode.EXACT,
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> CouplingBound:
    """
    Σ_i Pr(Q_i(X) != Q_i(Y)) under the level coupling, from exact
    hypergeometric tails, next to the TV between the two induced laws.

    mode=None skips the induced laws and returns the bound only.
    """
    _check_plan(plan, classes, n)
    by_size = {}
    per_query = []
    for k in plan.sizes().tolist():
        if k not in by_size:
            by_size[k] = level_average(k, classes, n, plan.lambda_)
        per_query.append(by_size[k])
    zero = Fraction(0) if all(isinstance(v, Fraction) for v in per_query) else 0.0
    tv_upper = sum(per_query, zero)
    induced_tv = None
    if mode is not None:
        even = induced_distribution(plan, classes, Parity.EVEN, n, mode, budget, rng)
        odd = induced_distribution(plan, classes, Parity.ODD, n, mode, budget, rng)
        induced_tv = tv_distance(even, odd)
    ic("coupling bound", plan.num_queries, float(tv_upper), None if induced_tv is None else float(induced_tv))
    return CouplingBound(per_query=per_query, tv_upper=tv_upper, induced_tv=induced_tv)


def _membership_matrix(plan: QueryPlan) -> np.ndarray:
    """(n, q) 0/1 matrix, column j marking the items of query j."""
    matrix = np.zeros((plan.universe_size, plan.num_queries), dtype=np.int32)
    for j, row in enumerate(plan.rows()):
        matrix[np.asarray(row, dtype=np.int64) - 1, j] = 1
    return matrix


def _random_sets(n: int, sizes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uniform subset of [n] per entry of `sizes`, as a (len(sizes), n) 0/1 matrix."""
    order = np.argsort(rng.random((len(sizes), n)), axis=1)
    members = np.zeros((len(sizes), n), dtype=np.int32)
    np.put_along_axis(members, order, (np.arange(n)[None, :] < sizes[:, None]).astype(np.int32), axis=1)
    return members


def _outcome_counts(matrix: np.ndarray, lam: int, members: np.ndarray) -> Counter:
    """Response-string counts of the sampled sets (rows of `members`)."""
    bits = (members @ matrix >= lam).astype(np.uint8)
    if bits.shape[1] == 0:
        return Counter({'': len(bits)})
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    return Counter({''.join(map(str, row)): int(k) for row, k in zip(rows, counts)})


def coupling_pushforward_check(plan: QueryPlan, classes: SizeClasses, n: int, samples: int, rng: np.random.Generator) -> PushforwardReport:
    """
    Push coupled pairs through the plan and compare each marginal with
    independent draws of its planted law.

    Sets are drawn in batches and evaluated with one matrix product per
    batch; each discrepancy is measured in pooled standard errors.
    """
    _check_plan(plan, classes, n)
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    matrix = _membership_matrix(plan)
    lam = plan.lambda_
    even = np.asarray(classes.even_sizes, dtype=np.int64)
    odd = np.asarray(classes.odd_sizes, dtype=np.int64)
    batch = max(1, PUSHFORWARD_CELLS // max(n, 1))

    coupled_x: Counter = Counter()
    coupled_y: Counter = Counter()
    direct = {Parity.EVEN: Counter(), Parity.ODD: Counter()}
    for start in range(0, samples, batch):
        size = min(batch, samples - start)
        # coupled pair: one level j, X at Lβ^{2j} and Y at Lβ^{2j-1}
        j = rng.integers(classes.m, size=size)
        coupled_x.update(_outcome_counts(matrix, lam, _random_sets(n, even[j], rng)))
        coupled_y.update(_outcome_counts(matrix, lam, _random_sets(n, odd[j], rng)))
        for parity, sizes in ((Parity.EVEN, even), (Parity.ODD, odd)):
            picked = sizes[rng.integers(len(sizes), size=size)]
            direct[parity].update(_outcome_counts(matrix, lam, _random_sets(n, picked, rng)))

    max_discrepancy, max_z = 0.0, 0.0
    seen = set()
    for coupled, independent in ((coupled_x, direct[Parity.EVEN]), (coupled_y, direct[Parity.ODD])):
        for w in set(coupled) | set(independent):
            seen.add(w)
            a, b = coupled[w] / samples, independent[w] / samples
            gap = abs(a - b)
            pooled = (a + b) / 2
            sigma = math.sqrt(2 * pooled * (1 - pooled) / samples)
            max_discrepancy = max(max_discrepancy, gap)
            if sigma > 0:
                max_z = max(max_z, gap / sigma)
    return PushforwardReport(samples=samples, outcomes=len(seen), max_discrepancy=max_discrepancy, max_z=max_z)
