"""
Threshold query evaluation and the random objects the experiments draw:
p-queries, uniform defect sets and whole random plans.

Every sampler takes an explicitly owned numpy Generator.
"""

from typing import Sequence, Tuple

import numpy as np
from icecream import ic

from .models import DENSE_FRACTION, DefectSet, Query, QueryPlan, ResponseVector, UniverseMismatchError

ic.configureOutput(prefix='[ORACLE] ')

# Plans over universes up to this size are evaluated through a membership bitmap
BITMAP_N_MAX = 10 ** 7


# ============================================================================
# EVALUATION
# ============================================================================

def intersection_size(query: Query, defects: DefectSet) -> int:
    """|W ∩ B|."""
    if query.universe_size != defects.universe_size:
        raise UniverseMismatchError(
            f"query over n={query.universe_size}, defect set over n={defects.universe_size}")
    if defects.size == 0:
        return 0
    members = defects.as_array()
    if query.bitmap is not None:
        return int(np.count_nonzero(query.bitmap[members - 1]))
    return int(np.count_nonzero(np.isin(members, query.indices, assume_unique=True)))


def evaluate(query: Query, defects: DefectSet, lam: int) -> int:
    """W^{≥λ}(B): 1 iff |W ∩ B| >= λ."""
    if lam < 1:
        raise ValueError(f"lambda must be at least 1, got {lam}")
    return int(intersection_size(query, defects) >= lam)


def evaluate_plan(plan: QueryPlan, defects: DefectSet) -> ResponseVector:
    """
    Q^{≥λ}(B) for a whole plan.

    Membership of every plan entry is looked up at once (bitmap for
    n <= 10^7, sorted search above), then per-query hit counts come from
    a cumulative sum taken at the row offsets.
    """
    if plan.universe_size != defects.universe_size:
        raise UniverseMismatchError(
            f"plan over n={plan.universe_size}, defect set over n={defects.universe_size}")
    if plan.num_queries == 0:
        return ResponseVector(bits=np.zeros(0, dtype=np.uint8))
    if plan.members.size == 0 or defects.size == 0:
        return ResponseVector(bits=np.zeros(plan.num_queries, dtype=np.uint8))

    if plan.universe_size <= BITMAP_N_MAX:
        marked = np.zeros(plan.universe_size + 1, dtype=np.bool_)
        marked[defects.as_array()] = True
        hits = marked[plan.members]
    else:
        hits = np.isin(plan.members, defects.as_array())

    running = np.zeros(plan.members.size + 1, dtype=np.int64)
    np.cumsum(hits, out=running[1:])
    counts = running[plan.offsets[1:]] - running[plan.offsets[:-1]]
    return ResponseVector(bits=(counts >= plan.lambda_).astype(np.uint8))


# ============================================================================
# SAMPLERS
# ============================================================================

def _floyd_sample(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Robert Floyd's sequential sampler: `size` distinct values of 0..n-1, no rejections."""
    chosen = set()
    for j in range(n - size, n):
        value = int(rng.integers(0, j + 1))
        chosen.add(j if value in chosen else value)
    return np.fromiter(chosen, dtype=np.int64, count=size)


def uniform_subset_indices(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniformly random size-`size` subset of [n] as sorted 1-based indices.

    Dense sizes use numpy's partial shuffle (`choice` without replacement);
    sparse sizes use Floyd's sequential sampler. Both are exactly uniform.
    """
    if size < 0 or size > n:
        raise ValueError(f"subset size {size} outside [0, {n}]")
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    if size == n:
        return np.arange(1, n + 1, dtype=np.int64)
    if size >= DENSE_FRACTION * n:
        picked = rng.choice(n, size=size, replace=False)
    else:
        picked = _floyd_sample(n, size, rng)
    return np.sort(picked.astype(np.int64)) + 1


def uniform_defect_set(n: int, size: int, rng: np.random.Generator) -> DefectSet:
    """B uniform over all C(n, size) subsets of [n]."""
    if size > n:
        raise ValueError(f"defect set size {size} exceeds universe size {n}")
    members = uniform_subset_indices(n, size, rng)
    return DefectSet.model_construct(universe_size=n, members=tuple(members.tolist()))


def p_query_indices(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """
    Members of a p-query: each item kept independently with probability p.

    Drawn as |W| ~ Binomial(n, p) followed by a uniform subset of that
    size, which has the same law and never touches all n items when p is small.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    size = int(rng.binomial(n, p))
    return uniform_subset_indices(n, size, rng)


def random_p_query(n: int, p: float, rng: np.random.Generator) -> Query:
    """A query containing each i ∈ [n] independently with probability p."""
    return Query.from_indices(n, p_query_indices(n, p, rng))


def random_p_plan(n: int, lam: int, levels: Sequence[Tuple[float, int]], rng: np.random.Generator) -> QueryPlan:
    """
    Plan made of independent p-queries, level by level.

    Args:
        n: Universe size
        lam: Threshold λ
        levels: (p, count) pairs; `count` p-queries are drawn per pair, in order
        rng: Exclusively owned stream
    """
    rows = []
    for p, count in levels:
        for _ in range(count):
            rows.append(p_query_indices(n, p, rng))
    plan = QueryPlan.from_member_arrays(n, lam, rows)
    ic("random plan sealed", n, lam, plan.num_queries)
    return plan


def random_size_plan(n: int, lam: int, sizes: Sequence[int], rng: np.random.Generator) -> QueryPlan:
    """Plan of uniformly random queries with the given sizes."""
    return QueryPlan.from_member_arrays(n, lam, [uniform_subset_indices(n, k, rng) for k in sizes])


def singleton_plan(n: int, lam: int) -> QueryPlan:
    """The n queries {1}, {2}, …, {n}."""
    return QueryPlan(universe_size=n, lambda_=lam,
                     members=np.arange(1, n + 1, dtype=np.int64),
                     offsets=np.arange(0, n + 1, dtype=np.int64))
