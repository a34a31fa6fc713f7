"""
Exact disagreement of a single threshold query under the level coupling.

For a query W of size k and level j, |W ∩ X| and |W ∩ Y| are independent
hypergeometrics H_{n,k,Lβ^{2j}} and H_{n,k,Lβ^{2j-1}}, so

    Pr(Q(X) != Q(Y)) = Pr(H_X >= λ)·Pr(H_Y < λ) + Pr(H_Y >= λ)·Pr(H_X < λ)

Bucket sums and scaling measurements are built on top of this.
"""

import math
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from icecream import ic

from oracle.models import QueryPlan
from oracle.sampling import evaluate_plan
from probability import HypergeomParams, hypergeom_tail_ge

from .hard_distributions import build_size_classes, check_fits, sample_coupling
from .models import BucketReport, BucketSums, Disagreement, ScalingRow, SizeClasses

ic.configureOutput(prefix='[LAB] ')


def exact_disagreement(k: int, j: int, classes: SizeClasses, n: int, lam: int, exact: Optional[bool] = None) -> Disagreement:
    """
    Both products of the disagreement probability at level j.

    Fractions when n <= GT_EXACT_N_MAX (or exact=True), floats otherwise.

    Raises:
        ValueError: j outside 1..m or k outside 0..n
        ClassSizeError: a class size exceeds n
    """
    if not 0 <= k <= n:
        raise ValueError(f"query size k={k} outside 0..{n}")
    check_fits(classes, n)
    even_size, odd_size = classes.level_sizes(j)
    hit_x = hypergeom_tail_ge(HypergeomParams(n_total=n, marked=k, draw=even_size), lam, exact=exact)
    hit_y = hypergeom_tail_ge(HypergeomParams(n_total=n, marked=k, draw=odd_size), lam, exact=exact)
    return Disagreement(j=j, k=k, p1=hit_x * (1 - hit_y), p2=hit_y * (1 - hit_x))


def m_star(k: int, classes: SizeClasses, n: int, lam: int) -> Optional[int]:
    """max{j ∈ Z : kLβ^{2j} <= λn} in integer arithmetic; None (+inf) for k = 0."""
    if k == 0:
        return None
    L, beta2 = classes.lower, classes.beta ** 2
    j = 0
    if k * L <= lam * n:
        while k * L * beta2 ** (j + 1) <= lam * n:
            j += 1
        return j
    while k * L > lam * n * beta2 ** (-j):
        j -= 1
    return j


def _bucket(terms: List[Disagreement], levels: Sequence[int], attr: str, zero):
    return sum((getattr(terms[j - 1], attr) for j in levels), zero)


def bucket_decomposition(k: int, classes: SizeClasses, n: int, lam: int, exact: Optional[bool] = None) -> BucketReport:
    """
    Sums of both disagreement products over the low, mid and high levels,
    next to the bounds that control each bucket.
    """
    terms = [exact_disagreement(k, j, classes, n, lam, exact=exact) for j in range(1, classes.m + 1)]
    star = m_star(k, classes, n, lam)
    levels = range(1, classes.m + 1)
    if star is None:
        j_low, j_mid, j_high = list(levels), [], []
    else:
        j_low = [j for j in levels if j <= star]
        j_mid = [j for j in levels if j == star + 1]
        j_high = [j for j in levels if j >= star + 2]

    is_exact = isinstance(terms[0].p1, Fraction)
    zero = Fraction(0) if is_exact else 0.0
    sums = {
        attr: BucketSums(
            low=_bucket(terms, j_low, attr, zero),
            mid=_bucket(terms, j_mid, attr, zero),
            high=_bucket(terms, j_high, attr, zero),
        )
        for attr in ('p1', 'p2')
    }

    beta2 = classes.beta ** 2
    if j_low and k > 0:
        top = j_low[-1]
        low_bound = Fraction(beta2 * k * classes.lower * beta2 ** top, (beta2 - 1) * lam * n)
        if not is_exact:
            low_bound = float(low_bound)
    else:
        low_bound = zero
    q = math.exp(-lam / 4)
    return BucketReport(
        k=k,
        n=n,
        lambda_=lam,
        m_star=star,
        j_low=j_low,
        j_mid=j_mid,
        j_high=j_high,
        p1=sums['p1'],
        p2=sums['p2'],
        low_bound=low_bound,
        mid_bound=Fraction(1) if j_mid else zero,
        high_bound=q / (1 - q),
    )


def level_average(k: int, classes: SizeClasses, n: int, lam: int, exact: Optional[bool] = None):
    """(1/m)·Σ_j P_j: disagreement of one size-k query under the coupling."""
    terms = [exact_disagreement(k, j, classes, n, lam, exact=exact).total for j in range(1, classes.m + 1)]
    zero = Fraction(0) if isinstance(terms[0], Fraction) else 0.0
    return sum(terms, zero) / classes.m


def measure_scaling(k_fraction: float, alpha: float, L: int, n: int, lam: int, U_values: Sequence[int]) -> List[ScalingRow]:
    """
    m·(per-query disagreement) for a query of size ⌈k_fraction·n⌉ as U grows.

    The product stays below the sum of the bucket bounds, so the per-query
    disagreement falls like 1/m; the largest measured product is the
    empirical constant.
    """
    k = min(n, max(1, math.ceil(k_fraction * n)))
    rows = []
    for U in U_values:
        classes = build_size_classes(alpha, L, U)
        report = bucket_decomposition(k, classes, n, lam, exact=False)
        scaled = float(report.total)
        bound = 2 * (float(report.low_bound) + float(report.mid_bound) + report.high_bound)
        rows.append(ScalingRow(upper=U, m=classes.m, k=k, per_query=scaled / classes.m, scaled=scaled, bound=bound))
    ic("scaling", k, [(r.m, r.scaled) for r in rows])
    return rows


def coupling_disagreement_frequencies(plan: QueryPlan, classes: SizeClasses, n: int, samples: int, rng: np.random.Generator):
    """
    Per-query Monte Carlo estimate of Pr(Q_i(X) != Q_i(Y)) over coupled draws.

    Returns:
        (frequencies, standard errors) as numpy arrays, one entry per query
    """
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    counts = np.zeros(plan.num_queries, dtype=np.int64)
    for _ in range(samples):
        pair = sample_coupling(classes, n, rng)
        counts += evaluate_plan(plan, pair.X).bits != evaluate_plan(plan, pair.Y).bits
    freq = counts / samples
    return freq, np.sqrt(freq * (1 - freq) / samples)
