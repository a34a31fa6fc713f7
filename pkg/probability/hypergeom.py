"""
Hypergeometric law H_{n,k,s}: marked items caught by a uniform draw without replacement.

Two numeric paths share one interface:
- exact: Fraction arithmetic over a cached Pascal table, used when n <= GT_EXACT_N_MAX
- float: log-space terms (log-gamma for large arguments) summed with math.fsum

Author: Agent
Date: 2025-10-18
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np
from icecream import ic
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import gammaln

from harness.settings import SETTINGS

ic.configureOutput(prefix='[PROB] ')

Probability = Union[Fraction, float]

# Pascal rows are built up to this size on first use
_PASCAL_LIMIT = 200
# relative size at which an upper-tail sum stops
_TAIL_CUTOFF = 1e-18
# numpy rejects hypergeometric universes of this size or more
NUMPY_HYPERGEOM_LIMIT = 10 ** 9
# largest draw taken item by item past that limit
SEQUENTIAL_DRAW_LIMIT = 10 ** 7
_pascal_rows: List[List[int]] = [[1]]


class HypergeomParams(BaseModel):
    """
    Parameters of H_{n,k,s}.

    n_total items of which `marked` are marked; `draw` items are sampled
    uniformly without replacement.
    """
    model_config = ConfigDict(frozen=True)

    n_total: int = Field(gt=0, description="Universe size n")
    marked: int = Field(ge=0, description="Marked items k")
    draw: int = Field(ge=0, description="Sample size s")

    @model_validator(mode='after')
    def check_counts(self) -> 'HypergeomParams':
        if self.marked > self.n_total:
            raise ValueError(f"marked={self.marked} exceeds n_total={self.n_total}")
        if self.draw > self.n_total:
            raise ValueError(f"draw={self.draw} exceeds n_total={self.n_total}")
        return self

    @property
    def support(self) -> Tuple[int, int]:
        """Smallest and largest attainable counts."""
        lo = max(0, self.draw - (self.n_total - self.marked))
        hi = min(self.marked, self.draw)
        return lo, hi

    @property
    def mean(self) -> Fraction:
        """ks/n, exactly."""
        return Fraction(self.marked * self.draw, self.n_total)

    @property
    def mode(self) -> int:
        return ((self.draw + 1) * (self.marked + 1)) // (self.n_total + 2)

    def is_exact(self, exact: Optional[bool] = None) -> bool:
        if exact is not None:
            return exact
        return self.n_total <= SETTINGS.exact_n_max


# ============================================================================
# BINOMIAL COEFFICIENTS
# ============================================================================

def binomial_exact(n: int, r: int) -> int:
    """C(n, r) with C = 0 outside 0 <= r <= n."""
    if r < 0 or n < 0 or r > n:
        return 0
    if n <= _PASCAL_LIMIT:
        while len(_pascal_rows) <= n:
            prev = _pascal_rows[-1]
            _pascal_rows.append([1] + [prev[i] + prev[i + 1] for i in range(len(prev) - 1)] + [1])
        return _pascal_rows[n][r]
    return math.comb(n, r)


@lru_cache(maxsize=65536)
def log_binomial(n: int, r: int) -> float:
    """
    log C(n, r) for 0 <= r <= n.

    Short products are summed term by term, which stays accurate for
    n in the billions; long ones fall back to log-gamma.
    """
    if r < 0 or r > n:
        return -math.inf
    r = min(r, n - r)
    if r <= 64:
        return math.fsum(math.log((n - j) / (j + 1)) for j in range(r))
    return float(gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1))


# ============================================================================
# PMF, TAILS, SAMPLING
# ============================================================================

def _log_pmf(params: HypergeomParams, r: int) -> float:
    n, k, s = params.n_total, params.marked, params.draw
    return log_binomial(k, r) + log_binomial(n - k, s - r) - log_binomial(n, s)


def hypergeom_pmf(params: HypergeomParams, r: int, exact: Optional[bool] = None) -> Probability:
    """
    Pr(H = r) = C(k,r) C(n-k,s-r) / C(n,s).

    Args:
        params: Law parameters
        r: Count of marked items; values outside the support give 0
        exact: Force (True) or forbid (False) rational arithmetic

    Returns:
        Fraction on the exact path, float otherwise
    """
    lo, hi = params.support
    use_exact = params.is_exact(exact)
    if r < lo or r > hi:
        return Fraction(0) if use_exact else 0.0
    n, k, s = params.n_total, params.marked, params.draw
    if use_exact:
        return Fraction(binomial_exact(k, r) * binomial_exact(n - k, s - r), binomial_exact(n, s))
    return math.exp(_log_pmf(params, r))


def hypergeom_tail_ge(params: HypergeomParams, threshold: int, exact: Optional[bool] = None) -> Probability:
    """
    Pr(H >= threshold).

    Equals 1 for threshold <= 0 and 0 once threshold exceeds min(k, s).
    The float path sums whichever side of the mode is the short tail.
    """
    use_exact = params.is_exact(exact)
    one, zero = (Fraction(1), Fraction(0)) if use_exact else (1.0, 0.0)
    lo, hi = params.support
    if threshold <= lo:
        return one
    if threshold > hi:
        return zero
    if use_exact:
        return sum((hypergeom_pmf(params, r, exact=True) for r in range(threshold, hi + 1)), Fraction(0))
    if threshold > params.mode:
        # terms decrease past the mode
        terms = []
        for r in range(threshold, hi + 1):
            term = math.exp(_log_pmf(params, r))
            terms.append(term)
            if term <= _TAIL_CUTOFF * terms[0]:
                break
        return min(1.0, math.fsum(terms))
    lower = math.fsum(math.exp(_log_pmf(params, r)) for r in range(lo, threshold))
    return max(0.0, 1.0 - lower)


def hypergeom_tail_le(params: HypergeomParams, x: float, exact: Optional[bool] = None) -> Probability:
    """Pr(H <= x) for real x."""
    use_exact = params.is_exact(exact)
    upper = hypergeom_tail_ge(params, math.floor(x) + 1, exact=use_exact)
    return (Fraction(1) if use_exact else 1.0) - upper


def _sequential_draws(n: int, k: int, s: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Hits of `count` independent draws, taking s items one at a time after reducing to s <= k <= n/2."""
    if s > n - s:
        return k - _sequential_draws(n, k, n - s, rng, count)
    if k > n - k:
        return s - _sequential_draws(n, n - k, s, rng, count)
    if k < s:
        return _sequential_draws(n, s, k, rng, count)
    if s > SEQUENTIAL_DRAW_LIMIT:
        raise ValueError(
            f"n={n} is past numpy's hypergeometric limit and the reduced draw {s} exceeds {SEQUENTIAL_DRAW_LIMIT}")
    hits = np.zeros(count, dtype=np.int64)
    for taken in range(s):
        hits += rng.random(count) * (n - taken) < k - hits
    return hits


def hypergeom_sample(params: HypergeomParams, rng: np.random.Generator, size: Optional[int] = None):
    """
    Draw |S ∩ M| for a uniformly random S of size s against a fixed M of size k.

    Universes of NUMPY_HYPERGEOM_LIMIT or more are sampled item by item
    after the symmetries of the law shrink the draw; a draw that stays
    above SEQUENTIAL_DRAW_LIMIT raises ValueError.

    Args:
        params: Law parameters
        rng: Exclusively owned random stream
        size: None for a single int, otherwise a numpy array of that many draws
    """
    n, k, s = params.n_total, params.marked, params.draw
    if k == 0 or s == 0 or k == n:
        value = s if k == n else 0
        return value if size is None else np.full(size, value, dtype=np.int64)
    if n >= NUMPY_HYPERGEOM_LIMIT:
        draws = _sequential_draws(n, k, s, rng, 1 if size is None else size)
        return int(draws[0]) if size is None else draws
    draws = rng.hypergeometric(ngood=k, nbad=n - k, nsample=s, size=size)
    return int(draws) if size is None else draws.astype(np.int64)


def support_pmf(params: HypergeomParams, exact: Optional[bool] = None) -> List[Tuple[int, Probability]]:
    """Every (r, Pr(H = r)) over the support."""
    lo, hi = params.support
    return [(r, hypergeom_pmf(params, r, exact=exact)) for r in range(lo, hi + 1)]
