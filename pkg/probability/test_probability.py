"""
Tests for the probability package: hypergeometric law, tail bounds, P_λ.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from harness.streams import derive_stream
from probability import (
    HypergeomParams,
    ThresholdHitProbability,
    binomial_exact,
    chernoff_lower_tail_bound,
    decay_factor,
    ec_gap,
    empirical_mean_upper_tail_bound,
    hypergeom_pmf,
    hypergeom_sample,
    hypergeom_tail_ge,
    hypergeom_tail_le,
    markov_tail_bound,
    p_lambda,
    p_lambda_poisson_limit,
)


def hp(n, k, s):
    return HypergeomParams(n_total=n, marked=k, draw=s)


# ============================================================================
# HYPERGEOMETRIC LAW
# ============================================================================

def test_pmf_examples():
    assert hypergeom_pmf(hp(4, 2, 2), 1) == Fraction(2, 3)
    assert hypergeom_pmf(hp(7, 7, 3), 3) == 1
    assert hypergeom_pmf(hp(10, 3, 0), 1) == 0
    assert hypergeom_pmf(hp(10, 3, 4), 5) == 0
    assert hypergeom_pmf(hp(10, 3, 4), -1) == 0


def test_pmf_matches_draw_enumeration():
    marked = {0, 1}
    draws = list(itertools.combinations(range(5), 3))
    for r in range(4):
        hits = sum(1 for draw in draws if len(marked.intersection(draw)) == r)
        assert hypergeom_pmf(hp(5, 2, 3), r) == Fraction(hits, len(draws))


def test_params_reject_bad_counts():
    with pytest.raises(ValueError):
        hp(5, 6, 1)
    with pytest.raises(ValueError):
        hp(5, 1, 6)
    with pytest.raises(ValueError):
        hp(0, 0, 0)


@pytest.mark.parametrize("n", [1, 2, 7, 19, 40, 97, 200])
def test_pmf_normalises_and_has_exact_mean(n):
    for k in range(0, n + 1, max(1, n // 9)):
        for s in range(0, n + 1, max(1, n // 7)):
            params = hp(n, k, s)
            masses = [hypergeom_pmf(params, r) for r in range(0, n + 1)]
            assert all(isinstance(m, Fraction) for m in masses)
            assert sum(masses) == 1
            assert sum(r * m for r, m in enumerate(masses)) == Fraction(k * s, n)


def test_tail_examples():
    assert hypergeom_tail_ge(hp(4, 2, 2), 1) == Fraction(5, 6)
    assert hypergeom_tail_ge(hp(4, 2, 2), 0) == 1
    assert hypergeom_tail_ge(hp(4, 2, 2), 3) == 0
    assert hypergeom_tail_le(hp(4, 2, 2), 0.5) == Fraction(1, 6)


def test_float_path_agrees_with_exact_path():
    for n, k, s in [(150, 40, 60), (200, 3, 150), (120, 100, 7)]:
        params = hp(n, k, s)
        for threshold in range(0, min(k, s) + 2):
            exact = hypergeom_tail_ge(params, threshold, exact=True)
            approx = hypergeom_tail_ge(params, threshold, exact=False)
            assert approx == pytest.approx(float(exact), rel=1e-9, abs=1e-15)


def test_large_universe_uses_floats():
    params = hp(10 ** 9, 10 ** 4, 10 ** 5)
    tail = hypergeom_tail_ge(params, 1)
    assert isinstance(tail, float)
    assert tail == pytest.approx(-math.expm1(10 ** 5 * math.log1p(-1e-5)), rel=5e-4)


def test_sample_degenerate_cases():
    rng = derive_stream(1, "hypergeom-degenerate")
    assert hypergeom_sample(hp(9, 0, 4), rng) == 0
    assert hypergeom_sample(hp(9, 9, 4), rng) == 4
    assert hypergeom_sample(hp(9, 3, 0), rng) == 0


def test_sample_frequency_matches_pmf():
    rng = derive_stream(2, "hypergeom-frequency")
    draws = hypergeom_sample(hp(4, 2, 2), rng, size=10 ** 6)
    assert abs(np.mean(draws == 1) - 2 / 3) < 0.003


def test_sample_past_numpy_universe_limit():
    rng = derive_stream(3, "hypergeom-large")
    draws = hypergeom_sample(hp(2 * 10 ** 9, 10 ** 9, 1000), rng, size=2000)
    assert draws.dtype == np.int64
    assert draws.min() >= 0 and draws.max() <= 1000
    # mean 500, variance ~250 per draw
    assert abs(draws.mean() - 500) < 2.0
    single = hypergeom_sample(hp(2 * 10 ** 9, 10 ** 9, 1000), rng)
    assert isinstance(single, int) and 0 <= single <= 1000


def test_sample_large_universe_uses_complements():
    n = 3 * 10 ** 9
    rng = derive_stream(4, "hypergeom-complements")
    # five unmarked items, two left undrawn: |S ∩ M| = n - 7 unless an undrawn item is unmarked
    draws = hypergeom_sample(hp(n, n - 5, n - 2), rng, size=500)
    assert np.all(draws == n - 7)
    with pytest.raises(ValueError, match="reduced draw"):
        hypergeom_sample(hp(4 * 10 ** 9, 2 * 10 ** 9, 2 * 10 ** 9), rng)


# ============================================================================
# TAIL BOUNDS
# ============================================================================

def test_markov_examples():
    assert markov_tail_bound(hp(100, 10, 10), 5) == pytest.approx(0.2)
    assert markov_tail_bound(hp(30, 0, 12), 3) == 0
    params = hp(20, 4, 5)
    assert float(hypergeom_tail_ge(params, 2)) <= markov_tail_bound(params, 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        markov_tail_bound(params, 0)


def test_chernoff_examples():
    params = hp(100, 50, 40)
    assert chernoff_lower_tail_bound(params, 0) == pytest.approx(math.exp(-10))
    assert float(hypergeom_tail_le(params, 10, exact=True)) <= chernoff_lower_tail_bound(params, 10)
    with pytest.raises(ValueError):
        chernoff_lower_tail_bound(params, 25)


def _tail_numerators(n, k, s):
    """Suffix sums of C(k,r)C(n-k,s-r): numerator of Pr(H >= r) over C(n,s)."""
    counts = [binomial_exact(k, r) * binomial_exact(n - k, s - r) for r in range(s + 1)]
    suffix = [0] * (s + 2)
    for r in range(s, -1, -1):
        suffix[r] = suffix[r + 1] + counts[r]
    return suffix


def test_markov_and_chernoff_hold_on_exhaustive_grid():
    for n in range(1, 61):
        for k in range(n + 1):
            for s in range(n + 1):
                total = binomial_exact(n, s)
                suffix = _tail_numerators(n, k, s)
                # Pr(H >= γ) <= ks/(γn), compared over integers
                for gamma in range(1, s + 1):
                    assert suffix[gamma] * gamma * n <= k * s * total
                mu = k * s / n
                if mu == 0:
                    continue
                for xi in (0.0, mu / 4, mu / 2, 3 * mu / 4):
                    below = total - suffix[math.floor(xi) + 1]
                    bound = chernoff_lower_tail_bound(hp(n, k, s), xi)
                    assert below / total <= bound * (1 + 1e-12)


def test_grid_numerators_agree_with_tail_function():
    for n, k, s in [(13, 5, 6), (40, 17, 29), (60, 60, 11)]:
        suffix = _tail_numerators(n, k, s)
        for r in range(s + 1):
            assert hypergeom_tail_ge(hp(n, k, s), r) == Fraction(suffix[r], binomial_exact(n, s))


def test_empirical_mean_bound_examples():
    assert empirical_mean_upper_tail_bound(0.01, 0.1, 100) == pytest.approx((0.1 * math.e) ** 10)
    # vacuous at mu = Gamma, returned as is
    assert empirical_mean_upper_tail_bound(0.2, 0.2, 5) == pytest.approx(math.e ** 1.0)
    assert empirical_mean_upper_tail_bound(0.01, 0.1, 100, sharp=True) < empirical_mean_upper_tail_bound(0.01, 0.1, 100)
    with pytest.raises(ValueError):
        empirical_mean_upper_tail_bound(0.3, 0.2, 5)


def test_empirical_mean_bound_against_simulation():
    rng = derive_stream(3, "empirical-mean-tail")
    runs = 10 ** 6
    # mean of 100 Bernoulli(0.01) is >= 0.1 iff the Binomial(100, 0.01) count is >= 10
    frequency = np.mean(rng.binomial(100, 0.01, size=runs) >= 10)
    bound = empirical_mean_upper_tail_bound(0.01, 0.1, 100)
    sigma = math.sqrt(bound * (1 - bound) / runs)
    assert frequency <= bound + 3 * sigma + 1.0 / runs


def test_ec_gap_examples():
    gap, bound = ec_gap(1, 2)
    assert gap == pytest.approx(0.11788, abs=1e-5)
    assert bound == pytest.approx(0.91970, abs=1e-5)
    assert ec_gap(1, 2 ** 20)[0] < 1e-5
    with pytest.raises(ValueError):
        ec_gap(0.5, 4)
    with pytest.raises(ValueError):
        ec_gap(2, 1)


@pytest.mark.parametrize("c", [1, 1.5, 2, 5, 10])
def test_ec_gap_within_bound(c):
    previous = math.inf
    for e in range(1, 21):
        gap, bound = ec_gap(c, 2 ** e)
        assert -1e-12 <= gap <= bound + 1e-12
        assert gap <= previous
        previous = gap


# ============================================================================
# THRESHOLD HIT PROBABILITY
# ============================================================================

def test_p_lambda_examples():
    assert p_lambda(1, 0.5, 1) == pytest.approx(0.5)
    assert p_lambda(3, 0.5, 2) == pytest.approx(0.5)
    assert p_lambda(5, 1.0, 3) == 1.0
    assert p_lambda(5, 0.0, 1) == 0.0
    assert p_lambda(2, 0.7, 3) == 0.0
    assert ThresholdHitProbability(d=3, p=0.5, **{"lambda": 2}).value == pytest.approx(0.5)


def test_p_lambda_matches_brute_force():
    for d in range(0, 9):
        for lam in range(1, 5):
            p = Fraction(3, 10)
            exact = sum(
                p ** sum(pattern) * (1 - p) ** (d - sum(pattern))
                for pattern in itertools.product((0, 1), repeat=d)
                if sum(pattern) >= lam
            )
            assert p_lambda(d, 0.3, lam) == pytest.approx(float(exact), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("d", [1, 10, 1000, 10 ** 6])
def test_p_lambda_single_threshold_identity(d):
    for p in (1e-9, 1e-6, 1e-3, 0.05, 0.5, 0.9):
        assert p_lambda(d, p, 1) == pytest.approx(float(binom.sf(0, d, p)), rel=1e-12)


def test_p_lambda_agrees_with_scipy_tail():
    for d, p, lam in [(50, 0.01, 2), (50, 0.2, 3), (1000, 0.004, 4), (10 ** 6, 3e-6, 2), (400, 0.5, 7)]:
        assert p_lambda(d, p, lam) == pytest.approx(float(binom.sf(lam - 1, d, p)), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    d=st.integers(min_value=0, max_value=5000),
    lam=st.integers(min_value=1, max_value=6),
    p=st.floats(min_value=0.0, max_value=1.0),
    q=st.floats(min_value=0.0, max_value=1.0),
)
def test_p_lambda_monotone_in_p(d, lam, p, q):
    low, high = sorted((p, q))
    assert p_lambda(d, low, lam) <= p_lambda(d, high, lam) + 1e-12


@pytest.mark.parametrize("lam", [2, 3, 4])
@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0])
def test_level_decay_inequality(lam, alpha):
    c = 2 * lam / (1 - alpha ** -0.25)
    c_prime = decay_factor(lam, alpha)
    assert c_prime == pytest.approx(1 / alpha ** ((lam - 1) / 4))
    for d in (lam, lam + 1, 10, 100, 3000):
        for fraction in np.linspace(0.0, 1.0, 21):
            x = fraction * lam / (c * d)
            assert p_lambda(d, x, lam) <= c_prime * p_lambda(d, alpha ** 0.25 * x, lam) * (1 + 1e-9) + 1e-300


@pytest.mark.parametrize("alpha", [1.1, 1.5, 2.0])
def test_level_decay_inequality_single_threshold(alpha):
    c = alpha
    c_prime = decay_factor(1, alpha)
    assert c_prime < 1
    for d in (1, 2, 5, 50, 5000):
        for fraction in np.linspace(0.0, 1.0, 21):
            x = fraction / (c * d)
            assert p_lambda(d, x, 1) <= c_prime * p_lambda(d, alpha ** 0.25 * x, 1) * (1 + 1e-9) + 1e-300


def test_poisson_limit():
    assert p_lambda_poisson_limit(1, 1) == pytest.approx(1 - math.exp(-1))
    assert p_lambda_poisson_limit(1, 1e12) < 1e-11
    assert abs(p_lambda(10 ** 6, 2 / (2 * 10 ** 6), 2) - p_lambda_poisson_limit(2, 2)) < 1e-5
    for lam, c in [(1, 2.0), (3, 40.0), (5, 7.5)]:
        assert p_lambda(10 ** 7, lam / (c * 10 ** 7), lam) == pytest.approx(p_lambda_poisson_limit(lam, c), rel=1e-5)
