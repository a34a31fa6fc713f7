"""
Closed-form tail bounds used by the estimator and the lower-bound proofs.

- markov_tail_bound:                Pr(H >= γ) <= ks/(γn)
- chernoff_lower_tail_bound:        Pr(H <= ξ) <= exp(-(μ-ξ)²/(2μ)), μ = ks/n
- empirical_mean_upper_tail_bound:  Pr(mean of t Bernoullis >= Γ) <= (eμ/Γ)^{Γt}
- ec_gap:                           0 <= e^{-1/c} - (1 - 1/(cx))^x <= A/x, A = 5e^{-1/c}/c²
"""

import math
from typing import Tuple

from .hypergeom import HypergeomParams


def markov_tail_bound(params: HypergeomParams, gamma: float) -> float:
    """Markov's inequality for H_{n,k,s}: ks/(γn)."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return params.marked * params.draw / (gamma * params.n_total)


def chernoff_lower_tail_bound(params: HypergeomParams, xi: float) -> float:
    """
    Chernoff-type lower tail for H_{n,k,s}.

    Raises:
        ValueError: if xi is not below the mean ks/n
    """
    mu = params.marked * params.draw / params.n_total
    if xi >= mu:
        raise ValueError(f"xi={xi} must be below the mean {mu}")
    if mu == 0:
        # xi < 0 here, and H >= 0
        return 0.0
    return math.exp(-((mu - xi) ** 2) / (2 * mu))


def empirical_mean_upper_tail_bound(mu: float, Gamma: float, t: int, sharp: bool = False) -> float:
    """
    Upper tail of an average of t independent 0/1 variables with mean <= mu.

    Args:
        mu: Upper bound on the mean, 0 < mu
        Gamma: Level, Gamma >= mu
        t: Number of variables averaged
        sharp: Return (e^{1-mu/Γ} mu/Γ)^{Γt} instead of (e mu/Γ)^{Γt}

    Returns:
        The bound, which may exceed 1 (vacuous) and is returned as is
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if Gamma < mu:
        raise ValueError(f"Gamma={Gamma} must be at least mu={mu}")
    if t < 1:
        raise ValueError(f"t must be at least 1, got {t}")
    ratio = mu / Gamma
    base = math.exp(1 - ratio) * ratio if sharp else math.e * ratio
    return base ** (Gamma * t)


def ec_gap(c: float, x: float) -> Tuple[float, float]:
    """
    Gap between e^{-1/c} and (1 - 1/(cx))^x, with its A/x bound.

    The gap is evaluated as -e^{-1/c}·expm1(y) where
    y = x·log(1 - u) + 1/c = -x·Σ_{i>=2} u^i/i and u = 1/(cx), so it never
    goes negative through cancellation.

    Returns:
        (gap, bound) with bound = 5e^{-1/c}/(c² x)
    """
    if c < 1:
        raise ValueError(f"c must be at least 1, got {c}")
    if x < 2:
        raise ValueError(f"x must be at least 2, got {x}")
    u = 1.0 / (c * x)
    terms = []
    power = u * u
    i = 2
    while True:
        term = power / i
        terms.append(term)
        if term < 1e-20 * terms[0]:
            break
        power *= u
        i += 1
    y = -x * math.fsum(terms)
    gap = -math.exp(-1.0 / c) * math.expm1(y)
    bound = 5.0 * math.exp(-1.0 / c) / (c * c) / x
    return gap, bound
