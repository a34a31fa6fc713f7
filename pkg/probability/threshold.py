"""
Hit probability of a λ-threshold p-query.

P_λ(d, p) = Pr[Bin(d, p) >= λ] is the chance that a query including each
item independently with probability p contains at least λ of d defectives.
"""

import math
from typing import List

from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp
from scipy.stats import poisson

from .hypergeom import log_binomial

# Relative size below which upper-tail terms stop contributing
_TAIL_EPS = 1e-18


class ThresholdHitProbability(BaseModel):
    """P_λ(d, p) as a value object."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    d: int = Field(ge=0, description="Number of defective items")
    p: float = Field(ge=0.0, le=1.0, description="Per-item inclusion probability")
    lambda_: int = Field(ge=1, alias='lambda', description="Threshold λ")

    @property
    def value(self) -> float:
        return p_lambda(self.d, self.p, self.lambda_)


def _log_term(d: int, i: int, log_p: float, log_q: float) -> float:
    return log_binomial(d, i) + i * log_p + (d - i) * log_q


def p_lambda(d: int, p: float, lam: int) -> float:
    """
    Σ_{i=λ}^{d} C(d,i) p^i (1-p)^{d-i}.

    λ = 1 uses 1-(1-p)^d through expm1/log1p. Otherwise the short side is
    summed: the upper tail directly while the mean dp sits below λ (terms
    decay geometrically past the mode), else 1 minus the λ lower terms.
    """
    if d < 0 or lam < 1 or not 0.0 <= p <= 1.0:
        raise ValueError(f"invalid arguments d={d}, p={p}, lambda={lam}")
    if lam > d or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    log_q = math.log1p(-p)
    if lam == 1:
        return -math.expm1(d * log_q)
    log_p = math.log(p)
    if d * p < lam:
        terms: List[float] = []
        for i in range(lam, d + 1):
            term = math.exp(_log_term(d, i, log_p, log_q))
            terms.append(term)
            if term < _TAIL_EPS * terms[0] or term == 0.0:
                break
        return min(1.0, math.fsum(terms))
    log_lower = logsumexp([_log_term(d, i, log_p, log_q) for i in range(lam)])
    return max(0.0, -math.expm1(float(log_lower)))


def p_lambda_poisson_limit(lam: int, c: float) -> float:
    """
    lim_{x→∞} P_λ(x, λ/(cx)) = 1 - Σ_{i<λ} (λ/c)^i e^{-λ/c} / i!.
    """
    if lam < 1 or c <= 0:
        raise ValueError(f"invalid arguments lambda={lam}, c={c}")
    mu = lam / c
    if lam == 1:
        return -math.expm1(-mu)
    return float(poisson.sf(lam - 1, mu))


def decay_factor(lam: int, alpha: float) -> float:
    """
    Level-decay constant c′ below the matched scale.

    For λ >= 2, P_λ(d,x) <= c′·P_λ(d, α^{1/4}x) with c′ = 1/α^{(λ-1)/4} once
    x <= λ/(cd). For λ = 1 (c = α) the ratio P(d,x)/P(d,α^{1/4}x) grows with
    both x and d, so c′ is its large-d value at x = 1/(cd):
    (1 - e^{-1/c}) / (1 - e^{-α^{1/4}/c}).
    α is capped at 2, where the constants are derived.
    """
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    a = min(alpha, 2.0)
    if lam == 1:
        return math.expm1(-1.0 / a) / math.expm1(-(a ** 0.25) / a)
    return 1.0 / a ** ((lam - 1) / 4)
