"""
Constant calibration for the non-adaptive α-estimator.

All constants are derived from α_eff = min(α, 2):
- c        query scale; α_eff for λ = 1, 2λ/(1 - α_eff^{-1/4}) otherwise
- Δ        0.9 × min over d of P_λ(d, λ/(cd)) - P_λ(d, α_eff^{-1/2} λ/(cd)),
           scanned on d ∈ {d0, 2d0, …, 2^30 d0} plus the Poisson limit
- d′       first scanned d from which P_λ(d, λ/(cd)) stays within Δ/16 of its limit
- grid     p_i = λ α^{(i-G0)/4} / (cU), i = 0..G, with G0 = 8 slack levels
- t        ⌈128/Δ² · ln(4(G+1)/δ)⌉ repetitions per level

Author: Agent
Date: 2025-10-18
"""

import math
from typing import List, Tuple

from icecream import ic

from probability import decay_factor, ec_gap, p_lambda, p_lambda_poisson_limit

from .models import CalibratedConstants, CalibrationError, ConfigurationError, EstimatorConfig

ic.configureOutput(prefix='[ESTIMATOR] ')

SLACK_LEVELS = 8
SAFETY_FACTOR = 0.9
SCAN_DOUBLINGS = 30


def query_scale_constant(lam: int, alpha: float) -> Tuple[float, float]:
    """
    Returns:
        (c, alpha_eff)
    """
    if lam < 1:
        raise ValueError(f"lambda must be at least 1, got {lam}")
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    alpha_eff = min(alpha, 2.0)
    if lam == 1:
        return alpha_eff, alpha_eff
    return 2 * lam / (1 - alpha_eff ** -0.25), alpha_eff


def scan_points(lam: int) -> List[int]:
    d0 = max(2 * lam, 4)
    return [d0 * 2 ** j for j in range(SCAN_DOUBLINGS + 1)]


def matched_gap(d: int, lam: int, c: float, alpha_eff: float) -> float:
    """P_λ(d, λ/(cd)) - P_λ(d, α_eff^{-1/2} λ/(cd))."""
    p = lam / (c * d)
    return p_lambda(d, p, lam) - p_lambda(d, p / math.sqrt(alpha_eff), lam)


def gate_parameters(lam: int, c: float, d_prime: int, delta: float) -> Tuple[float, int, float]:
    """
    Small-d gate: p-queries at p = λ/(c d′) separating d <= d′ from d >= 2d′.

    The gate accepts when its hit frequency is at most the midpoint of
    P_λ(d′, p) and P_λ(2d′, p); Hoeffding with half-gap g/2 gives error
    exp(-t g²/2) <= δ/3 for t = ⌈2 ln(3/δ)/g²⌉.

    Returns:
        (p, number of gate queries, acceptance threshold)
    """
    p = lam / (c * d_prime)
    low = p_lambda(d_prime, p, lam)
    high = p_lambda(2 * d_prime, p, lam)
    separation = high - low
    if not separation > 0:
        raise CalibrationError(f"gate separation {separation} is not positive")
    size = math.ceil(2 * math.log(3 / delta) / separation ** 2)
    return p, size, (low + high) / 2


def _top_level(scale: float, alpha: float, target: float) -> int:
    """Smallest G >= G0 with the nominal p_G reaching target."""
    G = SLACK_LEVELS + max(0, math.ceil(4 * math.log(target / scale) / math.log(alpha) - 1e-9) - 1)
    while scale * alpha ** ((G - SLACK_LEVELS) / 4) < target * (1 - 1e-12):
        G += 1
    return G


def calibrate(config: EstimatorConfig) -> CalibratedConstants:
    """
    Derive every constant the estimator needs.

    Raises:
        CalibrationError: if Δ is not positive at floating-point precision or
            P_λ(d, λ/(cd)) never settles within Δ/16 of its limit on the scan
    """
    lam, alpha = config.lambda_, config.alpha
    c, alpha_eff = query_scale_constant(lam, alpha)

    # gap Δ
    points = scan_points(lam)
    limit = p_lambda_poisson_limit(lam, c)
    limit_gap = limit - p_lambda_poisson_limit(lam, c * math.sqrt(alpha_eff))
    gaps = [matched_gap(d, lam, c, alpha_eff) for d in points] + [limit_gap]
    delta_alpha = SAFETY_FACTOR * min(gaps)
    if not math.isfinite(delta_alpha) or delta_alpha <= 0:
        raise CalibrationError(f"gap Δ={delta_alpha} is not positive for lambda={lam}, alpha={alpha}")

    # cutoff d′
    tolerance = delta_alpha / 16
    values = [p_lambda(d, lam / (c * d), lam) for d in points]
    if lam == 1 and ec_gap(c, points[-1])[1] > tolerance:
        raise CalibrationError(f"tail beyond d={points[-1]} is not within Δ/16 of the limit")
    first = len(points)
    for j in range(len(points) - 1, -1, -1):
        if abs(values[j] - limit) > tolerance:
            break
        first = j
    if first == len(points):
        raise CalibrationError(f"P_lambda(d, lambda/(cd)) stays farther than Δ/16 from its limit up to d={points[-1]}")
    d_prime = points[first]
    reference = values[first]

    # probability grid
    scale = lam / (c * config.upper)
    target = min(1.0, lam * alpha ** 0.25 / (c * config.lower))
    G = _top_level(scale, alpha, target)
    grid = [min(1.0, scale * alpha ** ((i - SLACK_LEVELS) / 4)) for i in range(G + 1)]

    calibrated_t = math.ceil(128 / delta_alpha ** 2 * math.log(4 * (G + 1) / config.delta))
    t = config.repetitions or calibrated_t

    c_prime = decay_factor(lam, alpha)
    decay_levels = max(1, math.ceil(math.log(delta_alpha / 32) / math.log(c_prime)))

    gate = {}
    if lam == 1 and config.exact_fallback and config.lower < d_prime:
        gate_p, gate_size, gate_threshold = gate_parameters(lam, c, d_prime, config.delta)
        gate = dict(gate_p=gate_p, gate_size=gate_size, gate_threshold=gate_threshold, singleton_queries=config.n)

    constants = CalibratedConstants(
        lambda_=lam,
        alpha=alpha,
        alpha_eff=alpha_eff,
        c=c,
        c_prime=c_prime,
        decay_levels=decay_levels,
        delta_alpha=delta_alpha,
        d_prime=d_prime,
        reference=reference,
        limit=limit,
        slack_levels=SLACK_LEVELS,
        grid=grid,
        grid_scale=scale,
        t=t,
        calibrated_t=calibrated_t,
        **gate,
    )
    ic("calibrated", lam, alpha, c, delta_alpha, d_prime, G + 1, t, constants.total_queries)
    return constants


def check_supported(config: EstimatorConfig, constants: CalibratedConstants) -> None:
    """
    Raises:
        ConfigurationError: λ >= 2 with L < d′ (no small-d fallback exists there)
    """
    if config.lower < constants.d_prime and not constants.gate_enabled and config.lambda_ >= 2:
        raise ConfigurationError(
            f"lambda={config.lambda_} requires L >= d'={constants.d_prime}, got L={config.lower}")
