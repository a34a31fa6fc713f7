"""
The non-adaptive α-estimator: plan construction, the small-d gate, the
decision rule and end-to-end runs.

Plan layout (all drawn before any response is read):

    level 0 … level G      t p_i-queries each
    gate                   gate_size p-queries at λ/(c d′)      (λ = 1, L < d′ only)
    singletons             {1}, …, {n}                          (same condition)

Decision: P̂_i is the hit frequency of level i; i1 is the first level with
P̂_i > reference - Δ/4, and D = λ/(c·p_{i1-1}) = U·α^{(G0-i1+1)/4}, clamped
to [L, αU] and rounded down. When the gate accepts, D is the exact count
of positive singletons.

Author: Agent
Date: 2025-10-18
"""

import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from icecream import ic
from pydantic import BaseModel, Field

from oracle.models import DefectSet, QueryPlan, ResponseVector
from oracle.sampling import evaluate_plan, random_p_plan, singleton_plan, uniform_defect_set, uniform_subset_indices
from probability import p_lambda

from .calibration import calibrate, check_supported, gate_parameters
from .models import (
    CalibratedConstants,
    DecisionPath,
    EstimatePlan,
    EstimateResult,
    EstimatorConfig,
    NoLevelFoundError,
)

ic.configureOutput(prefix='[ESTIMATOR] ')


class Engine(str, Enum):
    """How a simulated trial produces its responses."""
    PLAN = 'plan'            # materialise queries and a defect set, evaluate
    BINOMIAL = 'binomial'    # per-query bits: |Q ∩ B| ~ Binomial(d, p)
    COUNTS = 'counts'        # per-level hit counts ~ Binomial(t, P_λ(d, p_i))


# ============================================================================
# PLAN CONSTRUCTION
# ============================================================================

def layout(constants: CalibratedConstants) -> List[Tuple[float, int]]:
    """(p, count) blocks of p-queries in plan order, gate included."""
    blocks = [(p, constants.t) for p in constants.grid]
    if constants.gate_enabled:
        blocks.append((constants.gate_p, constants.gate_size))
    return blocks


def build_plan(config: EstimatorConfig, constants: CalibratedConstants, rng: np.random.Generator) -> EstimatePlan:
    """
    Draw the whole plan up front.

    Raises:
        ConfigurationError: λ >= 2 with L < d′
    """
    check_supported(config, constants)
    plan = random_p_plan(config.n, config.lambda_, layout(constants), rng)
    if constants.gate_enabled:
        plan = plan.concat(singleton_plan(config.n, config.lambda_))
    ic("plan sealed", plan.num_queries, plan.digest()[:12])
    return EstimatePlan(config=config, constants=constants, plan=plan)


class GateRule(BaseModel):
    """Accept (d <= d′ likely) iff the gate's hit frequency is at most `threshold`."""

    threshold: float = Field(description="Midpoint of P_λ(d′, p) and P_λ(2d′, p)")

    def __call__(self, responses: ResponseVector) -> bool:
        if len(responses) == 0:
            raise ValueError("gate rule needs at least one response")
        return float(responses.bits.mean()) <= self.threshold


def gate_small_d(config: EstimatorConfig, constants: CalibratedConstants, rng: np.random.Generator) -> Tuple[QueryPlan, GateRule]:
    """Stand-alone small-d gate: accepts if d <= d′ and rejects if d >= 2d′, each with error <= δ/3."""
    p, size, threshold = gate_parameters(config.lambda_, constants.c, constants.d_prime, config.delta)
    plan = random_p_plan(config.n, config.lambda_, [(p, size)], rng)
    return plan, GateRule(threshold=threshold)


# ============================================================================
# DECISION
# ============================================================================

def select_level(constants: CalibratedConstants, level_estimates: Sequence[float]) -> Optional[int]:
    """First i with P̂_i > reference - Δ/4 (strict), or None."""
    threshold = constants.decision_threshold
    for i, value in enumerate(level_estimates):
        if value > threshold:
            return i
    return None


def clamp_estimate(config: EstimatorConfig, value: float) -> int:
    """Clamp into [L, αU] and round down."""
    bounded = min(max(value, config.lower), config.alpha * config.upper)
    return int(math.floor(bounded + 1e-9))


def level_value(config: EstimatorConfig, constants: CalibratedConstants, i1: int) -> float:
    """λ/(c·p_{i1-1}) with the unclamped grid value, i.e. U·α^{(G0-i1+1)/4}."""
    return config.upper * config.alpha ** ((constants.slack_levels - i1 + 1) / 4)


def conclude(
    config: EstimatorConfig,
    constants: CalibratedConstants,
    level_estimates: Sequence[float],
    gate_frequency: Optional[float] = None,
    exact_count: Optional[int] = None,
) -> EstimateResult:
    """
    Turn level estimates (and the gate block, when present) into a result.

    Raises:
        NoLevelFoundError: the gate did not accept and no level passed
    """
    estimates = [float(v) for v in level_estimates]
    gate_accepted = None
    if constants.gate_enabled:
        if gate_frequency is None or exact_count is None:
            raise ValueError("gate responses are required when the gate is enabled")
        gate_accepted = gate_frequency <= constants.gate_threshold
        if gate_accepted:
            return EstimateResult(
                D=clamp_estimate(config, exact_count),
                queries_used=constants.total_queries,
                level_estimates=estimates,
                path=DecisionPath.EXACT,
                gate_accepted=True,
            )
    i1 = select_level(constants, estimates)
    if i1 is None:
        raise NoLevelFoundError(
            f"no level exceeded {constants.decision_threshold:.6g} (max estimate {max(estimates, default=0.0):.6g})")
    return EstimateResult(
        D=clamp_estimate(config, level_value(config, constants, i1)),
        i1=i1,
        queries_used=constants.total_queries,
        level_estimates=estimates,
        path=DecisionPath.LEVELS,
        gate_accepted=gate_accepted,
    )


def decide_responses(config: EstimatorConfig, constants: CalibratedConstants, responses: ResponseVector) -> EstimateResult:
    if len(responses) != constants.total_queries:
        raise ValueError(f"expected {constants.total_queries} responses, got {len(responses)}")
    bits = responses.bits
    per_level = bits[:constants.level_queries].reshape(constants.levels, constants.t)
    estimates = per_level.mean(axis=1)
    gate_frequency = exact_count = None
    if constants.gate_enabled:
        start = constants.level_queries
        gate_frequency = float(bits[start:start + constants.gate_size].mean())
        exact_count = int(bits[start + constants.gate_size:].sum())
    return conclude(config, constants, estimates, gate_frequency, exact_count)


def decide(plan: EstimatePlan, responses: ResponseVector) -> EstimateResult:
    """Algorithm output for the responses of a sealed plan."""
    return decide_responses(plan.config, plan.constants, responses)


# ============================================================================
# END TO END
# ============================================================================

def estimate(
    config: EstimatorConfig,
    defects: DefectSet,
    rng: np.random.Generator,
    constants: Optional[CalibratedConstants] = None,
) -> EstimateResult:
    """
    calibrate → build_plan → evaluate_plan → decide.

    The result is flagged `promise_unverified` when |defects| lies outside [L, U].
    """
    if constants is None:
        constants = calibrate(config)
    plan = build_plan(config, constants, rng)
    result = decide(plan, evaluate_plan(plan.plan, defects))
    if not config.lower <= defects.size <= config.upper:
        result = result.model_copy(update={'promise_unverified': True})
    return result


def simulate_responses(constants: CalibratedConstants, d: int, rng: np.random.Generator) -> ResponseVector:
    """
    Responses of a freshly drawn plan against some fixed set of d defectives,
    without materialising the plan.

    For a p-query, |Q ∩ B| ~ Binomial(d, p), independently across queries;
    singleton responses mark a uniform d-subset of [n].
    """
    lam = constants.lambda_
    chunks = [(rng.binomial(d, p, size=count) >= lam).astype(np.uint8) for p, count in layout(constants)]
    if constants.gate_enabled:
        marks = np.zeros(constants.singleton_queries, dtype=np.uint8)
        marks[uniform_subset_indices(constants.singleton_queries, d, rng) - 1] = 1
        chunks.append(marks)
    bits = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
    return ResponseVector(bits=bits)


def run_trial(
    config: EstimatorConfig,
    constants: CalibratedConstants,
    d: int,
    rng: np.random.Generator,
    engine: Engine = Engine.COUNTS,
) -> EstimateResult:
    """
    One simulated estimation run against d defectives.

    All engines give the same distribution of results; they differ only in
    what gets materialised.
    """
    check_supported(config, constants)
    engine = Engine(engine)
    if engine is Engine.PLAN:
        plan = build_plan(config, constants, rng)
        result = decide(plan, evaluate_plan(plan.plan, uniform_defect_set(config.n, d, rng)))
    elif engine is Engine.BINOMIAL:
        result = decide_responses(config, constants, simulate_responses(constants, d, rng))
    else:
        lam = constants.lambda_
        hits = rng.binomial(constants.t, [p_lambda(d, p, lam) for p in constants.grid])
        estimates = np.asarray(hits, dtype=np.float64) / constants.t
        gate_frequency = exact_count = None
        if constants.gate_enabled:
            gate_hits = rng.binomial(constants.gate_size, p_lambda(d, constants.gate_p, lam))
            gate_frequency = float(gate_hits) / constants.gate_size
            exact_count = d
        result = conclude(config, constants, estimates, gate_frequency, exact_count)
    if not config.lower <= d <= config.upper:
        result = result.model_copy(update={'promise_unverified': True})
    return result
