"""
Seed fixing: from a randomized estimator to one deterministic plan and parity rule.

Each candidate seed fixes a plan and a rule. Its success is the fraction
of trials, with B drawn from ½·even + ½·odd, in which the rule names B's
parity. The best seed is re-measured on fresh trials at four times the
budget before it is reported.

Author: Agent
Date: 2025-10-18
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, List, Optional, Tuple

import numpy as np
from icecream import ic
from pydantic import BaseModel, ConfigDict

from estimator import (
    CalibratedConstants,
    EstimatePlan,
    EstimatorConfig,
    build_plan,
    calibrate,
    check_supported,
    clamp_estimate,
    decide,
    level_value,
)
from harness.streams import derive_stream, stream_from_seed
from oracle.models import QueryPlan, ResponseVector
from oracle.sampling import evaluate_plan
from probability import p_lambda

from .distances import EstimateDistinguisher, estimator_as_distinguisher, guess_bit
from .hard_distributions import check_fits, sample_planted
from .models import DerandomizeResult, Parity, SizeClasses

ic.configureOutput(prefix='[LAB] ')

VALIDATION_FACTOR = 4

PlanGenerator = Callable[[int], Tuple[QueryPlan, Callable]]


class PlanDecision(BaseModel):
    """Estimate D of a sealed plan for its responses."""
    model_config = ConfigDict(frozen=True)

    plan: EstimatePlan

    def __call__(self, responses: ResponseVector) -> int:
        return decide(self.plan, responses).D


class EstimatorPlanGenerator(BaseModel):
    """seed -> (plan, parity rule) for the calibrated estimator; picklable for worker processes."""
    model_config = ConfigDict(frozen=True)

    config: EstimatorConfig
    constants: CalibratedConstants
    classes: SizeClasses

    @classmethod
    def from_config(cls, config: EstimatorConfig, classes: SizeClasses) -> 'EstimatorPlanGenerator':
        return cls(config=config, constants=calibrate(config), classes=classes)

    def __call__(self, seed: int) -> Tuple[QueryPlan, EstimateDistinguisher]:
        sealed = build_plan(self.config, self.constants, stream_from_seed(seed))
        return sealed.plan, estimator_as_distinguisher(PlanDecision(plan=sealed), self.classes)


def seed_success(plan_generator: PlanGenerator, classes: SizeClasses, n: int, seed: int, trials: int, label: str = "trials") -> float:
    """Fraction of `trials` mixture draws whose parity the seed's rule names correctly."""
    plan, rule = plan_generator(seed)
    rng = derive_stream(seed, label)
    hits = 0
    for _ in range(trials):
        parity = Parity.from_bit(int(rng.integers(2)))
        responses = evaluate_plan(plan, sample_planted(classes, parity, n, rng))
        hits += guess_bit(rule(responses)) == parity.bit
    return hits / trials


def _seed_success_task(args: tuple) -> Tuple[int, float]:
    index, plan_generator, classes, n, seed, trials = args
    return index, seed_success(plan_generator, classes, n, seed, trials)


def derandomize(
    plan_generator: PlanGenerator,
    classes: SizeClasses,
    n: int,
    seed_budget: int,
    trial_budget: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> DerandomizeResult:
    """
    Try `seed_budget` seeds with `trial_budget` trials each and keep the best.

    Seeds are scored in worker processes when workers > 1; the generator
    must then be picklable (EstimatorPlanGenerator is).
    """
    if seed_budget < 1 or trial_budget < 1:
        raise ValueError("seed and trial budgets must be positive")
    check_fits(classes, n)
    seeds = [int(s) for s in rng.integers(0, np.iinfo(np.int64).max, size=seed_budget)]

    successes: List[float] = [0.0] * seed_budget
    if workers > 1:
        tasks = [(i, plan_generator, classes, n, seed, trial_budget) for i, seed in enumerate(seeds)]
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_seed_success_task, task): task[0] for task in tasks}
            for future in as_completed(futures):
                index, success = future.result()
                successes[index] = success
    else:
        successes = [seed_success(plan_generator, classes, n, seed, trial_budget) for seed in seeds]

    best = max(range(seed_budget), key=lambda i: (successes[i], -i))
    best_seed = seeds[best]
    validated = seed_success(plan_generator, classes, n, best_seed, VALIDATION_FACTOR * trial_budget, label="validation")
    plan, rule = plan_generator(best_seed)
    ic("derandomize winner", best_seed, successes[best], validated)
    return DerandomizeResult(
        best_seed=best_seed,
        success=successes[best],
        validated_success=validated,
        seed_successes=list(zip(seeds, successes)),
        plan=plan,
        rule=rule,
    )


def mc_advantage(plan: QueryPlan, rule: Callable, classes: SizeClasses, n: int, samples: int, rng: np.random.Generator) -> Tuple[float, float]:
    """
    Monte Carlo Pr_even(rule = even) - Pr_odd(rule = even), half the samples per law.

    Returns:
        (advantage, standard error)
    """
    per_law = samples // 2
    if per_law < 1:
        raise ValueError(f"need at least 2 samples, got {samples}")
    rates = []
    for parity in (Parity.EVEN, Parity.ODD):
        zeros = sum(
            guess_bit(rule(evaluate_plan(plan, sample_planted(classes, parity, n, rng)))) == 0
            for _ in range(per_law)
        )
        rates.append(zeros / per_law)
    a, b = rates
    return float(a - b), float(np.sqrt((a * (1 - a) + b * (1 - b)) / per_law))


def counts_advantage(
    config: EstimatorConfig,
    classes: SizeClasses,
    samples: int,
    rng: np.random.Generator,
    constants: Optional[CalibratedConstants] = None,
) -> Tuple[float, float]:
    """
    Advantage of the randomized estimator as a parity distinguisher, with
    responses drawn by the counts engine.

    For a defect set of size d and a fresh plan, the hit count of level i is
    Binomial(t, P_λ(d, p_i)), so no plan is materialised and the calibrated t
    stays affordable. The value is the mean of the fixed-seed advantages, so
    some fixed seed attains at least it.

    Returns:
        (advantage, standard error)

    Raises:
        ConfigurationError: λ >= 2 with L < d′
        ClassSizeError: a class size exceeds n
    """
    per_law = samples // 2
    if per_law < 1:
        raise ValueError(f"need at least 2 samples, got {samples}")
    if constants is None:
        constants = calibrate(config)
    check_supported(config, constants)
    check_fits(classes, config.n)
    lam = constants.lambda_
    level_estimates = np.array(
        [clamp_estimate(config, level_value(config, constants, i)) for i in range(constants.levels)], dtype=np.int64)

    rates = []
    for parity in (Parity.EVEN, Parity.ODD):
        sizes = np.asarray(classes.sizes(parity), dtype=np.int64)
        hit_p = np.array([[p_lambda(int(s), p, lam) for p in constants.grid] for s in sizes])
        picked = rng.integers(len(sizes), size=per_law)
        frequencies = rng.binomial(constants.t, hit_p[picked]) / constants.t
        passed = frequencies > constants.decision_threshold
        found = passed.any(axis=1)
        D = level_estimates[passed.argmax(axis=1)]
        if constants.gate_enabled:
            gate_p = np.array([p_lambda(int(s), constants.gate_p, lam) for s in sizes])
            accepted = rng.binomial(constants.gate_size, gate_p[picked]) / constants.gate_size <= constants.gate_threshold
            exact = np.array([clamp_estimate(config, int(s)) for s in sizes], dtype=np.int64)
            D = np.where(accepted, exact[picked], D)
            found |= accepted
        # no passing level and out-of-window estimates both read as EVEN
        even_values = [int(v) for v in np.unique(D[found]) if (classes.parity_of(int(v)) or Parity.EVEN) is Parity.EVEN]
        guessed_even = ~found | np.isin(D, np.asarray(even_values, dtype=np.int64))
        rates.append(float(guessed_even.mean()))
    a, b = rates
    ic("counts advantage", constants.t, constants.total_queries, a - b)
    return float(a - b), float(np.sqrt((a * (1 - a) + b * (1 - b)) / per_law))
