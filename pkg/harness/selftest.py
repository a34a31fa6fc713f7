"""
Exact small-instance certification suites behind `main.py selftest` and `main.py tails`.

Each check runs in-process and counts its failures; a run passes when
every check has none.
"""

import itertools
import math
from fractions import Fraction
from typing import Dict, Iterator, List, Sequence

import numpy as np
from icecream import ic
from pydantic import BaseModel, Field

from estimator import EstimatorConfig, calibrate, clamp_estimate, level_value, select_level
from lowerbound import (
    DiscreteDistribution,
    OutcomeRule,
    build_size_classes,
    coupling_tv_bound,
    distinguisher_advantage,
    optimal_rule,
    tv_distance,
)
from oracle.sampling import random_p_plan
from probability import (
    HypergeomParams,
    binomial_exact,
    chernoff_lower_tail_bound,
    ec_gap,
    markov_tail_bound,
    p_lambda,
)
from probability.hypergeom import support_pmf

from .streams import derive_stream

ic.configureOutput(prefix='[HARNESS] ')

SELFTEST_TAIL_N_MAX = 60
SELFTEST_COUPLING_INSTANCES = 50
EC_C_VALUES = (1.0, 1.5, 2.0, 5.0, 10.0)
EC_X_MAX_EXPONENT = 20
EC_SLACK = 1e-12


class CheckResult(BaseModel):
    check: str
    instances: int = Field(ge=0)
    failures: int = Field(ge=0)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def row(self) -> Dict[str, object]:
        return {"check": self.check, "instances": self.instances, "failures": self.failures, "passed": self.passed}


# ============================================================================
# TAIL CERTIFICATES
# ============================================================================

def _suffix_counts(n: int, k: int, s: int) -> List[int]:
    """Numerators of Pr(H >= r) over C(n, s), for r = 0..s+1."""
    counts = [binomial_exact(k, r) * binomial_exact(n - k, s - r) for r in range(s + 1)]
    suffix = [0] * (s + 2)
    for r in range(s, -1, -1):
        suffix[r] = suffix[r + 1] + counts[r]
    return suffix


def tail_certificates(n_max: int) -> Iterator[Dict[str, object]]:
    """
    Markov and Chernoff rows for every n <= n_max, every k and s.

    Markov: all integer γ in 1..s. Chernoff: ξ in {0, μ/4, μ/2, 3μ/4} when μ > 0.
    """
    for n in range(1, n_max + 1):
        for k in range(n + 1):
            for s in range(n + 1):
                params = HypergeomParams(n_total=n, marked=k, draw=s)
                total = binomial_exact(n, s)
                suffix = _suffix_counts(n, k, s)
                for gamma in range(1, s + 1):
                    yield {
                        "kind": "markov", "n": n, "k": k, "s": s, "param": gamma,
                        "exact": Fraction(suffix[gamma], total),
                        "bound": markov_tail_bound(params, gamma),
                        "holds": suffix[gamma] * gamma * n <= k * s * total,
                    }
                mu = k * s / n
                if mu == 0:
                    continue
                for xi in (0.0, mu / 4, mu / 2, 3 * mu / 4):
                    below = Fraction(total - suffix[math.floor(xi) + 1], total)
                    bound = chernoff_lower_tail_bound(params, xi)
                    yield {
                        "kind": "chernoff", "n": n, "k": k, "s": s, "param": xi,
                        "exact": below, "bound": bound, "holds": float(below) <= bound * (1 + EC_SLACK),
                    }


def ec_certificates(c_values: Sequence[float], x_max_exponent: int) -> Iterator[Dict[str, object]]:
    """e^{-1/c} - (1 - 1/(cx))^x against 5e^{-1/c}/(c²x) for x = 2, 4, …, 2^x_max_exponent (x goes in `n`)."""
    for c in c_values:
        for e in range(1, x_max_exponent + 1):
            x = 2 ** e
            gap, bound = ec_gap(c, x)
            yield {
                "kind": "ec", "n": x, "k": None, "s": None, "param": float(c),
                "exact": gap, "bound": bound, "holds": -EC_SLACK <= gap <= bound + EC_SLACK,
            }


# ============================================================================
# CHECKS
# ============================================================================

def check_pmf_normalisation(n_max: int = SELFTEST_TAIL_N_MAX) -> CheckResult:
    instances = failures = 0
    for n in range(1, n_max + 1):
        for k in range(n + 1):
            for s in range(n + 1):
                params = HypergeomParams(n_total=n, marked=k, draw=s)
                pmf = support_pmf(params, exact=True)
                mean = sum((r * p for r, p in pmf), Fraction(0))
                instances += 1
                failures += sum(p for _, p in pmf) != 1 or mean != params.mean
    return CheckResult(check="pmf-normalisation", instances=instances, failures=failures)


def check_tail_bounds(n_max: int = SELFTEST_TAIL_N_MAX) -> CheckResult:
    instances = failures = 0
    for row in tail_certificates(n_max):
        instances += 1
        failures += not row["holds"]
    return CheckResult(check="tail-bounds", instances=instances, failures=failures)


def check_ec_gap() -> CheckResult:
    rows = list(ec_certificates(EC_C_VALUES, EC_X_MAX_EXPONENT))
    return CheckResult(check="ec-gap", instances=len(rows), failures=sum(not r["holds"] for r in rows))


def check_coupling_inequality(master_seed: int, instances: int = SELFTEST_COUPLING_INSTANCES) -> CheckResult:
    """Exact induced TV against the per-query union bound on random small plans."""
    rng = derive_stream(master_seed, "selftest-coupling")
    failures = 0
    for _ in range(instances):
        n = int(rng.integers(9, 17))
        lam = int(rng.integers(1, 3))
        classes = build_size_classes(float(rng.choice([1.5, 2.0])), 1, n)
        plan = random_p_plan(n, lam, [(float(rng.uniform(0.05, 0.8)), int(rng.integers(1, 5)))], rng)
        failures += not coupling_tv_bound(plan, classes, n).holds()
    return CheckResult(check="coupling-inequality", instances=instances, failures=failures)


def _random_law(rng: np.random.Generator, outcomes: List[str]) -> DiscreteDistribution:
    weights = rng.integers(0, 6, size=len(outcomes)).tolist()
    weights[0] += 1
    total = sum(weights)
    return DiscreteDistribution(masses={w: Fraction(x, total) for w, x in zip(outcomes, weights) if x})


def check_rule_search(master_seed: int, per_size: int = 10) -> CheckResult:
    """Every rule on at most four outcomes has advantage <= TV, with equality at the optimum."""
    rng = derive_stream(master_seed, "selftest-rules")
    instances = failures = 0
    for size in range(1, 5):
        outcomes = [format(i, "02b") for i in range(size)]
        for _ in range(per_size):
            a, b = _random_law(rng, outcomes), _random_law(rng, outcomes)
            tv = tv_distance(a, b)
            best = max(
                distinguisher_advantage(OutcomeRule(choices=dict(zip(outcomes, bits))), a, b)
                for bits in itertools.product((0, 1), repeat=size)
            )
            instances += 1
            failures += best != tv or distinguisher_advantage(optimal_rule(a, b), a, b) != tv
    return CheckResult(check="rule-search", instances=instances, failures=failures)


def check_noiseless_decision(points: int = 40) -> CheckResult:
    """Exact level probabilities fed to the decision rule always give d <= D <= αd."""
    instances = failures = 0
    for lam in (1, 2, 3):
        for alpha in (1.5, 2.0, 4.0):
            pilot = EstimatorConfig(**{"n": 10 ** 6, "lambda": lam, "alpha": alpha, "L": lam, "U": 10 ** 6, "exact_fallback": False})
            lower = max(lam, calibrate(pilot).d_prime)
            cfg = EstimatorConfig(**{"n": lower * 2000, "lambda": lam, "alpha": alpha, "L": lower, "U": lower * 2000, "exact_fallback": False})
            constants = calibrate(cfg)
            for d in sorted({int(round(x)) for x in np.geomspace(cfg.lower, cfg.upper, points)}):
                i1 = select_level(constants, [p_lambda(d, p, lam) for p in constants.grid])
                instances += 1
                if i1 is None:
                    failures += 1
                    continue
                D = clamp_estimate(cfg, level_value(cfg, constants, i1))
                failures += not d <= D <= alpha * d
    return CheckResult(check="noiseless-decision", instances=instances, failures=failures)


def run_selftest(master_seed: int = 0) -> List[CheckResult]:
    """Run every check; the caller decides the exit code from `passed`."""
    results = [
        check_pmf_normalisation(),
        check_tail_bounds(),
        check_ec_gap(),
        check_coupling_inequality(master_seed),
        check_rule_search(master_seed),
        check_noiseless_decision(),
    ]
    ic("selftest", [(r.check, r.failures) for r in results])
    return results
