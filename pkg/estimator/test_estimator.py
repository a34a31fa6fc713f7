"""
Tests for the estimator package: calibration, plan construction, decision rule, gate, end-to-end runs.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from estimator import (
    CalibrationError,
    ConfigurationError,
    DecisionPath,
    Engine,
    EstimatorConfig,
    NoLevelFoundError,
    build_plan,
    calibrate,
    clamp_estimate,
    decide,
    estimate,
    gate_parameters,
    gate_small_d,
    level_value,
    query_scale_constant,
    run_trial,
    select_level,
)
from estimator import calibration
from harness.streams import derive_stream
from oracle import ResponseVector, evaluate_plan, uniform_defect_set
from probability import p_lambda, p_lambda_poisson_limit


def config(**kwargs):
    values = {"n": 10 ** 4, "lambda": 1, "alpha": 4.0, "L": 1, "U": 10 ** 4, "delta": 0.1}
    values.update(kwargs)
    return EstimatorConfig(**values)


# ============================================================================
# CONFIGURATION AND CALIBRATION
# ============================================================================

def test_config_rejects_broken_promise():
    with pytest.raises(ValidationError, match="L < U"):
        config(L=50, U=50)
    with pytest.raises(ValidationError, match="U <= n"):
        config(U=10 ** 5)
    with pytest.raises(ValidationError, match="lambda <= L"):
        config(**{"lambda": 3, "L": 2})
    with pytest.raises(ValidationError):
        config(delta=0.5)
    with pytest.raises(ValidationError):
        config(alpha=1.0)


def test_query_scale_constant_examples():
    assert query_scale_constant(1, 2.0) == (2.0, 2.0)
    c, alpha_eff = query_scale_constant(2, 2.0)
    assert c == pytest.approx(4 / (1 - 2 ** -0.25))
    assert alpha_eff == 2.0
    # α above 2 derives its constants from α_eff = 2
    assert query_scale_constant(3, 8.0) == query_scale_constant(3, 2.0)
    assert query_scale_constant(1, 1.5)[0] == 1.5
    assert p_lambda_poisson_limit(1, 1.0) == pytest.approx(1 - math.exp(-1))


def test_single_threshold_constants_at_alpha_four():
    constants = calibrate(config())
    assert constants.c == 2.0
    limit_gap = math.exp(-1 / (2 * math.sqrt(2))) - math.exp(-0.5)
    assert constants.delta_alpha == pytest.approx(0.9 * limit_gap, rel=1e-9)
    assert constants.d_prime == 16
    assert constants.reference == pytest.approx(1 - (31 / 32) ** 16)
    assert constants.limit == pytest.approx(1 - math.exp(-0.5))


@pytest.mark.parametrize("lam,alpha", [(1, 1.5), (1, 2.0), (2, 1.5), (2, 4.0), (3, 2.0)])
def test_calibration_invariants(lam, alpha):
    cfg = config(**{"lambda": lam, "alpha": alpha, "L": 4, "U": 4096, "n": 4096, "exact_fallback": False})
    constants = calibrate(cfg)
    c = constants.c
    assert c >= 1
    assert constants.delta_alpha > 0
    assert abs(constants.reference - constants.limit) <= constants.delta_alpha / 16
    grid = constants.grid
    assert all(0 < p <= 1 for p in grid)
    assert all(a < b for a, b in zip(grid, grid[1:]))
    assert grid[0] <= lam / (c * cfg.upper * alpha ** 0.25)
    assert grid[-1] >= min(1.0, lam * alpha ** 0.25 / (c * cfg.lower)) * (1 - 1e-12)
    assert constants.grid_scale == pytest.approx(lam / (c * cfg.upper))
    G = constants.levels - 1
    assert constants.t == math.ceil(128 / constants.delta_alpha ** 2 * math.log(4 * (G + 1) / cfg.delta))
    assert constants.total_queries == constants.t * (G + 1)
    assert constants.c_prime ** constants.decay_levels <= constants.delta_alpha / 32
    assert constants.decay_levels == 1 or constants.c_prime ** (constants.decay_levels - 1) > constants.delta_alpha / 32


@pytest.mark.parametrize("alpha", [1.5, 2.0, 4.0])
def test_level_count_formula(alpha):
    previous = None
    for U in (64, 128, 256, 512, 1024):
        cfg = config(alpha=alpha, L=4, U=U, n=U, exact_fallback=False)
        constants = calibrate(cfg)
        levels = constants.levels
        assert levels <= math.ceil(4 * math.log(U / 4) / math.log(alpha)) + 10
        if previous is not None:
            assert abs((levels - previous) - 4 * math.log(2) / math.log(alpha)) <= 1
        previous = levels


def test_repetition_override():
    constants = calibrate(config(L=16, repetitions=50))
    assert constants.t == 50
    assert constants.calibrated_t > 50
    assert constants.total_queries == 50 * constants.levels


def test_small_d_fallback_is_opt_in():
    cfg = config(n=512, L=1, U=512)
    assert not cfg.exact_fallback
    constants = calibrate(cfg)
    assert cfg.lower < constants.d_prime
    assert not constants.gate_enabled and constants.singleton_queries == 0
    assert constants.total_queries == constants.t * constants.levels

    gated = calibrate(config(n=512, L=1, U=512, exact_fallback=True))
    assert gated.gate_enabled
    assert gated.total_queries == gated.t * gated.levels + gated.gate_size + 512


def test_query_count_does_not_depend_on_d():
    cfg = config(n=512, L=1, U=512, repetitions=30)
    constants = calibrate(cfg)
    for d in (1, 5, 100, 512):
        result = run_trial(cfg, constants, d, derive_stream(2, f"count-{d}"))
        assert result.queries_used == 30 * constants.levels


def test_calibration_error_when_gap_vanishes(monkeypatch):
    monkeypatch.setattr(calibration, "matched_gap", lambda d, lam, c, a: 0.0)
    with pytest.raises(CalibrationError):
        calibrate(config())


def test_unsupported_small_d_regime():
    cfg = config(**{"lambda": 2, "L": 2})
    constants = calibrate(cfg)
    assert cfg.lower < constants.d_prime
    assert not constants.gate_enabled
    with pytest.raises(ConfigurationError):
        build_plan(cfg, constants, derive_stream(1, "unsupported"))
    with pytest.raises(ConfigurationError):
        run_trial(cfg, constants, 100, derive_stream(1, "unsupported-trial"))


# ============================================================================
# DECISION RULE
# ============================================================================

def test_decide_degenerate_responses():
    cfg = config(n=512, L=16, U=512, repetitions=3)
    plan = build_plan(cfg, calibrate(cfg), derive_stream(2, "degenerate"))
    q = plan.plan.num_queries
    with pytest.raises(NoLevelFoundError):
        decide(plan, ResponseVector(bits=np.zeros(q, dtype=np.uint8)))
    top = decide(plan, ResponseVector(bits=np.ones(q, dtype=np.uint8)))
    assert top.i1 == 0
    assert top.D == math.floor(cfg.alpha * cfg.upper)
    with pytest.raises(ValueError):
        decide(plan, ResponseVector(bits=np.ones(q - 1, dtype=np.uint8)))


def test_decision_threshold_is_strict():
    cfg = config(L=16, repetitions=1)
    constants = calibrate(cfg)
    at = [constants.decision_threshold] * constants.levels
    assert select_level(constants, at) is None
    above = list(at)
    above[3] = math.nextafter(constants.decision_threshold, 1.0)
    assert select_level(constants, above) == 3


def test_clamp_rounds_down_into_range():
    cfg = config(L=10, U=100, n=100)
    assert clamp_estimate(cfg, 3.2) == 10
    assert clamp_estimate(cfg, 57.99) == 57
    assert clamp_estimate(cfg, 1e9) == 400


@pytest.mark.parametrize("k", [10, 57, 399])
def test_clamp_half_way_rounds_down(k):
    cfg = config(L=10, U=100, n=100)
    assert clamp_estimate(cfg, k + 0.5) == k
    assert clamp_estimate(cfg, math.nextafter(k + 1.0, 0.0)) == k + 1
    assert clamp_estimate(cfg, k + 1.0) == k + 1


def _noiseless_config(lam, alpha):
    pilot = config(**{"lambda": lam, "alpha": alpha, "L": lam, "U": 10 ** 6, "n": 10 ** 6, "exact_fallback": False})
    lower = max(lam, calibrate(pilot).d_prime)
    upper = lower * 2000
    return config(**{"lambda": lam, "alpha": alpha, "L": lower, "U": upper, "n": upper, "exact_fallback": False})


@pytest.mark.parametrize("lam", [1, 2, 3])
@pytest.mark.parametrize("alpha", [1.5, 2.0, 4.0])
def test_noiseless_decision_contains_d(lam, alpha):
    cfg = _noiseless_config(lam, alpha)
    constants = calibrate(cfg)
    ds = sorted({int(round(x)) for x in np.geomspace(cfg.lower, cfg.upper, 200)})
    for d in ds:
        i1 = select_level(constants, (p_lambda(d, p, lam) for p in constants.grid))
        assert i1 is not None and i1 >= 1
        D = clamp_estimate(cfg, level_value(cfg, constants, i1))
        assert d <= D <= alpha * d, (d, i1, D)


@pytest.mark.parametrize("lam,alpha", [(1, 2.0), (2, 4.0), (3, 1.5)])
def test_scaling_d_by_grid_step_moves_selection_by_one(lam, alpha):
    pilot = config(**{"lambda": lam, "alpha": alpha, "L": lam, "U": 10 ** 6, "n": 10 ** 6})
    lower = max(lam, calibrate(pilot).d_prime)
    cfg = config(**{"lambda": lam, "alpha": alpha, "L": lower, "U": 10 ** 6, "n": 10 ** 6})
    constants = calibrate(cfg)
    threshold = constants.decision_threshold
    # rounding d·α^{1/4} to an integer moves P_λ by far less than this
    margin = constants.delta_alpha / 8
    checked = 0
    for d in np.geomspace(max(1000, 4 * lower), 10 ** 5, 60).astype(int):
        scaled = int(round(d * alpha ** 0.25))
        here = [p_lambda(int(d), p, lam) for p in constants.grid]
        there = [p_lambda(scaled, p, lam) for p in constants.grid]
        if any(abs(v - threshold) < margin for v in here + there):
            continue
        i1 = select_level(constants, here)
        assert i1 is not None and i1 >= 1
        assert select_level(constants, there) == i1 - 1, (d, scaled)
        checked += 1
    assert checked >= 10


# ============================================================================
# PLAN CONSTRUCTION
# ============================================================================

def test_plan_size_and_determinism():
    cfg = config(n=2048, L=1, U=2048, repetitions=20, exact_fallback=True)
    constants = calibrate(cfg)
    assert constants.gate_enabled
    plan = build_plan(cfg, constants, derive_stream(3, "plan"))
    expected = 20 * constants.levels + constants.gate_size + cfg.n
    assert plan.plan.num_queries == expected == constants.total_queries
    again = build_plan(cfg, constants, derive_stream(3, "plan"))
    assert again.plan == plan.plan
    other = build_plan(cfg, constants, derive_stream(4, "plan"))
    assert other.plan != plan.plan
    index = plan.level_index()
    assert index[0] == 0 and index[20 * constants.levels - 1] == constants.levels - 1
    assert index[20 * constants.levels] == -1 and index[-1] == -2


def test_level_query_sizes_follow_grid():
    cfg = config(n=4096, L=64, U=4096, repetitions=400)
    constants = calibrate(cfg)
    plan = build_plan(cfg, constants, derive_stream(5, "level-sizes"))
    sizes = plan.plan.sizes()[:constants.level_queries].reshape(constants.levels, constants.t)
    for p, row in zip(constants.grid, sizes):
        sigma = math.sqrt(cfg.n * p * (1 - p) / constants.t)
        assert abs(row.mean() - cfg.n * p) <= 4 * sigma + 1e-9


def test_plan_is_fixed_before_responses():
    cfg = config(n=512, L=16, U=512, repetitions=10)
    plan = build_plan(cfg, calibrate(cfg), derive_stream(6, "non-adaptive"))
    digest = plan.plan.digest()
    rng = derive_stream(6, "sets")
    for size in (20, 200):
        evaluate_plan(plan.plan, uniform_defect_set(cfg.n, size, rng))
        assert plan.plan.digest() == digest


# ============================================================================
# SMALL-D GATE
# ============================================================================

def test_gate_parameters_separate():
    constants = calibrate(config())
    p, size, threshold = gate_parameters(1, constants.c, constants.d_prime, 0.1)
    low = p_lambda(constants.d_prime, p, 1)
    high = p_lambda(2 * constants.d_prime, p, 1)
    assert high - low > 0
    assert low < threshold < high
    assert size == math.ceil(2 * math.log(30) / (high - low) ** 2)


@pytest.mark.parametrize("multiple,accept", [(1, True), (2, False)])
def test_gate_error_rates(multiple, accept):
    cfg = config(n=2000, U=2000)
    constants = calibrate(cfg)
    d = multiple * constants.d_prime
    runs = 300
    agree = 0
    for run in range(runs):
        rng = derive_stream(7, f"gate-{multiple}-{run}")
        plan, rule = gate_small_d(cfg, constants, rng)
        verdict = rule(evaluate_plan(plan, uniform_defect_set(cfg.n, d, rng)))
        agree += verdict == accept
    assert agree / runs >= 1 - cfg.delta / 3


# ============================================================================
# END TO END
# ============================================================================

def test_estimate_end_to_end_with_materialised_plans():
    cfg = config(n=512, L=16, U=256, repetitions=600)
    constants = calibrate(cfg)
    # d = 76 puts a grid level at 1.19 times the matched scale
    hits = 0
    for run in range(20):
        rng = derive_stream(8, f"estimate-{run}")
        defects = uniform_defect_set(cfg.n, 76, rng)
        result = estimate(cfg, defects, rng, constants=constants)
        assert result.queries_used == constants.total_queries
        assert not result.promise_unverified
        hits += result.contains(76, cfg.alpha)
    assert hits >= 18


def test_estimate_flags_promise_violation():
    cfg = config(n=512, L=16, U=256, repetitions=50)
    rng = derive_stream(9, "violation")
    result = estimate(cfg, uniform_defect_set(cfg.n, 300, rng), rng)
    assert result.promise_unverified


@pytest.mark.parametrize("engine", [Engine.PLAN, Engine.BINOMIAL, Engine.COUNTS])
def test_engines_agree_on_success(engine):
    cfg = config(n=512, L=16, U=256, repetitions=600)
    constants = calibrate(cfg)
    hits = sum(
        run_trial(cfg, constants, 76, derive_stream(10, f"{engine.value}-{run}"), engine).contains(76, cfg.alpha)
        for run in range(20)
    )
    assert hits >= 18


def test_gate_path_returns_exact_count():
    cfg = config(n=512, L=1, U=512, repetitions=30, exact_fallback=True)
    constants = calibrate(cfg)
    result = run_trial(cfg, constants, 3, derive_stream(11, "exact"), Engine.BINOMIAL)
    assert result.path == DecisionPath.EXACT
    assert result.D == 3 and result.i1 is None and result.gate_accepted


def test_success_rate_at_d_100():
    cfg = config()
    constants = calibrate(cfg)
    hits = sum(run_trial(cfg, constants, 100, derive_stream(12, f"trial-{k}")).contains(100, 4.0) for k in range(400))
    assert hits / 400 >= 0.85


@pytest.mark.parametrize("lam", [1, 2])
def test_success_rate_across_sizes(lam):
    if lam == 1:
        # sizes below d′ go through the small-d gate
        cfg = config(exact_fallback=True)
    else:
        cfg = config(**{"lambda": lam, "L": calibrate(config(**{"lambda": lam, "L": lam})).d_prime})
    constants = calibrate(cfg)
    for d in (1, 4, 16, 64, 256, 1024, 4096, 10 ** 4):
        if not cfg.lower <= d <= cfg.upper:
            continue
        results = [run_trial(cfg, constants, d, derive_stream(13, f"lam{lam}-d{d}-trial-{k}")) for k in range(400)]
        assert all(r.queries_used == constants.total_queries for r in results)
        assert sum(r.contains(d, cfg.alpha) for r in results) / 400 >= 0.85, d
