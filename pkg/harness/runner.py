"""
Command dispatch: ExperimentConfig in, RunRecord and exit code out.

Exit codes:
    0  success
    2  configuration error (invalid parameters, unsupported regime, class size above n)
    3  algorithmic failure signal (no size classes, no level found, calibration, budget)

Author: Agent
Date: 2025-10-18
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

from icecream import ic
from pydantic import BaseModel, ConfigDict
from rich.console import Console
from rich.progress import track

from estimator import (
    CalibrationError,
    ConfigurationError,
    Engine,
    EstimatorConfig,
    CalibratedConstants,
    NoLevelFoundError,
    calibrate,
    check_supported,
    estimate,
    run_trial,
)
from lowerbound import (
    BudgetExceededError,
    ClassSizeError,
    EstimatorPlanGenerator,
    NoClassesError,
    bucket_decomposition,
    build_size_classes,
    check_fits,
    coupling_pushforward_check,
    coupling_tv_bound,
    counts_advantage,
    derandomize,
    exact_disagreement,
    m_star,
    mc_advantage,
    measure_scaling,
)
from oracle.plan_io import read_defects, read_plan
from oracle.sampling import random_p_plan

from .config import (
    BucketsParams,
    CalibrateParams,
    ClassesParams,
    Command,
    DerandomizeParams,
    DisagreementParams,
    EstimateParams,
    ExperimentConfig,
    ScalingParams,
    TailsParams,
    TVParams,
)
from .records import RunRecord, summarize
from .selftest import ec_certificates, run_selftest, tail_certificates
from .streams import derive_seed, derive_stream, stream_from_seed

ic.configureOutput(prefix='[HARNESS] ')

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

FAILURE_ERRORS = (NoClassesError, NoLevelFoundError, CalibrationError, BudgetExceededError)

STATUS = Console(stderr=True)


class RunOutcome(BaseModel):
    """Record (absent when the command failed) plus exit code and error message."""
    model_config = ConfigDict(frozen=True)

    record: Optional[RunRecord] = None
    exit_code: int = EXIT_OK
    error: Optional[str] = None


# ============================================================================
# ESTIMATOR COMMANDS
# ============================================================================

def _constants_row(config: EstimatorConfig, c: CalibratedConstants) -> Dict[str, object]:
    return {
        "lambda": c.lambda_, "alpha": c.alpha, "alpha_eff": c.alpha_eff, "c": c.c, "c_prime": c.c_prime,
        "decay_levels": c.decay_levels, "delta_alpha": c.delta_alpha, "d_prime": c.d_prime,
        "reference": c.reference, "limit": c.limit, "levels": c.levels, "t": c.t, "calibrated_t": c.calibrated_t,
        "gate_size": c.gate_size, "gate_p": c.gate_p, "gate_threshold": c.gate_threshold,
        "total_queries": c.total_queries,
    }


def _run_calibrate(params: CalibrateParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    cfg = params.estimator_config()
    constants = calibrate(cfg)
    return {"grid": constants.grid, "decision_threshold": constants.decision_threshold}, [_constants_row(cfg, constants)]


def _estimate_trial(args: tuple) -> Dict[str, object]:
    """One seeded trial; module level so worker processes can run it."""
    cfg, constants, d, engine, master_seed, index = args
    seed = derive_seed(master_seed, f"trial-{index}")
    row: Dict[str, object] = {"trial": index, "seed": seed, "d": d}
    try:
        result = run_trial(cfg, constants, d, stream_from_seed(seed), engine)
    except NoLevelFoundError:
        row.update(success=0, queries=constants.total_queries, error="no_level")
        return row
    row.update(
        D=result.D, i1=result.i1, path=result.path, success=int(result.contains(d, cfg.alpha)),
        queries=result.queries_used, promise_unverified=result.promise_unverified,
    )
    return row


def _run_estimate(params: EstimateParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    cfg = params.estimator_config()
    constants = calibrate(cfg)
    check_supported(cfg, constants)
    constants_out = {"total_queries": constants.total_queries, "d_prime": constants.d_prime, "t": constants.t}

    if params.defects is not None:
        defects = read_defects(params.defects)
        if defects.universe_size != cfg.n:
            raise ValueError(f"defect file universe {defects.universe_size} does not match n={cfg.n}")
        seed = derive_seed(config.master_seed, "estimate")
        result = estimate(cfg, defects, stream_from_seed(seed), constants)
        d = defects.size
        return constants_out, [{
            "trial": 0, "seed": seed, "d": d, "D": result.D, "i1": result.i1, "path": result.path,
            "success": int(result.contains(d, cfg.alpha)), "queries": result.queries_used,
            "promise_unverified": result.promise_unverified,
        }]

    tasks = [(cfg, constants, params.d, params.engine, config.master_seed, i) for i in range(params.trials)]
    if config.workers > 1 and params.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            rows = list(executor.map(_estimate_trial, tasks, chunksize=max(1, params.trials // (4 * config.workers))))
    else:
        rows = [_estimate_trial(task) for task in track(tasks, description="trials", console=STATUS, transient=True, disable=not config.progress)]
    return constants_out, rows


# ============================================================================
# LOWER-BOUND COMMANDS
# ============================================================================

def _run_build_classes(params: ClassesParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    classes = build_size_classes(params.alpha, params.L, params.U)
    parity_level = {s: j for j in range(1, classes.m + 1) for s in classes.level_sizes(j)}
    rows = [
        {"j": parity_level[low], "parity": parity, "size": low, "window_low": low, "window_high": high}
        for low, high, parity in classes.windows()
    ]
    return {"beta": classes.beta, "m": classes.m}, rows


def _run_disagreement(params: DisagreementParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    classes = build_size_classes(params.alpha, params.L, params.U)
    check_fits(classes, params.n)
    rows = []
    for k in params.k:
        for j in range(1, classes.m + 1):
            term = exact_disagreement(k, j, classes, params.n, params.lambda_, exact=params.exact)
            even, odd = classes.level_sizes(j)
            rows.append({"k": k, "j": j, "even_size": even, "odd_size": odd, "p1": term.p1, "p2": term.p2, "total": term.total})
    return {"beta": classes.beta, "m": classes.m}, rows


def _run_buckets(params: BucketsParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    classes = build_size_classes(params.alpha, params.L, params.U)
    check_fits(classes, params.n)
    rows = []
    for k in params.k:
        r = bucket_decomposition(k, classes, params.n, params.lambda_, exact=params.exact)
        rows.append({
            "k": k, "m_star": m_star(k, classes, params.n, params.lambda_),
            "low_p1": r.p1.low, "mid_p1": r.p1.mid, "high_p1": r.p1.high,
            "low_p2": r.p2.low, "mid_p2": r.p2.mid, "high_p2": r.p2.high,
            "low_bound": r.low_bound, "mid_bound": r.mid_bound, "high_bound": r.high_bound,
            "total": r.total, "holds": r.holds(),
        })
    return {"beta": classes.beta, "m": classes.m}, rows


def _run_tv(params: TVParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    classes = build_size_classes(params.alpha, params.L, params.U)
    check_fits(classes, params.n)
    fixed_plan = read_plan(params.plan) if params.plan is not None else None
    instances = 1 if fixed_plan is not None else params.instances
    rows = []
    for i in range(instances):
        plan = fixed_plan if fixed_plan is not None else random_p_plan(
            params.n, params.lambda_, [(params.p, params.q)], derive_stream(config.master_seed, f"plan-{i}"))
        bound = coupling_tv_bound(
            plan, classes, params.n, params.mode, params.samples, derive_stream(config.master_seed, f"induced-{i}"))
        row = {
            "instance": i, "q": plan.num_queries, "digest": plan.digest()[:16],
            "tv_upper": bound.tv_upper, "induced_tv": bound.induced_tv, "holds": bound.holds(),
        }
        if params.pushforward_samples:
            report = coupling_pushforward_check(
                plan, classes, params.n, params.pushforward_samples, derive_stream(config.master_seed, f"pushforward-{i}"))
            row.update(max_discrepancy=report.max_discrepancy, max_z=report.max_z)
        rows.append(row)
    return {"beta": classes.beta, "m": classes.m}, rows


def _run_derandomize(params: DerandomizeParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    cfg = params.estimator_config()
    classes = build_size_classes(cfg.alpha, cfg.lower, cfg.upper)
    generator = EstimatorPlanGenerator.from_config(cfg, classes)
    check_supported(cfg, generator.constants)
    result = derandomize(
        generator, classes, cfg.n, params.seeds, params.trials,
        derive_stream(config.master_seed, "seeds"), workers=config.workers,
    )
    advantage, se = mc_advantage(
        result.plan, result.rule, classes, cfg.n, params.samples, derive_stream(config.master_seed, "advantage"))
    # the same estimator at its calibrated t, through the counts engine
    calibrated_cfg = cfg.model_copy(update={'repetitions': None})
    calibrated = calibrate(calibrated_cfg)
    calibrated_advantage, calibrated_se = counts_advantage(
        calibrated_cfg, classes, params.samples, derive_stream(config.master_seed, "calibrated-advantage"), calibrated)
    rows = [
        {"candidate": i, "seed": seed, "success": success, "best": seed == result.best_seed}
        for i, (seed, success) in enumerate(result.seed_successes)
    ]
    constants = {
        "best_seed": result.best_seed, "success": result.success, "validated_success": result.validated_success,
        "advantage": advantage, "advantage_se": se, "queries": result.plan.num_queries, "m": classes.m,
        "calibrated_t": calibrated.t, "calibrated_queries": calibrated.total_queries,
        "calibrated_advantage": calibrated_advantage, "calibrated_advantage_se": calibrated_se,
    }
    return constants, rows


def _run_scaling(params: ScalingParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    rows = [
        {"U": r.upper, "m": r.m, "k": r.k, "per_query": r.per_query, "scaled": r.scaled, "bound": r.bound}
        for r in measure_scaling(params.k_fraction, params.alpha, params.L, params.n, params.lambda_, params.U_values)
    ]
    return {}, rows


# ============================================================================
# CERTIFICATION COMMANDS
# ============================================================================

def _run_tails(params: TailsParams, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    rows = list(tail_certificates(params.n_max)) + list(ec_certificates(params.c_values, params.x_max_exponent))
    return {}, rows


def _run_selftest(params, config: ExperimentConfig) -> Tuple[Dict, List[Dict]]:
    return {}, [result.row() for result in run_selftest(config.master_seed)]


HANDLERS: Dict[Command, Callable] = {
    Command.CALIBRATE: _run_calibrate,
    Command.ESTIMATE: _run_estimate,
    Command.LB_BUILD_CLASSES: _run_build_classes,
    Command.LB_DISAGREEMENT: _run_disagreement,
    Command.LB_BUCKETS: _run_buckets,
    Command.LB_TV: _run_tv,
    Command.LB_DERANDOMIZE: _run_derandomize,
    Command.LB_SCALING: _run_scaling,
    Command.TAILS: _run_tails,
    Command.SELFTEST: _run_selftest,
}


# ============================================================================
# ENTRY POINT
# ============================================================================

def execute(config: ExperimentConfig) -> RunRecord:
    """
    Run the configured command and collect its record.

    Raises:
        Whatever the command raises; `run` maps errors to exit codes.
    """
    params = config.params()
    constants, rows = HANDLERS[config.command](params, config)
    ic("command finished", config.command.value, len(rows))
    return RunRecord(
        command=config.command,
        parameters=params.model_dump(by_alias=True),
        master_seed=config.master_seed,
        constants=constants,
        rows=rows,
        summary=summarize(config.command, rows),
    )


def exit_code_for(error: Exception) -> int:
    """Exit code of an error raised by a command; unknown errors are re-raised by `run`."""
    if isinstance(error, FAILURE_ERRORS):
        return EXIT_FAILURE
    if isinstance(error, (ConfigurationError, ClassSizeError, ValueError, FileNotFoundError)):
        return EXIT_CONFIG
    raise error


def run(config: ExperimentConfig) -> RunOutcome:
    """
    Dispatch to the command; a selftest with failed checks exits 3.
    """
    try:
        record = execute(config)
    except Exception as e:
        return RunOutcome(exit_code=exit_code_for(e), error=f"{type(e).__name__}: {e}")
    if config.command is Command.SELFTEST and record.summary.get("failed_checks", 0):
        return RunOutcome(record=record, exit_code=EXIT_FAILURE, error=f"{record.summary['failed_checks']} selftest check(s) failed")
    return RunOutcome(record=record)
