from .models import (
    CalibratedConstants,
    CalibrationError,
    ConfigurationError,
    DecisionPath,
    EstimatePlan,
    EstimateResult,
    EstimatorConfig,
    NoLevelFoundError,
)
from .calibration import calibrate, check_supported, gate_parameters, matched_gap, query_scale_constant
from .algorithm import (
    Engine,
    GateRule,
    build_plan,
    clamp_estimate,
    conclude,
    decide,
    decide_responses,
    estimate,
    gate_small_d,
    layout,
    level_value,
    run_trial,
    select_level,
    simulate_responses,
)
