from .models import (
    BucketReport,
    BucketSums,
    BudgetExceededError,
    ClassSizeError,
    CouplingBound,
    CouplingSample,
    DerandomizeResult,
    Disagreement,
    DiscreteDistribution,
    InducedMode,
    NoClassesError,
    Parity,
    PushforwardReport,
    ScalingRow,
    SizeClasses,
)
from .hard_distributions import build_size_classes, check_fits, sample_coupling, sample_planted
from .disagreement import (
    bucket_decomposition,
    coupling_disagreement_frequencies,
    exact_disagreement,
    level_average,
    m_star,
    measure_scaling,
)
from .distances import (
    EstimateDistinguisher,
    OutcomeRule,
    distinguisher_advantage,
    estimator_as_distinguisher,
    guess_bit,
    optimal_rule,
    tv_distance,
    tv_distance_by_events,
)
from .induced import (
    coupling_pushforward_check,
    coupling_tv_bound,
    exact_induced,
    induced_distribution,
    sampled_induced,
)
from .derandomize import EstimatorPlanGenerator, PlanDecision, counts_advantage, derandomize, mc_advantage, seed_success
