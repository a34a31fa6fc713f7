from .hypergeom import (
    HypergeomParams,
    binomial_exact,
    hypergeom_pmf,
    hypergeom_sample,
    hypergeom_tail_ge,
    hypergeom_tail_le,
    log_binomial,
)
from .bounds import (
    chernoff_lower_tail_bound,
    ec_gap,
    empirical_mean_upper_tail_bound,
    markov_tail_bound,
)
from .threshold import ThresholdHitProbability, decay_factor, p_lambda, p_lambda_poisson_limit
