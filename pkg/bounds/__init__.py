from .base import (
    BaseBound,
    BoundError,
    BoundOptions,
    LowerBoundOpts,
    LowerBoundResult,
    MeanFieldState,
    UpperBoundResult,
    VariationalState,
)
from .exact import (
    EnumerationLimitError,
    MarginalResult,
    ZeroProbabilityError,
    exact_log_marginal,
    kl_q_to_posterior,
    posterior_marginals,
    sigma_std,
)
from .lower import (
    MeanFieldLowerBound,
    entropy_q,
    lb_noisy_or_eval_quadratic,
    lb_noisy_or_eval_simple,
    lb_optimize,
    lb_sigmoid_eval,
)
from .upper import (
    NoisyOrUpperBound,
    SigmoidUpperBound,
    ub_noisy_or_eval,
    ub_noisy_or_log_eval,
    ub_noisy_or_optimize,
    ub_sigmoid_eval,
    ub_sigmoid_log_eval,
    ub_sigmoid_optimize,
    upper_bound_for,
)

__all__ = [
    "BaseBound",
    "BoundError",
    "BoundOptions",
    "EnumerationLimitError",
    "LowerBoundOpts",
    "LowerBoundResult",
    "MarginalResult",
    "MeanFieldLowerBound",
    "MeanFieldState",
    "NoisyOrUpperBound",
    "SigmoidUpperBound",
    "UpperBoundResult",
    "VariationalState",
    "ZeroProbabilityError",
    "entropy_q",
    "exact_log_marginal",
    "kl_q_to_posterior",
    "lb_noisy_or_eval_quadratic",
    "lb_noisy_or_eval_simple",
    "lb_optimize",
    "lb_sigmoid_eval",
    "posterior_marginals",
    "sigma_std",
    "ub_noisy_or_eval",
    "ub_noisy_or_log_eval",
    "ub_noisy_or_optimize",
    "ub_sigmoid_eval",
    "ub_sigmoid_log_eval",
    "ub_sigmoid_optimize",
    "upper_bound_for",
]
