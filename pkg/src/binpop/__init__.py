"""binpop: Bayesian estimation of the binomial population size n when the
success probability p is unknown.

Core pieces: an exact log-domain beta-binomial likelihood, the normalized
marginal posterior over n with adaptive tail truncation, the scale / DGE /
Raftery / MAP estimator family, a seeded Monte Carlo harness, an empirical
posterior-contraction laboratory, a numeric inequality-check suite, and a
fluorophore-counting pipeline with exponential bleaching.
"""

__version__ = "0.1.0"

from .core import (
    BetaPrior,
    InadmissiblePriorError,
    NPrior,
    PoissonPrior,
    PosteriorN,
    PowerLawPrior,
    PriorSupportError,
    Sample,
    TablePrior,
    TruncatedPowerLawPrior,
    TruncationError,
    TruncationPolicy,
    UniformRangePrior,
    log_beta_binomial_likelihood,
    posterior_miss_mass,
    posterior_n,
)
from .estimators import (
    EstimateResult,
    EstimatorSpec,
    b_from_p_hat,
    dge_estimate,
    map_estimate,
    posterior_summaries,
    sample_max,
    scale_estimate,
)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "BetaPrior",
    "EstimateResult",
    "EstimatorSpec",
    "InadmissiblePriorError",
    "KERNEL_BACKEND",
    "NPrior",
    "PoissonPrior",
    "PosteriorN",
    "PowerLawPrior",
    "PriorSupportError",
    "Sample",
    "TablePrior",
    "TruncatedPowerLawPrior",
    "TruncationError",
    "TruncationPolicy",
    "UniformRangePrior",
    "b_from_p_hat",
    "dge_estimate",
    "log_beta_binomial_likelihood",
    "map_estimate",
    "posterior_miss_mass",
    "posterior_n",
    "posterior_summaries",
    "sample_max",
    "scale_estimate",
]
