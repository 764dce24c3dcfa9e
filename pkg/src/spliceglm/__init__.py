"""Best-subset selection for generalized linear models by splicing."""

from .exceptions import DegenerateColumnError, InvalidInputError, NumericalFailure
from .family import Family, cumulant
from .glm import (
    Coefficients,
    Dataset,
    gradient,
    hessian_diagonal,
    neg_log_likelihood,
    normalize,
)
from .newton import NewtonConfig, restricted_mle, should_continue_newton
from .splicing import (
    ActiveModel,
    SpliceConfig,
    SpliceResult,
    backward_sacrifices,
    bess_glm,
    default_tau,
    forward_sacrifices,
    marginal_fits,
    sis_init,
    splice_sets,
)
from .selection import (
    FitResult,
    SelectorConfig,
    abess,
    auto_s_max,
    default_s_max,
    gic,
    important_subset,
    screened_bess_glm,
)
from .estimator import SplicingClassifier, SplicingPoissonRegressor, SplicingRegressor

__version__ = "0.1.0"
