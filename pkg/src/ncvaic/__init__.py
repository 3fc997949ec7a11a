"""Non-concave penalized GLMs with an AIC-type criterion for choosing the tuning parameter."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .aic import (AicReport, MonteCarlo, aic_value, bias_correction, estimate_K,
                  select_lambda)
from .errors import (ConditioningError, DomainError, InsufficientDataError, NcvaicError,
                     SelectionError, UnboundedProblemError, UnsupportedRegimeError)
from .glm import (BERNOULLI, GAUSSIAN, POISSON, Dataset, Family, InfoBlocks,
                  conditional_score, get_family, log_likelihood, observed_information,
                  partition_information, score)
from .penalties import PenaltySpec, check_conditions, derivative, prox, second_derivative, value
from .simulation import (SimDesign, asymptotic_normality_check, empirical_kl_bias, generate,
                         reference_design, selection_consistency_rate, sparsity_rate)
from .solver import FitOptions, FitResult, fit, kkt_check, solve_quadratic_l1

__all__ = [
    "BACKEND", "AicReport", "MonteCarlo", "aic_value", "bias_correction", "estimate_K",
    "select_lambda", "ConditioningError", "DomainError", "InsufficientDataError",
    "NcvaicError", "SelectionError", "UnboundedProblemError", "UnsupportedRegimeError",
    "BERNOULLI", "GAUSSIAN", "POISSON", "Dataset", "Family", "InfoBlocks",
    "conditional_score", "get_family", "log_likelihood", "observed_information",
    "partition_information", "score", "PenaltySpec", "check_conditions", "derivative",
    "prox", "second_derivative", "value", "SimDesign", "asymptotic_normality_check",
    "empirical_kl_bias", "generate", "reference_design", "selection_consistency_rate",
    "sparsity_rate", "FitOptions", "FitResult", "fit", "kkt_check", "solve_quadratic_l1",
]
