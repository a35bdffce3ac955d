"""Posterior inference on the local extrema of a noisy function on [0, 1].

A derivative-constrained GP prior indexed by a single location parameter
yields a closed-form posterior over extremum locations; this package
computes it, segments it into highest-posterior-density regions, and turns
the segments into counts, point estimates, and confidence intervals.
"""

__version__ = "0.1.0"

from .empirical_bayes import EBConfig, select_hyperparams
from .estimator import LocalExtremaGP
from .gp import (Dataset, FactorizationError, GPModel, Hyperparams,
                 NonPositiveVarianceError, constrained_cov, fit,
                 log_marginal_unconstrained, mean_f, mean_fprime,
                 naive_log_lik_t, var_fprime)
from .kernel import KernelFamily, KernelSpec, deriv_row, eval_deriv, gram
from .posterior import (PosteriorGrid, PriorSpec, compute_posterior,
                        local_maxima, log_unnorm_posterior, posterior_cdf,
                        restricted_moments)
from .simulate import (SimConfig, SimulationReport, align_estimates, doppler,
                       generate_dataset, run_replications)
from .summarize import (ExtremaReport, ExtremumEstimate, FlatCurvatureError,
                        HpdResult, build_report, confidence_interval,
                        count_extrema, gp_extrema_in_segment, hpd_region,
                        joint_confidence)

__all__ = [
    "Dataset", "EBConfig", "ExtremaReport", "ExtremumEstimate",
    "FactorizationError", "FlatCurvatureError", "GPModel", "HpdResult",
    "Hyperparams", "KernelFamily", "KernelSpec", "LocalExtremaGP",
    "NonPositiveVarianceError", "PosteriorGrid", "PriorSpec", "SimConfig",
    "SimulationReport", "align_estimates", "build_report",
    "compute_posterior", "confidence_interval", "constrained_cov",
    "count_extrema", "deriv_row", "doppler", "eval_deriv", "fit",
    "generate_dataset", "gp_extrema_in_segment", "gram", "hpd_region",
    "joint_confidence", "local_maxima", "log_marginal_unconstrained",
    "log_unnorm_posterior", "mean_f", "mean_fprime", "naive_log_lik_t",
    "posterior_cdf", "restricted_moments", "run_replications",
    "select_hyperparams", "var_fprime",
]
