"""Scikit-learn style front end for the local-extrema pipeline.

``LocalExtremaGP`` wires empirical-Bayes hyperparameter selection, the GP
fit, the extremum-location posterior, and the HPD summary behind the usual
``fit``/``predict``/``get_params`` surface so the method drops into
pipelines, cross-validation, and cloning like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .empirical_bayes import EBConfig, select_hyperparams
from .gp import Dataset, Hyperparams, fit, mean_f, mean_fprime
from .kernel import KernelSpec
from .posterior import PriorSpec, compute_posterior
from .summarize import build_report, count_extrema, hpd_region


def _as_1d_x(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single feature column, got shape {X.shape}")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(f"X must be 1-d or a single column, got ndim={X.ndim}")
    return X


class LocalExtremaGP(RegressorMixin, BaseEstimator):
    """Detect local extrema of a noisy function on [0, 1] with uncertainty.

    Parameters
    ----------
    prior_a, prior_b : float
        Beta prior on the extremum location.
    grid_size : int
        Number of midpoint cells for the posterior grid.
    alpha_hpd : float
        1 - alpha_hpd is the HPD mass used to segment the posterior.
    alpha_ci : float
        Level for the per-extremum confidence intervals.
    lam, h, sigma2 : float or None
        Fixed hyperparameters.  When any is None, all three are selected by
        maximizing the unconstrained marginal likelihood.
    eb_starts, eb_max_iters, eb_tol, eb_seed : optimizer settings for the
        empirical-Bayes search.
    allow_duplicates : bool
        Accept repeated design points.

    Attributes
    ----------
    hyperparams_ : resolved (lam, h, sigma2)
    model_ : fitted GP state
    posterior_ : gridded posterior of the extremum location
    hpd_ : HPD segmentation
    report_ : full extrema report (estimates with confidence intervals)
    m_hat_ : estimated number of local extrema
    extrema_ : ndarray of estimated extremum locations
    """

    def __init__(self, prior_a=1.0, prior_b=1.0, grid_size=2001,
                 alpha_hpd=0.05, alpha_ci=0.05, lam=None, h=None, sigma2=None,
                 eb_starts=8, eb_max_iters=400, eb_tol=1e-8, eb_seed=0,
                 allow_duplicates=False):
        self.prior_a = prior_a
        self.prior_b = prior_b
        self.grid_size = grid_size
        self.alpha_hpd = alpha_hpd
        self.alpha_ci = alpha_ci
        self.lam = lam
        self.h = h
        self.sigma2 = sigma2
        self.eb_starts = eb_starts
        self.eb_max_iters = eb_max_iters
        self.eb_tol = eb_tol
        self.eb_seed = eb_seed
        self.allow_duplicates = allow_duplicates

    def fit(self, X, y):
        x = _as_1d_x(X)
        y = np.asarray(y, dtype=float).ravel()
        data = Dataset(x=x, y=y, allow_duplicates=self.allow_duplicates)
        fixed = (self.lam, self.h, self.sigma2)
        if all(v is not None for v in fixed):
            hyper = Hyperparams(lam=self.lam, h=self.h, sigma2=self.sigma2)
        else:
            cfg = EBConfig(starts=self.eb_starts, max_iters=self.eb_max_iters,
                           tol=self.eb_tol, seed=self.eb_seed)
            hyper = select_hyperparams(data, cfg)
        prior = PriorSpec(self.prior_a, self.prior_b)
        self.hyperparams_ = hyper
        self.model_ = fit(data, hyper, KernelSpec(h=hyper.h))
        self.posterior_ = compute_posterior(self.model_, prior, self.grid_size)
        self.hpd_ = hpd_region(self.posterior_, self.alpha_hpd)
        self.report_ = build_report(self.model_, self.posterior_, self.hpd_,
                                    self.alpha_ci)
        self.m_hat_ = count_extrema(self.hpd_)
        self.extrema_ = np.array([e.t_hat for e in self.report_.estimates])
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        """Posterior mean of the regression function at X."""
        self._check_fitted()
        return np.asarray(mean_f(self.model_, _as_1d_x(X)))

    def predict_derivative(self, X, k: int = 0):
        """Posterior mean of the (k+1)-th derivative of the function at X."""
        self._check_fitted()
        return np.asarray(mean_fprime(self.model_, _as_1d_x(X), k))

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit(X, y) first")
