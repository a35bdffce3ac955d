"""Unconstrained Gaussian-process regression on [0, 1] with derivative queries.

The model places a zero-mean GP prior with covariance sigma2 / (n * lam) * K
on the regression function and N(0, sigma2) noise on the observations.  All
posterior quantities reduce to solves against the single ridged Gram matrix

    A = K(X, X) + n * lam * I,

which is factorized exactly once per fit.  Posterior means and variances of
the function and its first derivative (plus higher derivatives of those, up
to order 3) are then O(n^2) per query point.

Two deliberately slow routines live at the end as validation oracles: the
direct log-likelihood of the derivative-constrained model at a candidate
stationary point, and the constrained prior covariance itself.  They refactor
an n-by-n matrix per call and are kept out of the production pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf

from .kernel import KernelSpec, deriv_matrix, eval_deriv, gram

# Diagonal jitter escalation ladder, as fractions of mean(diag(A)).
_JITTER_SCALES = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

# Counts O(n^3) factorizations so tests can assert queries never re-factorize.
_factorizations = 0


def factorization_count() -> int:
    """Total Cholesky factorizations performed since import."""
    return _factorizations


class FactorizationError(RuntimeError):
    """Gram matrix could not be factorized even after jitter escalation."""


class NonPositiveVarianceError(RuntimeError):
    """Posterior derivative variance came out non-positive at some t."""

    def __init__(self, t: float, value: float):
        self.t = float(t)
        self.value = float(value)
        super().__init__(
            f"non-positive derivative variance {value:.6e} at t={t!r}; "
            "the hyperparameter regime is numerically degenerate"
        )


@dataclass(frozen=True)
class Dataset:
    """Design points in [0, 1] and responses.

    Duplicate design points are rejected unless ``allow_duplicates`` is set;
    the ridge keeps the system solvable either way, but silent duplicates
    usually indicate an ingestion bug.
    """

    x: np.ndarray
    y: np.ndarray
    allow_duplicates: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
            raise ValueError("x and y must be 1-d sequences of equal length")
        if x.size < 2:
            raise ValueError(f"need at least 2 observations, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError("design points must lie in [0, 1]")
        if not self.allow_duplicates and np.unique(x).size != x.size:
            raise ValueError(
                "duplicate design points; pass allow_duplicates=True if intended"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class Hyperparams:
    """Regularization ``lam``, bandwidth ``h``, and noise variance ``sigma2``.

    The GP prior scale is sigma2 / (n * lam); its square root is the
    amplitude-like quantity some parameterizations call the prior standard
    deviation (see :meth:`prior_scale`).
    """

    lam: float
    h: float
    sigma2: float

    def __post_init__(self):
        for name in ("lam", "h", "sigma2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be strictly positive, got {v}")

    def prior_scale(self, n: int) -> float:
        """sqrt(sigma2 / (n * lam)), the prior amplitude for sample size n."""
        return math.sqrt(self.sigma2 / (n * self.lam))


@dataclass(frozen=True, eq=False)
class GPModel:
    """Fitted GP state: data, hyperparameters, and the cached factorization.

    ``chol`` is the lower-triangular Cholesky factor of A = K(X, X) +
    n * lam * I (plus any jitter recorded in ``jitter``); ``weights`` solves
    A w = y.  Instances are immutable and safe for concurrent queries.
    """

    data: Dataset
    hyper: Hyperparams
    spec: KernelSpec
    chol: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0
    _fitted_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def n_lambda(self) -> float:
        return self.data.n * self.hyper.lam

    def solve(self, b: np.ndarray) -> np.ndarray:
        """A^{-1} b via the cached factor (two triangular solves)."""
        return cho_solve((self.chol, True), b)

    def fitted_values(self) -> np.ndarray:
        """Posterior mean at the design points, cached after first use."""
        if "fitted" not in self._fitted_cache:
            K = gram(self.spec, self.data.x)
            self._fitted_cache["fitted"] = K @ self.weights
        return self._fitted_cache["fitted"]


def _chol_with_jitter(A: np.ndarray) -> tuple[np.ndarray, float]:
    global _factorizations
    mean_diag = float(np.mean(np.diag(A)))
    for scale in _JITTER_SCALES:
        jitter = scale * mean_diag
        _factorizations += 1
        L, info = dpotrf(A + jitter * np.eye(A.shape[0]), lower=1, clean=1)
        if info == 0:
            return L, jitter
    smallest = float(np.linalg.eigvalsh(A).min())
    raise FactorizationError(
        f"Cholesky failed after jitter escalation to {_JITTER_SCALES[-1]:.0e}"
        f" * mean(diag); smallest pivot {smallest:.6e}"
    )


def fit(data: Dataset, hyper: Hyperparams, spec: KernelSpec) -> GPModel:
    """Factorize A = K(X, X) + n * lam * I and solve for the weight vector.

    This is the single O(n^3) step; every subsequent query reuses the factor.
    Raises :class:`FactorizationError` if A stays indefinite through the
    jitter ladder.
    """
    A = gram(spec, data.x)
    A[np.diag_indices_from(A)] += data.n * hyper.lam
    L, jitter = _chol_with_jitter(A)
    weights = cho_solve((L, True), data.y)
    return GPModel(data=data, hyper=hyper, spec=spec, chol=L, weights=weights,
                   jitter=jitter)


def _check_domain(t) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if ts.min() < 0.0 or ts.max() > 1.0:
        raise ValueError(f"query points must lie in [0, 1], got {ts.min()}..{ts.max()}")
    return ts


def mean_f(model: GPModel, t):
    """Posterior mean of the regression function at t (scalar or array)."""
    ts = _check_domain(t)
    out = deriv_matrix(model.spec, 0, ts, model.data.x) @ model.weights
    return out if np.ndim(t) else float(out[0])


def mean_fprime(model: GPModel, t, k: int = 0):
    """k-th derivative of the posterior mean of f', i.e. the (k+1)-th
    derivative of the posterior mean of f, for k in 0..3."""
    if not 0 <= k <= 3:
        raise ValueError(f"derivative order k must be in 0..3, got {k}")
    ts = _check_domain(t)
    out = deriv_matrix(model.spec, k + 1, ts, model.data.x) @ model.weights
    return out if np.ndim(t) else float(out[0])


def var_fprime(model: GPModel, t, k: int = 0):
    """Marginal posterior variance of f' at t (k=0), or its k-th derivative.

    For k >= 1 the general Leibniz expansion over the mixed kernel partials
    is used.  A non-positive value at k=0 raises
    :class:`NonPositiveVarianceError` naming the offending t.
    """
    if not 0 <= k <= 3:
        raise ValueError(f"derivative order k must be in 0..3, got {k}")
    ts = _check_domain(t)
    scale = model.hyper.sigma2 / model.n_lambda
    total = np.zeros_like(ts)
    for i in range(k + 1):
        diag = eval_deriv(model.spec, i + 1, k + 1 - i, ts, ts)
        rows = deriv_matrix(model.spec, i + 1, ts, model.data.x)
        # K_{0,m}(X, t) entries equal K_{m,0}(t, X) by symmetry of K.
        cols = deriv_matrix(model.spec, k + 1 - i, ts, model.data.x)
        quad = np.einsum("ij,ij->i", rows, model.solve(cols.T).T)
        total += math.comb(k, i) * (diag - quad)
    out = scale * total
    if k == 0 and np.any(out <= 0.0):
        bad = int(np.argmax(out <= 0.0))
        raise NonPositiveVarianceError(ts[bad], out[bad])
    return out if np.ndim(t) else float(out[0])


def log_marginal_unconstrained(model: GPModel) -> float:
    """Log density of y under the unconstrained prior, N(0, c * A) with
    c = sigma2 / (n * lam).

    c * A expands to sigma2/(n lam) * K(X, X) + sigma2 * I, so the cached
    factor of A is reused; no extra factorization happens here.
    """
    n = model.n
    c = model.hyper.sigma2 / model.n_lambda
    logdet_A = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    quad = float(model.data.y @ model.weights) / c
    return -0.5 * (n * math.log(2.0 * math.pi) + n * math.log(c) + logdet_A + quad)


# ----------------------------------------------------------------------
# Validation oracles.  O(n^3) per call; never used by the production path.
# ----------------------------------------------------------------------

def constrained_cov(spec: KernelSpec, t: float, xs, sigma2: float,
                    n_lambda: float) -> np.ndarray:
    """Covariance matrix on grid ``xs`` of the prior conditioned to have zero
    function derivative at ``t``:

        sigma2/n_lambda * {K(x, x') - K_01(x, t) K_11(t, t)^{-1} K_10(t, x')}.
    """
    xs = np.asarray(xs, dtype=float)
    k11 = eval_deriv(spec, 1, 1, t, t)
    if k11 <= 0:
        raise ValueError(f"K_11(t, t) must be positive, got {k11}")
    v = deriv_matrix(spec, 1, t, xs).ravel()  # K_01(x_i, t) == K_10(t, x_i)
    return (sigma2 / n_lambda) * (gram(spec, xs) - np.outer(v, v) / k11)


def naive_log_lik_t(data: Dataset, hyper: Hyperparams, spec: KernelSpec,
                    t: float) -> float:
    """Log-likelihood of y at a candidate stationary point ``t`` computed the
    direct way: factorize the full constrained-plus-noise covariance

        Sigma_t = sigma2/(n lam) * {K(X,X) - K_01(X,t) K_11^{-1} K_10(t,X)}
                  + sigma2 * I.

    This is the independent check for the closed-form posterior; a failed
    factorization signals an invalid hyperparameter regime and is raised
    as-is (no jitter).
    """
    global _factorizations
    k11 = eval_deriv(spec, 1, 1, t, t)
    if k11 <= 0:
        raise ValueError(f"K_11(t, t) must be positive, got {k11}")
    x, y = data.x, data.y
    n = data.n
    c = hyper.sigma2 / (n * hyper.lam)
    kcol = deriv_matrix(spec, 1, t, x).ravel()
    sigma_t = c * (gram(spec, x) - np.outer(kcol, kcol) / k11)
    sigma_t[np.diag_indices_from(sigma_t)] += hyper.sigma2
    _factorizations += 1
    L, info = dpotrf(sigma_t, lower=1, clean=1)
    if info != 0:
        raise FactorizationError(
            f"constrained covariance not positive definite at t={t} "
            f"(leading minor {info}); invalid hyperparameter regime"
        )
    half = solve_triangular(L, y, lower=True)
    return -0.5 * (n * math.log(2.0 * math.pi) + half @ half) - float(
        np.sum(np.log(np.diag(L)))
    )
