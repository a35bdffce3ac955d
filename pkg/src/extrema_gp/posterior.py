"""Closed-form posterior over the location of a local extremum.

Conditioning the GP prior to have zero derivative at t and integrating out
the function leaves a one-dimensional unnormalized posterior density

    p(t | data)  propto  {v(t) / K_11(t, t)}^(-1/2) * exp{-m(t)^2 / (2 v(t))}
                          * prior(t),

where m and v are the posterior mean and variance of the derivative from the
*unconstrained* fit.  Everything here is evaluated in log space on a midpoint
grid; a single factorization (already cached on the model) serves the whole
grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, logsumexp

from .gp import GPModel, NonPositiveVarianceError
from .kernel import deriv_matrix, eval_deriv


class PriorFamily(enum.Enum):
    BETA = "beta"


@dataclass(frozen=True)
class PriorSpec:
    """Beta(a, b) prior on the extremum location, supported on (0, 1)."""

    a: float
    b: float
    family: PriorFamily = PriorFamily.BETA

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a <= 0 or self.b <= 0:
            raise ValueError(f"Beta parameters must be positive, got a={self.a}, b={self.b}")

    def log_pdf(self, t):
        """Log density at t in (0, 1); endpoints are rejected by callers."""
        t = np.asarray(t, dtype=float)
        return (self.a - 1.0) * np.log(t) + (self.b - 1.0) * np.log1p(-t) \
            - betaln(self.a, self.b)

    def label(self) -> str:
        return f"beta:{self.a:g},{self.b:g}"


@dataclass(frozen=True)
class PosteriorGrid:
    """Normalized posterior density tabulated on midpoints of equal cells.

    ``density`` integrates to 1 under the midpoint rule by construction;
    ``log_norm_const`` is the log of the midpoint-rule normalizing constant
    applied to ``log_unnorm``.
    """

    ts: np.ndarray
    log_unnorm: np.ndarray
    density: np.ndarray
    log_norm_const: float
    grid_step: float

    def __post_init__(self):
        ts, lu, d = (np.asarray(a, dtype=float) for a in
                     (self.ts, self.log_unnorm, self.density))
        if not (ts.ndim == 1 and ts.shape == lu.shape == d.shape):
            raise ValueError("ts, log_unnorm, density must be equal-length 1-d arrays")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(lu)):
            raise ValueError("log_unnorm must be finite at every grid point")
        if np.any(d < 0):
            raise ValueError("density must be non-negative")
        total = float(np.sum(d) * self.grid_step)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"density must integrate to 1, got {total!r}")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "log_unnorm", lu)
        object.__setattr__(self, "density", d)

    @property
    def t_lo(self) -> float:
        return float(self.ts[0] - 0.5 * self.grid_step)

    @property
    def t_hi(self) -> float:
        return float(self.ts[-1] + 0.5 * self.grid_step)

    @classmethod
    def from_density(cls, ts, values) -> "PosteriorGrid":
        """Build a grid from raw non-negative density values (renormalized).

        Intended for synthetic densities in tests and diagnostics; values of
        zero are floored at the smallest positive double before taking logs.
        """
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        step = float(ts[1] - ts[0])
        lu = np.log(np.maximum(values, np.finfo(float).tiny))
        lnc = float(logsumexp(lu) + np.log(step))
        return cls(ts=ts, log_unnorm=lu, density=np.exp(lu - lnc),
                   log_norm_const=lnc, grid_step=step)


def _derivative_stats(model: GPModel, ts: np.ndarray):
    """Posterior mean/variance of f' at a batch of points, sharing one
    kernel-row evaluation and one solve."""
    rows = deriv_matrix(model.spec, 1, ts, model.data.x)
    mu = rows @ model.weights
    quad = np.einsum("ij,ij->i", rows, model.solve(rows.T).T)
    k11 = eval_deriv(model.spec, 1, 1, ts, ts)
    var = model.hyper.sigma2 / model.n_lambda * (k11 - quad)
    return mu, var, k11


def log_unnorm_posterior(model: GPModel, prior: PriorSpec, t):
    """Log unnormalized posterior density of the extremum location at t.

    Requires t strictly inside (0, 1) so the Beta prior term stays finite.
    Non-positive derivative variances propagate as
    :class:`NonPositiveVarianceError`.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if ts.min() <= 0.0 or ts.max() >= 1.0:
        raise ValueError("t must lie strictly inside (0, 1)")
    mu, var, k11 = _derivative_stats(model, ts)
    if np.any(var <= 0.0):
        bad = int(np.argmax(var <= 0.0))
        raise NonPositiveVarianceError(ts[bad], var[bad])
    out = -0.5 * np.log(var / k11) - mu * mu / (2.0 * var) + prior.log_pdf(ts)
    return out if np.ndim(t) else float(out[0])


def compute_posterior(model: GPModel, prior: PriorSpec, grid_size: int = 2001,
                      t_lo: float = 0.0, t_hi: float = 1.0) -> PosteriorGrid:
    """Tabulate and normalize the posterior on ``grid_size`` cell midpoints.

    The cells partition [t_lo, t_hi]; midpoints never touch the interval
    endpoints, so diverging Beta priors are safe.  Normalization is
    log-sum-exp times the cell width (midpoint rule).
    """
    if grid_size < 101:
        raise ValueError(f"grid_size must be at least 101, got {grid_size}")
    if not (0.0 <= t_lo < t_hi <= 1.0):
        raise ValueError(f"need 0 <= t_lo < t_hi <= 1, got ({t_lo}, {t_hi})")
    step = (t_hi - t_lo) / grid_size
    ts = t_lo + step * (np.arange(grid_size) + 0.5)
    lu = log_unnorm_posterior(model, prior, ts)
    if not np.all(np.isfinite(lu)):
        bad = int(np.argmax(~np.isfinite(lu)))
        raise RuntimeError(f"posterior evaluation failed at t={ts[bad]!r}")
    lnc = float(logsumexp(lu) + np.log(step))
    return PosteriorGrid(ts=ts, log_unnorm=lu, density=np.exp(lu - lnc),
                         log_norm_const=lnc, grid_step=step)


def posterior_cdf(grid: PosteriorGrid, z: float) -> float:
    """Midpoint-rule CDF at z, piecewise linear inside cells, clamped to [0, 1]."""
    if z <= grid.t_lo:
        return 0.0
    if z >= grid.t_hi:
        return 1.0
    step = grid.grid_step
    idx = min(int((z - grid.t_lo) / step), grid.ts.size - 1)
    full = float(np.sum(grid.density[:idx]) * step)
    partial = float(grid.density[idx]) * (z - (grid.t_lo + idx * step))
    return min(max(full + partial, 0.0), 1.0)


def local_maxima(grid: PosteriorGrid, rel_threshold: float = 0.01) -> np.ndarray:
    """Grid points that beat both neighbors and exceed ``rel_threshold``
    times the global density maximum.  The threshold suppresses quadrature
    ripple when counting posterior modes."""
    d = grid.density
    peak = d.max()
    inner = (d[1:-1] > d[:-2]) & (d[1:-1] > d[2:]) & (d[1:-1] > rel_threshold * peak)
    return grid.ts[1:-1][inner]


def restricted_moments(grid: PosteriorGrid, lo: float, hi: float):
    """(mass, mean, std) of the posterior restricted to [lo, hi].

    Computed over whole cells whose midpoint falls in the window; used to
    measure the spread of individual posterior components.
    """
    sel = (grid.ts >= lo) & (grid.ts <= hi)
    w = grid.density[sel] * grid.grid_step
    mass = float(np.sum(w))
    if mass <= 0.0:
        return 0.0, float("nan"), float("nan")
    ts = grid.ts[sel]
    mean = float(np.sum(w * ts) / mass)
    var = float(np.sum(w * (ts - mean) ** 2) / mass)
    return mass, mean, float(np.sqrt(max(var, 0.0)))
