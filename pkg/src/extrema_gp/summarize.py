"""Posterior summaries: HPD segments, extremum counts, point and interval
estimates.

The highest-posterior-density region at level 1 - alpha is found by water
filling on the gridded density.  Each disjoint segment is then summarized
two ways, side by side: the posterior mode within the segment, and the zero
of the fitted mean's derivative inside the segment (averaged when several
zeros occur).  Confidence intervals are centered at the bias-corrected
derivative root and scale inversely with the estimated curvature there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .gp import GPModel, mean_fprime
from .kernel import deriv_row
from .posterior import PosteriorGrid

# Below this |curvature| a confidence interval is undefined (flat extremum).
CURVATURE_FLOOR = 1e-10

# Bisection stops at this residual or after 60 halvings, whichever is first.
_ROOT_TOL = 1e-12
_ROOT_MAX_ITERS = 60


class FlatCurvatureError(RuntimeError):
    """Estimated curvature too close to zero for interval estimation."""

    def __init__(self, t_hat: float, curvature: float):
        self.t_hat = float(t_hat)
        self.curvature = float(curvature)
        super().__init__(
            f"curvature {curvature:.3e} at t_hat={t_hat:.6f} is below "
            f"{CURVATURE_FLOOR:.0e}; confidence interval undefined"
        )


@dataclass(frozen=True)
class HpdResult:
    """Highest-posterior-density region as disjoint [lo, hi] segments.

    ``threshold`` is the density of the last cell admitted by water filling;
    ``modes`` holds the per-segment density argmax.  ``boundary_flags`` marks
    segments touching the grid edge; ``degenerate`` marks the all-equal
    density fallback (single segment spanning the grid).
    """

    level: float
    threshold: float
    segments: tuple
    modes: tuple
    boundary_flags: tuple
    degenerate: bool = False


def hpd_region(grid: PosteriorGrid, alpha: float) -> HpdResult:
    """Water-fill the gridded density to mass 1 - alpha.

    Cells are admitted in decreasing density order until the accumulated
    midpoint-rule mass reaches the level; contiguous admitted cells form the
    segments.  The enclosed mass overshoots the level by at most one cell.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    level = 1.0 - alpha
    d = grid.density
    step = grid.grid_step
    if float(d.max() - d.min()) == 0.0:
        return HpdResult(level=level, threshold=float(d[0]),
                         segments=((grid.t_lo, grid.t_hi),),
                         modes=(float(grid.ts[0]),),
                         boundary_flags=(True,), degenerate=True)
    order = np.argsort(-d, kind="stable")
    cum = np.cumsum(d[order] * step)
    n_in = int(np.searchsorted(cum, level)) + 1
    n_in = min(n_in, d.size)
    threshold = float(d[order[n_in - 1]])
    included = np.zeros(d.size, dtype=bool)
    included[order[:n_in]] = True

    segments, modes, boundary = [], [], []
    i = 0
    while i < d.size:
        if included[i]:
            j = i
            while j + 1 < d.size and included[j + 1]:
                j += 1
            segments.append((float(grid.ts[i] - 0.5 * step),
                             float(grid.ts[j] + 0.5 * step)))
            k = i + int(np.argmax(d[i:j + 1]))
            modes.append(float(grid.ts[k]))
            boundary.append(i == 0 or j == d.size - 1)
            i = j + 1
        else:
            i += 1
    return HpdResult(level=level, threshold=threshold,
                     segments=tuple(segments), modes=tuple(modes),
                     boundary_flags=tuple(boundary))


def count_extrema(hpd: HpdResult) -> int:
    """Estimated number of local extrema: the number of HPD segments."""
    assert hpd.segments, "HPD region cannot be empty by construction"
    return len(hpd.segments)


def _bisect_root(f, a, b, fa, fb):
    for _ in range(_ROOT_MAX_ITERS):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) < _ROOT_TOL:
            return mid
        if fa * fm < 0.0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def gp_extrema_in_segment(model: GPModel, segment, *, step: Optional[float] = None):
    """Zeros of the fitted mean's derivative inside ``segment``.

    A uniform scan locates strict sign changes of the derivative of the
    posterior mean; each bracket is refined by bisection.  Roots with zero
    second derivative are dropped.  Returns a (possibly empty) sorted list;
    averaging of multiple roots is the caller's convention.
    """
    lo, hi = float(segment[0]), float(segment[1])
    if step is None:
        step = (hi - lo) / 200.0
    n_pts = max(int(math.ceil((hi - lo) / step)) + 1, 2)
    ts = np.linspace(lo, hi, n_pts)
    g = mean_fprime(model, ts, 0)
    roots = []
    for i in range(n_pts - 1):
        if g[i] * g[i + 1] < 0.0:
            r = _bisect_root(lambda t: mean_fprime(model, t, 0),
                             ts[i], ts[i + 1], g[i], g[i + 1])
            if mean_fprime(model, r, 1) != 0.0:
                roots.append(float(r))
    return roots


def normal_quantile(p: float) -> float:
    """Standard normal quantile (inverse CDF)."""
    return float(ndtri(p))


def confidence_interval(model: GPModel, t_hat: float, alpha: float):
    """Plug-in interval for an extremum location at level 1 - alpha.

    Returns (lo, hi, bias_correction).  The center is t_hat shifted by the
    estimated smoothing bias over the curvature; the half-width uses the
    sampling variance of the derivative estimate, with A^{-2} applied through
    two triangular solves of the cached factor.  Curvature magnitudes below
    ``CURVATURE_FLOOR`` raise :class:`FlatCurvatureError`.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    curvature = mean_fprime(model, t_hat, 1)
    if abs(curvature) <= CURVATURE_FLOOR:
        raise FlatCurvatureError(t_hat, curvature)
    k = deriv_row(model.spec, 1, t_hat, model.data.x)
    v = model.solve(k)
    half_var = float(v @ v)  # k A^{-2} k^T
    bias = float(k @ model.solve(model.fitted_values())) / curvature
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(model.hyper.sigma2 * half_var) / abs(curvature)
    center = t_hat + bias
    return center - half, center + half, bias


def joint_confidence(model: GPModel, t_hats, alpha: float):
    """Bonferroni-corrected simultaneous intervals: each marginal interval is
    recomputed at level alpha / len(t_hats)."""
    m = len(t_hats)
    if m < 1:
        raise ValueError("need at least one estimate for a joint set")
    return [confidence_interval(model, t, alpha / m) for t in t_hats]


@dataclass(frozen=True)
class ExtremumEstimate:
    """Point and interval estimate for one extremum.

    ``kind`` is "max" exactly when the estimated curvature is negative.
    ``ci_lo``/``ci_hi`` are None when the curvature is too flat for an
    interval.  ``source`` records whether ``t_hat`` came from a derivative
    root of the fitted mean or fell back to the posterior mode.
    """

    t_hat: float
    kind: str
    curvature_hat: float
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    bias_correction: Optional[float]
    boundary_flag: bool
    source: str

    def to_json_dict(self) -> dict:
        return {
            "t_hat": self.t_hat,
            "kind": self.kind,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "bias_correction": self.bias_correction,
            "boundary_flag": self.boundary_flag,
            "source": self.source,
        }


@dataclass(frozen=True)
class ExtremaReport:
    """Full summary for one fitted dataset: segment count, HPD segments,
    posterior modes, and per-segment estimates at marginal and Bonferroni
    levels."""

    m_hat: int
    segments: tuple
    modes: tuple
    estimates: tuple
    joint: tuple

    def to_json_dict(self) -> dict:
        return {
            "m_hat": self.m_hat,
            "segments": [list(s) for s in self.segments],
            "modes": list(self.modes),
            "estimates": [e.to_json_dict() for e in self.estimates],
            "joint": [e.to_json_dict() for e in self.joint],
        }


def _estimate_at(model: GPModel, t_hat: float, alpha: float, boundary: bool,
                 source: str) -> ExtremumEstimate:
    curvature = mean_fprime(model, t_hat, 1)
    kind = "max" if curvature < 0.0 else "min"
    try:
        lo, hi, bias = confidence_interval(model, t_hat, alpha)
    except FlatCurvatureError:
        lo = hi = bias = None
    return ExtremumEstimate(t_hat=float(t_hat), kind=kind,
                            curvature_hat=float(curvature), ci_lo=lo, ci_hi=hi,
                            bias_correction=bias, boundary_flag=boundary,
                            source=source)


def build_report(model: GPModel, grid: PosteriorGrid, hpd: HpdResult,
                 alpha_ci: float) -> ExtremaReport:
    """Assemble the per-segment estimates.

    Within each HPD segment the derivative roots of the fitted mean are
    located on a sub-grid 10x finer than the posterior grid; multiple roots
    are averaged, and a segment with no root falls back to its posterior
    mode (recorded via ``source``).
    """
    t_hats, sources = [], []
    for seg, mode in zip(hpd.segments, hpd.modes):
        roots = gp_extrema_in_segment(model, seg, step=grid.grid_step / 10.0)
        if roots:
            t_hats.append(float(np.mean(roots)))
            sources.append("derivative_root")
        else:
            t_hats.append(mode)
            sources.append("posterior_mode")
    m_hat = len(hpd.segments)
    estimates = tuple(
        _estimate_at(model, t, alpha_ci, b, s)
        for t, b, s in zip(t_hats, hpd.boundary_flags, sources)
    )
    joint = tuple(
        _estimate_at(model, t, alpha_ci / m_hat, b, s)
        for t, b, s in zip(t_hats, hpd.boundary_flags, sources)
    )
    return ExtremaReport(m_hat=m_hat, segments=hpd.segments, modes=hpd.modes,
                         estimates=estimates, joint=joint)
