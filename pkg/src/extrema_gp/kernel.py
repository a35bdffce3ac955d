"""Squared-exponential covariance kernel and its mixed partial derivatives.

The kernel is K(x, x') = exp{-(x - x')^2 / (2 h^2)} with bandwidth h.  All
mixed partials d^{j+l} K / dx^j dx'^l are available in closed form through
order 4 in each argument: writing u = (x - x') / h and g(u) = exp(-u^2 / 2),

    K_jl(x, x') = (-1)^j * h^(-(j+l)) * He_{j+l}(u) * g(u),

where He_n is the probabilists' Hermite polynomial (g^(n) = (-1)^n He_n g).
No finite differencing happens here; the Hermite factors are evaluated with
``numpy.polynomial.hermite_e``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

MAX_DERIV_ORDER = 4


class KernelFamily(enum.Enum):
    """Supported stationary kernel families."""

    SQUARED_EXPONENTIAL = "squared_exponential"


@dataclass(frozen=True)
class KernelSpec:
    """Immutable kernel description: family plus bandwidth ``h``.

    ``h`` is in the same units as the inputs.  Construction rejects
    non-positive bandwidths.  Instances are safe to share across threads.
    """

    h: float
    family: KernelFamily = KernelFamily.SQUARED_EXPONENTIAL

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.h}")
        if not isinstance(self.family, KernelFamily):
            raise TypeError(f"unknown kernel family: {self.family!r}")


def _check_order(j: int, l: int) -> None:
    if not (0 <= j <= MAX_DERIV_ORDER and 0 <= l <= MAX_DERIV_ORDER):
        raise ValueError(
            f"derivative orders must be in 0..{MAX_DERIV_ORDER}, got (j={j}, l={l})"
        )


def eval_deriv(spec: KernelSpec, j: int, l: int, x, xp):
    """Evaluate K_jl(x, x') = d^{j+l} K / dx^j dx'^l.

    ``x`` and ``xp`` may be scalars or broadcastable arrays.  Orders j, l
    outside 0..4 are rejected.  Large |x - x'| / h underflows to exactly 0.0.
    """
    _check_order(j, l)
    n = j + l
    u = (np.asarray(x, dtype=float) - np.asarray(xp, dtype=float)) / spec.h
    # Evaluate at |u| and restore the parity sign so that the symmetry
    # K_jl(x, x') == K_lj(x', x) holds bit-for-bit.
    env = np.exp(-0.5 * u * u)
    if n == 0:
        return env if env.ndim else float(env)
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    herm = hermite_e.hermeval(np.abs(u), coeffs)
    sign = np.where(u < 0, (-1.0) ** n, 1.0)
    out = ((-1.0) ** j / spec.h**n) * sign * herm * env
    return out if out.ndim else float(out)


def gram(spec: KernelSpec, X) -> np.ndarray:
    """n-by-n matrix of kernel values K(X_i, X_j); exactly symmetric."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or X.size == 0:
        raise ValueError("X must be a nonempty 1-d sequence")
    return eval_deriv(spec, 0, 0, X[:, None], X[None, :])


def deriv_row(spec: KernelSpec, j: int, t: float, X) -> np.ndarray:
    """Length-n row vector with entries K_j0(t, X_i)."""
    X = np.asarray(X, dtype=float)
    return np.atleast_1d(eval_deriv(spec, j, 0, t, X))


def deriv_matrix(spec: KernelSpec, j: int, ts, X) -> np.ndarray:
    """Stacked rows K_j0(t_r, X_c) for a batch of evaluation points."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    X = np.asarray(X, dtype=float)
    return eval_deriv(spec, j, 0, ts[:, None], X[None, :])
