"""Special functions used by the pricing formulas: standard normal CDF and Lambert W.

The CDF is delegated to scipy's complementary-error-function implementation
(``ndtr``), accurate to ~1e-16 in double precision; fee-threshold computations
subtract CDF values that differ only in the 5th decimal, so an
approximation-grade CDF (abs error ~1e-7) would destroy them.

Lambert W is computed by Halley iteration from a branch-appropriate starting
point. The arguments arising in block-time calculations are often ~1e-9, where
the series start ``w = x`` is already exact to first order.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

__all__ = ["norm_cdf", "norm_pdf", "lambert_w", "BRANCH_POINT"]

# x = -1/e, where the two real Lambert branches meet.
BRANCH_POINT = -math.exp(-1.0)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def norm_cdf(x):
    """Standard normal CDF, elementwise on arrays, abs error <= 1e-15."""
    out = ndtr(x)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def norm_pdf(x):
    """Standard normal density."""
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _halley(w: float, x: float) -> float:
    # Halley steps on f(w) = w e^w - x; cubic convergence near the root.
    for _ in range(64):
        ew = math.exp(w)
        f = w * ew - x
        if f == 0.0:
            return w
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= 1e-16 * max(abs(w), 1e-300):
            return w
    return w


def lambert_w(x: float, branch: int = 0) -> float:
    """Real Lambert W: the solution w of ``w * exp(w) = x``.

    Parameters
    ----------
    x : float
        Argument. Principal branch needs ``x >= -1/e``; the minus-one branch
        needs ``-1/e <= x < 0``.
    branch : int
        0 for the principal branch (w >= -1), -1 for the lower branch
        (w <= -1).

    Returns
    -------
    float
        w with relative residual ``|w e^w - x| <= 1e-12 |x|``.
    """
    if branch not in (0, -1):
        raise DomainError(f"branch must be 0 or -1, got {branch}")
    if x < BRANCH_POINT:
        # Tolerate roundoff-level undershoot of the branch point.
        if x >= BRANCH_POINT * (1.0 + 1e-12):
            return -1.0
        raise DomainError(f"lambert_w undefined for x={x!r} < -1/e")

    if branch == 0:
        if x == 0.0:
            return 0.0
        if x < -0.32:
            # Branch-point series in p = sqrt(2(e x + 1)).
            p = math.sqrt(2.0 * (math.e * x + 1.0))
            w = -1.0 + p - p * p / 3.0
        elif x < 1.0:
            w = x * (1.0 - x)  # series w = x - x^2 + ...
        else:
            l1 = math.log(x)
            l2 = math.log(l1) if l1 > 1.0 else 0.0
            w = l1 - l2
        return _halley(w, x)

    # branch == -1
    if x >= 0.0:
        raise DomainError(f"minus-one branch needs -1/e <= x < 0, got x={x!r}")
    if x < -0.27:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 - p - p * p / 3.0
    else:
        # For x -> 0-, W_{-1}(x) ~ log(-x) - log(-log(-x)).
        l1 = math.log(-x)
        w = l1 - math.log(-l1)
    return _halley(w, x)
