"""Implied-volatility existence analysis and root-finding for the token value.

An implied volatility is a ``sigma > 0`` at which the risk-neutral token value
equals the quoted mint price ``2 sqrt(P)``, i.e. ``gamma_star(sigma) =
gamma_hat``. Existence is settled by the sign of

    G(sigma) = (2 + gamma_hat) * gap(sigma) - gamma_hat * spread(sigma)

whose roots are exactly the implied volatilities and whose sign matches
``gamma_star(sigma) - gamma_hat``: the deposit-optimal region is ``G <= 0``.

The case split (price- and liquidity-independent):

* r = 0: exactly one implied volatility, above the critical ``sigma_bar``.
* r > 0: none when the block time exceeds ``dt_bar``; otherwise G has an
  interior minimum at ``sigma_bar`` and there are zero, one (tangency) or two
  implied volatilities according to ``gamma_hat`` vs ``gamma_star(sigma_bar)``.

All classification inputs come from ``MarketParams`` except that functions
taking an explicit ``sigma`` ignore ``params.sigma`` (they scan volatility).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import DomainError, NotDefinedError
from .market import MarketParams
from .pricing import _gamma_star_at, _gap, _spread
from .special import lambert_w

__all__ = [
    "VolCase",
    "ImpliedVolOutcome",
    "g_function",
    "g_prime",
    "dt_bar",
    "sigma_bar",
    "implied_vols",
    "arbitrage_region",
]

# Bracket shrink tolerance: |root interval| <= ~4 ulp of the root, far inside
# the 1e-12 * sigma contract.
_RTOL = 8.9e-16
_XTOL = 1e-30

# gamma_hat within this relative distance of gamma_star(sigma_bar) counts as
# the tangency (Unique) case: exact equality is measure-zero in floats.
_TANGENCY_RTOL = 1e-12


class VolCase(str, enum.Enum):
    NO_ROOT = "NoRoot"
    UNIQUE = "Unique"
    TWO_ROOTS = "TwoRoots"


@dataclass(frozen=True)
class ImpliedVolOutcome:
    """Root count, the roots themselves, and the thresholds that decided it."""

    case: VolCase
    roots: tuple[float, ...]
    sigma_bar: float | None
    dt_bar: float | None

    @property
    def preferred_root(self) -> float | None:
        """The larger root: it is continuous in r down to the r = 0 solution,
        while the smaller root collapses to zero, so it is the one to quote."""
        return self.roots[-1] if self.roots else None


def g_function(sigma: float, params: MarketParams) -> float:
    """Excess of the withdraw branch over the hold branch, in fee-ratio units.

    Zero exactly at the implied volatilities; negative where depositing is
    strictly better (sign of ``gamma_star(sigma) - gamma_hat``).
    """
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    gh = params.gamma_hat
    return (2.0 + gh) * _gap(sigma, params.r, params.dt) - gh * _spread(
        sigma, params.r, params.dt
    )


def g_prime(sigma: float, params: MarketParams) -> float:
    """Derivative of :func:`g_function` in sigma."""
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    gh = params.gamma_hat
    r, dt = params.r, params.dt
    decay = math.exp(-0.5 * (r + 0.25 * sigma * sigma) * dt)
    return decay * (
        (2.0 + gh) * sigma * dt / 4.0
        - gh * math.sqrt(dt / (2.0 * math.pi)) * math.exp(-r * r * dt / (2.0 * sigma * sigma))
    )


def dt_bar(params: MarketParams) -> float:
    """Largest block time (years) at which an implied volatility can exist (r > 0).

    ``sqrt(8/pi) * gamma_hat / ((2 + gamma_hat) r) * e^{-1/2}``; for longer
    block times the withdraw branch dominates at every volatility.
    """
    if params.r == 0.0:
        raise NotDefinedError("dt_bar applies only to r > 0 (r = 0 always has a root)")
    gh = params.gamma_hat
    return math.sqrt(8.0 / math.pi) * gh / ((2.0 + gh) * params.r) * math.exp(-0.5)


def _sigma_bar_at(gamma_hat: float, r: float, dt: float) -> float:
    if r == 0.0:
        return gamma_hat / (2.0 + gamma_hat) * math.sqrt(8.0 / (math.pi * dt))
    arg = -(math.pi / 2.0) * ((2.0 + gamma_hat) * r * dt / (2.0 * gamma_hat)) ** 2
    # dt <= dt_bar guarantees arg >= -1/e up to roundoff; clamp the sliver.
    w = lambert_w(max(arg, -math.exp(-1.0)), branch=0)
    return r * math.sqrt(dt / (-w))


def sigma_bar(params: MarketParams) -> float:
    """Critical volatility where G bottoms out (the unique interior minimum).

    For r > 0 it exists only when ``dt <= dt_bar``; computed on the principal
    Lambert branch, which is the branch that actually minimizes G (the lower
    critical point of G is a local maximum at negligible volatility).
    """
    if params.r > 0.0 and params.dt > dt_bar(params):
        raise NotDefinedError(
            f"no critical volatility: dt={params.dt!r} exceeds dt_bar={dt_bar(params)!r}"
        )
    return _sigma_bar_at(params.gamma_hat, params.r, params.dt)


def _bracket_down(f, hi: float) -> tuple[float, float]:
    """Walk down from ``hi`` (where f < 0) until f > 0; return the bracket."""
    lo = hi
    for _ in range(1100):
        lo *= 0.5
        f_lo = f(lo)
        if f_lo > 0.0:
            return lo, 2.0 * lo
        if f_lo == 0.0:
            return lo, lo
    raise DomainError("no sign change found below the critical volatility")


def _bracket_up(f, lo: float) -> tuple[float, float]:
    """Walk up from ``lo`` (where f < 0) until f > 0; return the bracket."""
    hi = lo
    for _ in range(1100):
        hi *= 2.0
        f_hi = f(hi)
        if f_hi > 0.0:
            return 0.5 * hi, hi
        if f_hi == 0.0:
            return hi, hi
    raise DomainError("no sign change found above the critical volatility")


def _solve(f, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    return float(brentq(f, lo, hi, xtol=_XTOL, rtol=_RTOL))


def _polish_into_hold(root: float, f, toward: float) -> float:
    """Nudge a converged root by ulps toward ``toward`` until f(root) <= 0.

    Guarantees returned implied volatilities satisfy the weak deposit
    inequality in floating point, so downstream regime checks never trip on
    one-ulp noise.
    """
    for _ in range(4):
        if f(root) <= 0.0:
            return root
        root = math.nextafter(root, toward)
    return root


def _classify(gamma_hat: float, r: float, dt: float) -> ImpliedVolOutcome:
    def g(sigma: float) -> float:
        return (2.0 + gamma_hat) * _gap(sigma, r, dt) - gamma_hat * _spread(sigma, r, dt)

    if r == 0.0:
        sb = _sigma_bar_at(gamma_hat, r, dt)
        lo, hi = _bracket_up(g, sb)
        root = _polish_into_hold(_solve(g, lo, hi), g, toward=0.0)
        return ImpliedVolOutcome(VolCase.UNIQUE, (root,), sigma_bar=sb, dt_bar=None)

    tb = math.sqrt(8.0 / math.pi) * gamma_hat / ((2.0 + gamma_hat) * r) * math.exp(-0.5)
    if dt > tb:
        return ImpliedVolOutcome(VolCase.NO_ROOT, (), sigma_bar=None, dt_bar=tb)

    sb = _sigma_bar_at(gamma_hat, r, dt)
    gs_sb = _gamma_star_at(sb, r, dt)
    if abs(gamma_hat - gs_sb) <= _TANGENCY_RTOL * gamma_hat:
        return ImpliedVolOutcome(VolCase.UNIQUE, (sb,), sigma_bar=sb, dt_bar=tb)
    if gamma_hat < gs_sb:
        return ImpliedVolOutcome(VolCase.NO_ROOT, (), sigma_bar=sb, dt_bar=tb)

    lo1, hi1 = _bracket_down(g, sb)
    root1 = _polish_into_hold(_solve(g, lo1, min(hi1, sb)), g, toward=sb)
    lo2, hi2 = _bracket_up(g, sb)
    root2 = _polish_into_hold(_solve(g, max(lo2, sb), hi2), g, toward=sb)
    return ImpliedVolOutcome(VolCase.TWO_ROOTS, (root1, root2), sigma_bar=sb, dt_bar=tb)


def implied_vols(params: MarketParams) -> ImpliedVolOutcome:
    """Classify and solve for all implied volatilities (``params.sigma`` unused)."""
    return _classify(params.gamma_hat, params.r, params.dt)


def arbitrage_region(sigma: float, params: MarketParams) -> bool:
    """True iff the token value strictly exceeds ``2 sqrt(P)`` at this volatility.

    Price-independent: for r = 0 the region is everything below the unique
    implied volatility; for r > 0 it is the open interval between the two
    implied volatilities when they exist. Implied volatilities themselves are
    on the boundary and return False.
    """
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    outcome = implied_vols(params)
    if outcome.case is VolCase.NO_ROOT:
        return False
    if params.r == 0.0:
        return sigma < outcome.roots[0]
    if outcome.case is VolCase.UNIQUE:
        return False
    lo, hi = outcome.roots
    return lo < sigma < hi
