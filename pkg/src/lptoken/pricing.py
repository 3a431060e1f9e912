"""Closed-form risk-neutral valuation of a CPMM liquidity token, with Greeks.

A liquidity token is a perpetual claim on the pool's fee stream plus the right
to withdraw the underlying ``2 sqrt(P)`` at any block. Under the GBM market
model the optimal policy is bang-bang: deposit-and-hold whenever the fee ratio
``gamma_hat`` is at least a threshold ``gamma_star`` that depends only on
``(r, sigma, dt)``, withdraw immediately otherwise. On the hold branch the
token is worth ``2 (gamma_hat / gamma_star) sqrt(P)``; otherwise it is worth
its unwind value ``2 sqrt(P)``.

Two scalar kernels drive everything here and in the implied-volatility and
calibration modules:

* ``_gap(sigma, r, dt)``   = ``1 - exp(-(r + sigma^2/4) dt / 2)``, the
  per-block decay of the discounted sqrt-price scale (computed via expm1:
  it is ~1e-9 for 2-second blocks and feeds every threshold),
* ``_spread(sigma, r, dt)`` = ``Phi(d+) - exp(-r dt) Phi(d-)`` with
  ``d± = (r ± sigma^2/2) sqrt(dt) / sigma``, the discounted one-block
  fee expectation per unit sqrt-price, up to a factor 2/gamma_star.

with ``gamma_star = 2 * gap / (spread - gap)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegimeError
from .market import MarketParams
from .special import norm_cdf

__all__ = [
    "TokenValuation",
    "Greeks",
    "gamma_star",
    "token_value",
    "block_fee",
    "expected_block_fee",
    "interblock_value",
    "greeks",
    "greeks_fd",
    "market_delta",
]


def _gap(sigma: float, r: float, dt: float) -> float:
    return -math.expm1(-0.5 * (r + 0.25 * sigma * sigma) * dt)


def _spread(sigma: float, r: float, dt: float) -> float:
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    sq = math.sqrt(dt)
    d_plus = (r + 0.5 * sigma * sigma) * sq / sigma
    d_minus = (r - 0.5 * sigma * sigma) * sq / sigma
    # Split so the small factor (1 - e^{-r dt}) is formed by expm1, not subtraction.
    return (norm_cdf(d_plus) - norm_cdf(d_minus)) + (-math.expm1(-r * dt)) * norm_cdf(d_minus)


def _gamma_star_at(sigma: float, r: float, dt: float) -> float:
    gap = _gap(sigma, r, dt)
    spread = _spread(sigma, r, dt)
    denom = spread - gap
    if denom <= 0.0:
        raise DomainError(
            f"threshold fee ratio undefined at sigma={sigma!r}, r={r!r}, dt={dt!r}"
        )
    return 2.0 * gap / denom


def gamma_star(params: MarketParams) -> float:
    """Threshold fee ratio above which providing liquidity beats withdrawing.

    Positive, finite, independent of price and of the pool's liquidity level.
    """
    return _gamma_star_at(params.sigma, params.r, params.dt)


@dataclass(frozen=True)
class TokenValuation:
    """Value of one liquidity token plus the regime facts behind it."""

    value: float
    deposit_optimal: bool
    gamma_star: float
    repricing_ratio: float


def token_value(price: float, params: MarketParams) -> TokenValuation:
    """Risk-neutral value of one liquidity token at a block time.

    ``2 (gamma_hat / gamma_star) sqrt(P)`` when ``gamma_hat >= gamma_star``
    (weak inequality counts as deposit-optimal), else the unwind value
    ``2 sqrt(P)``.
    """
    if price <= 0.0:
        raise DomainError(f"price must be > 0, got {price!r}")
    gs = gamma_star(params)
    gh = params.gamma_hat
    ratio = gh / gs
    optimal = gh >= gs
    value = 2.0 * math.sqrt(price) * (ratio if optimal else 1.0)
    return TokenValuation(
        value=value, deposit_optimal=optimal, gamma_star=gs, repricing_ratio=ratio
    )


def block_fee(prev_price, next_price):
    """Per-block fee base ``F = P1 (1/sqrt(P1) - 1/sqrt(P0))+ + (sqrt(P1) - sqrt(P0))+``.

    Exactly one term is nonzero unless the price is unchanged (then F = 0);
    the LP receives ``gamma_hat * F``. Accepts scalars or arrays.
    """
    p0 = np.asarray(prev_price, dtype=float)
    p1 = np.asarray(next_price, dtype=float)
    if np.any(p0 <= 0.0) or np.any(p1 <= 0.0):
        raise DomainError("prices must be > 0")
    s0 = np.sqrt(p0)
    s1 = np.sqrt(p1)
    down = p1 * np.maximum(1.0 / s1 - 1.0 / s0, 0.0)
    up = np.maximum(s1 - s0, 0.0)
    out = down + up
    return float(out) if np.ndim(out) == 0 else out


def expected_block_fee(price: float, params: MarketParams) -> float:
    """Discounted expected one-block fee base ``2 * gap * sqrt(P) / gamma_star``.

    This is ``E[e^{-r dt} F(P, P_next)]``; the token value on the hold branch
    is the geometric sum ``gamma_hat * expected_block_fee / gap``.
    """
    if price <= 0.0:
        raise DomainError(f"price must be > 0, got {price!r}")
    gs = gamma_star(params)
    return 2.0 * _gap(params.sigma, params.r, params.dt) * math.sqrt(price) / gs


def interblock_value(
    current_price: float,
    block_open_price: float,
    tau: float,
    params: MarketParams,
) -> float:
    """Token value observed between blocks, ``tau`` years before the next block.

    Sum of the discounted next-block continuation value and the expected fee
    for the block currently in flight (whose reference price is the block-open
    price). Only defined on the hold branch; requires ``0 < tau <= dt``.
    """
    if current_price <= 0.0 or block_open_price <= 0.0:
        raise DomainError("prices must be > 0")
    if not 0.0 < tau <= params.dt:
        raise DomainError(f"tau must lie in (0, dt], got {tau!r}")
    gs = gamma_star(params)
    gh = params.gamma_hat
    if gh < gs:
        raise RegimeError(
            f"inter-block value defined only for gamma_hat >= gamma_star "
            f"({gh!r} < {gs!r})"
        )
    r, sigma = params.r, params.sigma
    sq = math.sqrt(tau)
    log_ratio = math.log(current_price / block_open_price)
    a_plus = (log_ratio + (r + 0.5 * sigma * sigma) * tau) / (sigma * sq)
    a_minus = (log_ratio + (r - 0.5 * sigma * sigma) * tau) / (sigma * sq)
    carry = math.exp(-0.5 * (r + 0.25 * sigma * sigma) * tau)
    sp_t = math.sqrt(current_price)
    sp_0 = math.sqrt(block_open_price)
    return (
        (2.0 / gs + 1.0) * gh * carry * sp_t
        - gh * (current_price / sp_0) * norm_cdf(-a_plus)
        - gh * math.exp(-r * tau) * sp_0 * norm_cdf(a_minus)
    )


@dataclass(frozen=True)
class Greeks:
    """Price and volatility sensitivities of the token value."""

    delta: float
    gamma: float
    vega: float


def greeks(price: float, params: MarketParams) -> Greeks:
    """Analytic sensitivities on the hold branch.

    delta = gamma_hat / (gamma_star sqrt(P)) = V / (2P) > 0,
    gamma = -gamma_hat / (2 gamma_star P^{3/2}) = -V / (4P^2) < 0,
    vega couples through d(gamma_star)/d(sigma) and changes sign: positive for
    small sigma (more trading, more fees), negative for large sigma.
    """
    if price <= 0.0:
        raise DomainError(f"price must be > 0, got {price!r}")
    gs = gamma_star(params)
    gh = params.gamma_hat
    if gh < gs:
        raise RegimeError(
            f"greeks defined only for gamma_hat >= gamma_star ({gh!r} < {gs!r})"
        )
    r, sigma, dt = params.r, params.sigma, params.dt
    sp = math.sqrt(price)
    delta = gh / (gs * sp)
    gamma_val = -gh / (2.0 * gs * price * sp)
    gap = _gap(sigma, r, dt)
    spread = _spread(sigma, r, dt)
    decay = 1.0 - gap  # e^{-(r + sigma^2/4) dt / 2}
    vega = (
        gh
        * sp
        * decay
        / gap
        * (
            math.sqrt(dt / (2.0 * math.pi)) * math.exp(-r * r * dt / (2.0 * sigma * sigma))
            - (sigma * dt / 4.0) * (spread / gap)
        )
    )
    return Greeks(delta=delta, gamma=gamma_val, vega=vega)


def greeks_fd(
    price: float,
    params: MarketParams,
    rel_step: float = 1e-6,
    rel_step_gamma: float = 1e-4,
) -> Greeks:
    """Central finite differences of :func:`token_value`, for cross-checking.

    First derivatives use the given relative step; the second derivative uses
    a larger one (curvature differencing loses ~half the mantissa to
    cancellation, so ~1e-4 balances truncation against roundoff).
    """
    h = rel_step * price
    v_up = token_value(price + h, params).value
    v_dn = token_value(price - h, params).value
    delta = (v_up - v_dn) / (2.0 * h)

    hg = rel_step_gamma * price
    v_up2 = token_value(price + hg, params).value
    v_dn2 = token_value(price - hg, params).value
    v_mid = token_value(price, params).value
    gamma_val = (v_up2 - 2.0 * v_mid + v_dn2) / (hg * hg)

    hs = rel_step * params.sigma
    v_su = token_value(price, params.with_sigma(params.sigma + hs)).value
    v_sd = token_value(price, params.with_sigma(params.sigma - hs)).value
    vega = (v_su - v_sd) / (2.0 * hs)
    return Greeks(delta=delta, gamma=gamma_val, vega=vega)


def market_delta(price) -> float:
    """Hedge ratio ``1 / sqrt(P)`` of the quoted mint price ``2 sqrt(P)``."""
    p = np.asarray(price, dtype=float)
    if np.any(p <= 0.0):
        raise DomainError("price must be > 0")
    out = 1.0 / np.sqrt(p)
    return float(out) if np.ndim(out) == 0 else out
