"""Market model primitives: parameter set, pool-holdings algebra, one-block GBM step.

Conventions used throughout the package:

* rates and volatilities are annualized; block times are converted from
  seconds with a 365-day year (31,536,000 s/yr),
* ``gamma`` is the swap fee charged on incoming assets, ``gamma_hat =
  gamma / (1 - gamma)`` is the resulting LP receipt ratio on per-block
  reserve changes,
* the price follows the risk-neutral GBM ``dP = P (r dt + sigma dW)``,
  sampled at the fixed inter-block time ``dt``.

Everything here is immutable and side-effect free; random draws are always
supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

__all__ = [
    "SECONDS_PER_YEAR",
    "MarketParams",
    "PoolState",
    "fee_ratio",
    "holdings_from_price",
    "gbm_step",
]

SECONDS_PER_YEAR = 365 * 24 * 3600  # 31_536_000; documented 365-day convention


def fee_ratio(gamma: float) -> float:
    """LP receipt ratio ``gamma / (1 - gamma)`` for a swap fee ``gamma`` in (0, 1)."""
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"fee fraction must lie in (0, 1), got {gamma!r}")
    return gamma / (1.0 - gamma)


@dataclass(frozen=True)
class MarketParams:
    """Model parameters: rate, volatility, inter-block time and fee level.

    Attributes
    ----------
    r : float
        Annualized risk-free rate, >= 0. Negative rates are rejected: the
        valuation and implied-volatility results assume r >= 0 and do not
        extend below zero.
    sigma : float
        Annualized volatility, > 0.
    dt : float
        Inter-block time in years, > 0.
    gamma : float
        Swap fee fraction in (0, 1).
    """

    r: float
    sigma: float
    dt: float
    gamma: float

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0.0:
            raise DomainError(f"risk-free rate must be finite and >= 0, got {self.r!r}")
        if not math.isfinite(self.sigma) or self.sigma <= 0.0:
            raise DomainError(f"volatility must be finite and > 0, got {self.sigma!r}")
        if not math.isfinite(self.dt) or self.dt <= 0.0:
            raise DomainError(f"inter-block time must be finite and > 0, got {self.dt!r}")
        fee_ratio(self.gamma)  # validates the range

    @property
    def gamma_hat(self) -> float:
        """Derived fee ratio gamma / (1 - gamma)."""
        return fee_ratio(self.gamma)

    @classmethod
    def from_quotes(
        cls, r: float, sigma: float, dt_seconds: float, gamma_bps: float
    ) -> "MarketParams":
        """Build params from desk-style quotes: dt in seconds, fee in basis points."""
        return cls(r=r, sigma=sigma, dt=dt_seconds / SECONDS_PER_YEAR, gamma=gamma_bps * 1e-4)

    def with_sigma(self, sigma: float) -> "MarketParams":
        return replace(self, sigma=sigma)


def holdings_from_price(price: float, liquidity: float) -> tuple[float, float]:
    """Pool holdings ``(x, y) = (L / sqrt(P), L sqrt(P))`` backing L tokens at price P.

    The pair satisfies ``x * y = L**2`` and ``y / x = P``; the pooled value is
    ``P x + y = 2 L sqrt(P)``.
    """
    if price <= 0.0:
        raise DomainError(f"price must be > 0, got {price!r}")
    if liquidity <= 0.0:
        raise DomainError(f"liquidity must be > 0, got {liquidity!r}")
    sp = math.sqrt(price)
    return liquidity / sp, liquidity * sp


@dataclass(frozen=True)
class PoolState:
    """Constant-product pool summarized by price and outstanding liquidity tokens."""

    price: float
    liquidity: float

    def __post_init__(self):
        holdings_from_price(self.price, self.liquidity)  # validates

    @property
    def holdings(self) -> tuple[float, float]:
        return holdings_from_price(self.price, self.liquidity)

    @property
    def value(self) -> float:
        """Mark-to-market of the pool, ``2 L sqrt(P)``."""
        return 2.0 * self.liquidity * math.sqrt(self.price)

    @classmethod
    def from_holdings(cls, x: float, y: float) -> "PoolState":
        if x <= 0.0 or y <= 0.0:
            raise DomainError(f"holdings must be > 0, got ({x!r}, {y!r})")
        return cls(price=y / x, liquidity=math.sqrt(x * y))


def gbm_step(price, params: MarketParams, z):
    """One inter-block GBM transition ``P -> P exp((r - sigma^2/2) dt + sigma sqrt(dt) z)``.

    ``price`` and ``z`` may be scalars or arrays (broadcast together); the
    draws ``z`` are standard normals owned by the caller.
    """
    if np.any(np.asarray(price) <= 0.0):
        raise DomainError("price must be > 0")
    drift = (params.r - 0.5 * params.sigma**2) * params.dt
    shock = params.sigma * math.sqrt(params.dt)
    out = price * np.exp(drift + shock * np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
