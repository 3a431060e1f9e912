"""Fee-statistic estimation and volatility calibration from observed swap fees.

The statistic

    C = e^{-r dt} / (N gamma_hat) * sum_n  fee_n / sqrt(open_price_n)

summarizes N per-block LP fee receipts in sqrt-price units. A calibrated
volatility ``sigma_m`` makes the model's discounted fee expectation match C
while staying in the deposit-optimal regime; it is a root of

    G_C(sigma) = C + gap(sigma) - spread(sigma)

subject to ``gamma_hat >= gamma_star(sigma_m)``. ``G_C`` is independent of the
fee level except through C, has a single interior minimum (at ``sigma_hat``
when r = 0, at ``sigma_bar_star`` when r > 0), and G_C(0+) = C > 0, which
yields a complete zero/one/two-root case partition over the admissible
interval between the implied volatilities.

Summation is pairwise (numpy) over a materialized array, so the statistic is
deterministic for a given observation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InsufficientDataError, RegimeError
from .market import MarketParams
from .implied_vol import VolCase, implied_vols, _polish_into_hold, _RTOL, _XTOL
from .pricing import _gamma_star_at, _gap, _spread
from .special import lambert_w, norm_cdf

__all__ = [
    "FeeObservation",
    "CalibrationOutcome",
    "GAMMA_BAR_STAR_ZERO",
    "c_statistic",
    "g_c",
    "g_c_prime",
    "sigma_hat",
    "sigma_bar_star",
    "gamma_bar_star",
    "calibrate_sigma",
    "repricing_factor",
]

# Fee-level threshold separating the one-dip and two-root geometries at r = 0:
# 2 (1 - e^{-1/pi}) / (2 Phi(sqrt(2/pi)) - e^{-1/pi}) ~= 0.6432.
GAMMA_BAR_STAR_ZERO = (
    2.0
    * (1.0 - math.exp(-1.0 / math.pi))
    / (2.0 * norm_cdf(math.sqrt(2.0 / math.pi)) - math.exp(-1.0 / math.pi))
)


@dataclass(frozen=True)
class FeeObservation:
    """One swap block: the block-open price and the LP fee received over it."""

    prev_price: float
    fee_paid: float

    def __post_init__(self):
        if self.prev_price <= 0.0:
            raise DomainError(f"block-open price must be > 0, got {self.prev_price!r}")
        if self.fee_paid < 0.0:
            raise DomainError(f"fee must be >= 0, got {self.fee_paid!r}")


@dataclass(frozen=True)
class CalibrationOutcome:
    """Calibrated volatilities with the thresholds that routed the case split.

    ``sigma_bar_star``/``gamma_bar_star`` are populated for r > 0,
    ``sigma_hat``/``gamma_bar_star_zero`` for r = 0; unused thresholds are
    None. ``branch`` names the partition cell for reporting.
    """

    c_statistic: float
    case: VolCase
    roots: tuple[float, ...]
    repricing_ratios: tuple[float, ...]
    branch: str
    sigma_bar_star: float | None = None
    gamma_bar_star: float | None = None
    sigma_hat: float | None = None
    gamma_bar_star_zero: float | None = None


def c_statistic(observations, params: MarketParams) -> float:
    """Average discounted fee per sqrt of block-open price, in fee-ratio units.

    Zero-fee observations are valid data and must be included; blocks without
    swaps are excluded upstream (see :mod:`lptoken.ingest`).
    """
    obs = list(observations)
    if not obs:
        raise InsufficientDataError("c_statistic needs at least one observation")
    fees = np.fromiter((o.fee_paid for o in obs), dtype=float, count=len(obs))
    opens = np.fromiter((o.prev_price for o in obs), dtype=float, count=len(obs))
    total = float(np.sum(fees / np.sqrt(opens)))
    return math.exp(-params.r * params.dt) * total / (len(obs) * params.gamma_hat)


def g_c(sigma: float, c: float, params: MarketParams) -> float:
    """Repricing residual; its zeros are the calibrated volatilities."""
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    return c + _gap(sigma, params.r, params.dt) - _spread(sigma, params.r, params.dt)


def g_c_prime(sigma: float, params: MarketParams) -> float:
    """Derivative of :func:`g_c` in sigma (independent of the statistic C)."""
    if sigma <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma!r}")
    r, dt = params.r, params.dt
    decay = math.exp(-0.5 * (r + 0.25 * sigma * sigma) * dt)
    return decay * (
        sigma * dt / 4.0
        - math.sqrt(dt / (2.0 * math.pi)) * math.exp(-r * r * dt / (2.0 * sigma * sigma))
    )


def sigma_hat(params: MarketParams) -> float:
    """Location of the minimum of G_C when r = 0: ``sqrt(8 / (pi dt))``."""
    return math.sqrt(8.0 / (math.pi * params.dt))


def sigma_bar_star(params: MarketParams) -> float:
    """Location of the minimum of G_C when r > 0.

    Seeded by the principal-branch Lambert form
    ``r sqrt(dt / -W0(-(pi/8)(r dt)^2))`` and then refined by root-finding on
    :func:`g_c_prime`; the refined root is authoritative (the closed form and
    the derivative zero agree to roundoff, and the cross-check guards the
    Lambert branch choice).
    """
    if params.r == 0.0:
        raise DomainError("sigma_bar_star applies to r > 0; use sigma_hat at r = 0")
    arg = -(math.pi / 8.0) * (params.r * params.dt) ** 2
    w = lambert_w(max(arg, -math.exp(-1.0)), branch=0)
    seed = params.r * math.sqrt(params.dt / (-w))

    def dgc(s: float) -> float:
        return g_c_prime(s, params)

    lo, hi = 0.5 * seed, 2.0 * seed
    if dgc(lo) < 0.0 < dgc(hi):
        return float(brentq(dgc, lo, hi, xtol=_XTOL, rtol=_RTOL))
    return seed


def gamma_bar_star(params: MarketParams) -> float:
    """Fee-level threshold (r > 0) deciding whether the G_C minimum sits between
    the two implied volatilities; evaluated at ``sigma_bar_star``."""
    sbs = sigma_bar_star(params)
    gap = _gap(sbs, params.r, params.dt)
    spread = _spread(sbs, params.r, params.dt)
    return 2.0 * gap / (gap + spread)


def _refined_root(f, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    return float(brentq(f, lo, hi, xtol=_XTOL, rtol=_RTOL))


def _bracket_down_from(f, hi: float) -> tuple[float, float]:
    lo = hi
    for _ in range(1100):
        lo *= 0.5
        v = f(lo)
        if v > 0.0:
            return lo, 2.0 * lo
        if v == 0.0:
            return lo, lo
    raise DomainError("no sign change found while bracketing downward")


def _outcome_roots(
    params: MarketParams, roots: list[float], toward: float
) -> tuple[tuple, tuple]:
    gh = params.gamma_hat

    def g(s: float) -> float:
        return (2.0 + gh) * _gap(s, params.r, params.dt) - gh * _spread(
            s, params.r, params.dt
        )

    polished = []
    for root in sorted(set(roots)):
        # Keep roots on the deposit-optimal side (nudge toward the interior of
        # the admissible volatility interval); the case intervals guarantee
        # this up to one-ulp root-finder noise.
        root = _polish_into_hold(root, g, toward=toward) if g(root) > 0.0 else root
        if _gamma_star_at(root, params.r, params.dt) > gh * (1.0 + 1e-9):
            raise DomainError(
                f"calibrated volatility {root!r} escaped the deposit-optimal regime"
            )
        polished.append(root)
    ratios = tuple(gh / _gamma_star_at(s, params.r, params.dt) for s in polished)
    return tuple(polished), ratios


def calibrate_sigma(c: float, params: MarketParams) -> CalibrationOutcome:
    """Solve the repricing equation for all admissible calibrated volatilities.

    Total classification: always returns an outcome, with zero, one or two
    roots, each bracketed inside the interval its case assigns and reported in
    ascending order alongside its repricing ratio ``gamma_hat /
    gamma_star(sigma_m)``. ``params.sigma`` is unused.
    """
    if c < 0.0:
        raise DomainError(f"fee statistic must be >= 0, got {c!r}")

    def gc(s: float) -> float:
        return g_c(s, c, params)

    gh = params.gamma_hat
    iv = implied_vols(params)

    if params.r == 0.0:
        sh = sigma_hat(params)
        star = iv.roots[0]
        common = dict(sigma_hat=sh, gamma_bar_star_zero=GAMMA_BAR_STAR_ZERO)
        if c == 0.0:
            # Degenerate data: G_C < 0 everywhere on (0, star], no positive root.
            return CalibrationOutcome(
                c, VolCase.NO_ROOT, (), (), branch="r0/zero-statistic", **common
            )
        if params.gamma <= GAMMA_BAR_STAR_ZERO:
            v_star = gc(star)
            if v_star > 0.0:
                return CalibrationOutcome(
                    c, VolCase.NO_ROOT, (), (), branch="r0/low-fee/no-root", **common
                )
            if v_star == 0.0:
                roots, ratios = _outcome_roots(params, [star], toward=0.0)
            else:
                lo, hi = _bracket_down_from(gc, star)
                roots, ratios = _outcome_roots(
                    params, [_refined_root(gc, lo, min(hi, star))], toward=0.0
                )
            return CalibrationOutcome(
                c, VolCase.UNIQUE, roots, ratios, branch="r0/low-fee/unique", **common
            )
        v_hat = gc(sh)
        if v_hat > 0.0:
            return CalibrationOutcome(
                c, VolCase.NO_ROOT, (), (), branch="r0/high-fee/no-root", **common
            )
        if v_hat == 0.0:
            roots, ratios = _outcome_roots(params, [sh], toward=0.0)
            return CalibrationOutcome(
                c, VolCase.UNIQUE, roots, ratios, branch="r0/high-fee/tangent", **common
            )
        if gc(star) < 0.0:
            lo, hi = _bracket_down_from(gc, sh)
            roots, ratios = _outcome_roots(
                params, [_refined_root(gc, lo, min(hi, sh))], toward=0.0
            )
            return CalibrationOutcome(
                c, VolCase.UNIQUE, roots, ratios, branch="r0/high-fee/unique", **common
            )
        lo, hi = _bracket_down_from(gc, sh)
        r1 = _refined_root(gc, lo, min(hi, sh))
        r2 = _refined_root(gc, sh, star)
        roots, ratios = _outcome_roots(params, [r1, r2], toward=0.0)
        case = VolCase.TWO_ROOTS if len(roots) == 2 else VolCase.UNIQUE
        return CalibrationOutcome(
            c, case, roots, ratios, branch="r0/high-fee/two-roots", **common
        )

    # r > 0
    if iv.dt_bar is not None and params.dt > iv.dt_bar:
        return CalibrationOutcome(
            c, VolCase.NO_ROOT, (), (), branch="r+/dt-beyond-bound"
        )
    sbs = sigma_bar_star(params)
    gbs = gamma_bar_star(params)
    common = dict(sigma_bar_star=sbs, gamma_bar_star=gbs)

    if iv.case is VolCase.NO_ROOT:
        return CalibrationOutcome(
            c, VolCase.NO_ROOT, (), (), branch="r+/below-tangency", **common
        )
    if iv.case is VolCase.UNIQUE:
        sb = iv.sigma_bar
        if gc(sb) == 0.0:
            roots, ratios = _outcome_roots(params, [sb])
            return CalibrationOutcome(
                c, VolCase.UNIQUE, roots, ratios, branch="r+/tangency/unique", **common
            )
        return CalibrationOutcome(
            c, VolCase.NO_ROOT, (), (), branch="r+/tangency/no-root", **common
        )

    star1, star2 = iv.roots
    if params.gamma <= gbs:
        # The G_C minimum lies outside [star1, star2]; G_C is monotone there.
        if gc(star1) * gc(star2) > 0.0:
            return CalibrationOutcome(
                c, VolCase.NO_ROOT, (), (), branch="r+/low-fee/no-root", **common
            )
        roots, ratios = _outcome_roots(params, [_refined_root(gc, star1, star2)])
        return CalibrationOutcome(
            c, VolCase.UNIQUE, roots, ratios, branch="r+/low-fee/unique", **common
        )

    v_min = gc(sbs)
    if v_min > 0.0:
        return CalibrationOutcome(
            c, VolCase.NO_ROOT, (), (), branch="r+/high-fee/no-root", **common
        )
    if v_min == 0.0:
        roots, ratios = _outcome_roots(params, [sbs])
        return CalibrationOutcome(
            c, VolCase.UNIQUE, roots, ratios, branch="r+/high-fee/tangent", **common
        )
    found: list[float] = []
    if gc(star1) * v_min <= 0.0:
        found.append(_refined_root(gc, star1, sbs))
    if gc(star2) * v_min <= 0.0:
        found.append(_refined_root(gc, sbs, star2))
    if not found:
        return CalibrationOutcome(
            c, VolCase.NO_ROOT, (), (), branch="r+/high-fee/no-root", **common
        )
    roots, ratios = _outcome_roots(params, found)
    case = VolCase.TWO_ROOTS if len(roots) == 2 else VolCase.UNIQUE
    return CalibrationOutcome(
        c, case, roots, ratios, branch="r+/high-fee/split", **common
    )


def repricing_factor(sigma_m: float, params: MarketParams) -> float:
    """Ratio ``gamma_hat / gamma_star(sigma_m) >= 1``: the factor by which the
    quoted mint price understates the token; the repriced token is
    ``2 * factor * sqrt(P)``.

    A relative slack of 1e-9 on the regime check absorbs root-finder noise
    when ``sigma_m`` sits exactly on an implied volatility.
    """
    if sigma_m <= 0.0:
        raise DomainError(f"volatility must be > 0, got {sigma_m!r}")
    gh = params.gamma_hat
    gs = _gamma_star_at(sigma_m, params.r, params.dt)
    if gs > gh * (1.0 + 1e-9):
        raise RegimeError(
            f"repricing factor defined only for gamma_hat >= gamma_star "
            f"({gh!r} < {gs!r})"
        )
    return gh / gs
