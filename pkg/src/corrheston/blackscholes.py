"""Black-Scholes pricing, implied vol, and FX smile-quote conventions.

Conventions default to premium-excluded spot delta with the ATM strike at
the forward.  Both choices are configurable through :class:`Conventions`
since RR/BF-implied strikes (and hence any skew statistics built on them)
shift slightly under different market conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr, ndtri

VOL_BRACKET = (1e-6, 5.0)


class NoSolutionError(ValueError):
    """Target value is unattainable (price outside band, delta unreachable)."""


@dataclass(frozen=True)
class Conventions:
    """FX quoting conventions: delta style and ATM strike placement."""

    delta_style: str = "spot"     # "spot" (premium-excluded) or "forward"
    atm_style: str = "forward"    # "forward" or "dns" (delta-neutral straddle)

    def __post_init__(self):
        if self.delta_style not in ("spot", "forward"):
            raise ValueError(f"unknown delta_style {self.delta_style!r}")
        if self.atm_style not in ("forward", "dns"):
            raise ValueError(f"unknown atm_style {self.atm_style!r}")


DEFAULT_CONVENTIONS = Conventions()


@dataclass(frozen=True)
class VanillaOption:
    strike: float
    expiry: float
    is_call: bool = True

    def __post_init__(self):
        if not self.strike > 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.expiry > 0.0:
            raise ValueError(f"expiry must be positive, got {self.expiry}")


@dataclass(frozen=True)
class SmileQuote:
    """One tenor's market triple: ATM vol, 25-delta RR, 25-delta BF.

    All three in volatility units (fractions per sqrt-year).  The risk
    reversal is call wing vol minus put wing vol; the butterfly is the
    average wing vol minus the ATM vol.
    """

    tenor: float
    atm_vol: float
    rr25: float = 0.0
    bf25: float = 0.0

    def __post_init__(self):
        if not self.tenor > 0.0:
            raise ValueError(f"tenor must be positive, got {self.tenor}")
        if not self.atm_vol > 0.0:
            raise ValueError(f"atm_vol must be positive, got {self.atm_vol}")
        if self.atm_vol + self.bf25 - abs(self.rr25) / 2.0 <= 0.0:
            raise ValueError("wing volatility would be non-positive")


def smile_vols(quote: SmileQuote) -> tuple[float, float, float]:
    """(25d put vol, ATM vol, 25d call vol) from the quote triple."""
    vol_25c = quote.atm_vol + quote.bf25 + 0.5 * quote.rr25
    vol_25p = quote.atm_vol + quote.bf25 - 0.5 * quote.rr25
    return vol_25p, quote.atm_vol, vol_25c


def forward(spot: float, tau: float, r: float, q: float) -> float:
    return spot * math.exp((r - q) * tau)


def bs_price(spot: float, strike: float, vol: float, tau: float,
             r: float = 0.0, q: float = 0.0, is_call: bool = True) -> float:
    """Black-Scholes price; vol = 0 or tau = 0 collapse to discounted intrinsic."""
    if spot <= 0.0 or strike <= 0.0:
        raise ValueError("spot and strike must be positive")
    if vol < 0.0 or tau < 0.0:
        raise ValueError("vol and tau must be non-negative")
    df = math.exp(-r * tau)
    fwd = forward(spot, tau, r, q)
    stdev = vol * math.sqrt(tau)
    if stdev == 0.0:
        intrinsic = fwd - strike if is_call else strike - fwd
        return df * max(intrinsic, 0.0)
    d1 = (math.log(fwd / strike) + 0.5 * stdev * stdev) / stdev
    d2 = d1 - stdev
    if is_call:
        return df * (fwd * ndtr(d1) - strike * ndtr(d2))
    return df * (strike * ndtr(-d2) - fwd * ndtr(-d1))


def bs_vega(spot: float, strike: float, vol: float, tau: float,
            r: float = 0.0, q: float = 0.0) -> float:
    fwd = forward(spot, tau, r, q)
    stdev = vol * math.sqrt(tau)
    if stdev == 0.0:
        return 0.0
    d1 = (math.log(fwd / strike) + 0.5 * stdev * stdev) / stdev
    return math.exp(-r * tau) * fwd * math.sqrt(tau) * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)


def bs_delta(spot: float, strike: float, vol: float, tau: float,
             r: float = 0.0, q: float = 0.0, is_call: bool = True,
             conventions: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Premium-excluded delta under the configured style."""
    fwd = forward(spot, tau, r, q)
    stdev = vol * math.sqrt(tau)
    if stdev == 0.0:
        itm = fwd > strike if is_call else fwd < strike
        base = 1.0 if itm else 0.0
        signed = base if is_call else -base
    else:
        d1 = (math.log(fwd / strike) + 0.5 * stdev * stdev) / stdev
        signed = ndtr(d1) if is_call else -ndtr(-d1)
    if conventions.delta_style == "spot":
        signed *= math.exp(-q * tau)
    return signed


def strike_from_delta(delta_target: float, spot: float, vol: float, tau: float,
                      r: float = 0.0, q: float = 0.0, is_call: bool = True,
                      conventions: Conventions = DEFAULT_CONVENTIONS) -> float:
    """Strike whose BS delta equals ``delta_target`` at the given vol.

    Closed-form inversion of N(d1); calls need delta in (0, 1), puts in
    (-1, 0) (before the spot-delta discounting, which caps the attainable
    magnitude at exp(-q tau)).
    """
    if is_call and not 0.0 < delta_target < 1.0:
        raise NoSolutionError(f"call delta must lie in (0,1), got {delta_target}")
    if not is_call and not -1.0 < delta_target < 0.0:
        raise NoSolutionError(f"put delta must lie in (-1,0), got {delta_target}")
    if vol <= 0.0 or tau <= 0.0:
        raise NoSolutionError("need positive vol and tau to invert a delta")
    mag = delta_target if is_call else -delta_target
    if conventions.delta_style == "spot":
        mag *= math.exp(q * tau)
    if not 0.0 < mag < 1.0:
        raise NoSolutionError(
            f"delta {delta_target} unattainable under {conventions.delta_style} delta"
        )
    d1 = ndtri(mag) if is_call else -ndtri(mag)
    stdev = vol * math.sqrt(tau)
    return forward(spot, tau, r, q) * math.exp(0.5 * stdev * stdev - d1 * stdev)


def atm_strike(spot: float, vol: float, tau: float, r: float = 0.0, q: float = 0.0,
               conventions: Conventions = DEFAULT_CONVENTIONS) -> float:
    fwd = forward(spot, tau, r, q)
    if conventions.atm_style == "forward":
        return fwd
    # delta-neutral straddle: call and put deltas cancel at d1 = 0
    return fwd * math.exp(0.5 * vol * vol * tau)


def _no_arb_band(spot: float, strike: float, tau: float, r: float, q: float,
                 is_call: bool) -> tuple[float, float]:
    df = math.exp(-r * tau)
    fwd = forward(spot, tau, r, q)
    if is_call:
        return df * max(fwd - strike, 0.0), df * fwd
    return df * max(strike - fwd, 0.0), df * strike


def implied_vol(price: float, spot: float, strike: float, tau: float,
                r: float = 0.0, q: float = 0.0, is_call: bool = True,
                tol: float = 1e-12, max_iter: int = 100) -> float:
    """Invert BS for the volatility; Newton with a bisection safeguard.

    Raises :class:`NoSolutionError` for prices outside the no-arbitrage
    band.  Round-trips bs_price to better than 1e-10 in price.
    """
    lo_price, hi_price = _no_arb_band(spot, strike, tau, r, q, is_call)
    if price < lo_price - 1e-12 or price > hi_price + 1e-12:
        raise NoSolutionError(
            f"price {price} outside no-arbitrage band [{lo_price}, {hi_price}]"
        )
    if price <= lo_price:
        return 0.0
    lo, hi = VOL_BRACKET
    f_lo = bs_price(spot, strike, lo, tau, r, q, is_call) - price
    f_hi = bs_price(spot, strike, hi, tau, r, q, is_call) - price
    if f_lo > 0.0:
        return lo
    if f_hi < 0.0:
        raise NoSolutionError(f"price {price} above bracket vol {hi}")
    vol = 0.5 * (lo + hi)
    for _ in range(max_iter):
        diff = bs_price(spot, strike, vol, tau, r, q, is_call) - price
        if diff > 0.0:
            hi = vol
        else:
            lo = vol
        if abs(diff) < tol:
            return vol
        vega = bs_vega(spot, strike, vol, tau, r, q)
        step = diff / vega if vega > 1e-300 else math.inf
        candidate = vol - step
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if abs(candidate - vol) < 1e-16 * max(1.0, vol):
            return candidate
        vol = candidate
    return vol
