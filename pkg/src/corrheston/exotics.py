"""One touch, out-of-the-money knockout, and volatility swap pricing.

Barrier claims are priced by simulation with Brownian-bridge monitoring:
each path carries a survival probability that is multiplied by one minus
the bridge crossing probability every step, and payoffs are weighted by
the surviving mass.  Variance is reduced with regression control variates
(a European digital at the barrier for one touches, the un-knocked vanilla
payoff for knockouts) whose exact means come from the Fourier pricer.

Differences to the Heston model calibrate both models to the same quote
and reuse one set of random draws on a common time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .blackscholes import NoSolutionError, SmileQuote, VanillaOption, bs_price
from .calibration import CalibrationResult, calibrate
from .fourier_pricer import price_vanilla, prob_above
from .model_core import ModelParams, expected_integrated_variance
from .montecarlo import (
    McConfig,
    PathState,
    bridge_crossing_prob,
    effective_steps,
    evolve_paths,
)

ONE_TOUCH = "one-touch"
DOWN_AND_OUT_CALL = "down-and-out-call"
UP_AND_OUT_PUT = "up-and-out-put"
_KINDS = (ONE_TOUCH, DOWN_AND_OUT_CALL, UP_AND_OUT_PUT)


@dataclass(frozen=True)
class BarrierProduct:
    """Continuously monitored barrier claim; one touch pays 1 at expiry."""

    kind: str
    barrier: float
    expiry: float
    strike: float | None = None    # unused for one touch

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown barrier product kind {self.kind!r}")
        if not self.barrier > 0.0:
            raise ValueError(f"barrier must be positive, got {self.barrier}")
        if not self.expiry > 0.0:
            raise ValueError(f"expiry must be positive, got {self.expiry}")
        if self.kind == DOWN_AND_OUT_CALL:
            if self.strike is None or self.barrier >= self.strike:
                raise ValueError("down-and-out call must have barrier < strike")
        if self.kind == UP_AND_OUT_PUT:
            if self.strike is None or self.barrier <= self.strike:
                raise ValueError("up-and-out put must have barrier > strike")


@dataclass(frozen=True)
class VolSwapSpec:
    """Volatility swap on daily log returns, annualized with fixings_per_year."""

    expiry: float
    fixings_per_year: int = 250
    num_returns: int | None = None   # default: round(fixings_per_year * expiry)

    def __post_init__(self):
        if not self.expiry > 0.0:
            raise ValueError(f"expiry must be positive, got {self.expiry}")
        if self.fixings_per_year <= 0:
            raise ValueError("fixings_per_year must be positive")
        if self.num_returns is not None and self.num_returns < 1:
            raise ValueError("num_returns must be at least 1")

    def returns_count(self) -> int:
        if self.num_returns is not None:
            return self.num_returns
        # round half up: a 3m swap at 250 fixings/year has 63 returns
        return max(1, math.floor(self.fixings_per_year * self.expiry + 0.5))


@dataclass
class McPrice:
    value: float
    std_error: float
    cv_beta: float = 0.0


@dataclass
class DifferenceResult:
    """price(model) - price(eta = 0) under common random numbers."""

    difference: float
    std_error: float
    price: float
    price_heston: float
    calibration: CalibrationResult
    calibration_heston: CalibrationResult


class _SurvivalMonitor:
    """Accumulates per-path survival probability against one barrier."""

    def __init__(self, log_barrier: float, bridge_enabled: bool = True):
        self.log_barrier = log_barrier
        self.bridge_enabled = bridge_enabled
        self.survival = None

    def begin(self, n_paths: int, n_steps: int, dt: float):
        self.survival = np.ones(n_paths)

    def observe(self, sl, step, prev: PathState, new: PathState, int_var_dt):
        if self.bridge_enabled:
            p = bridge_crossing_prob(prev.log_spot, new.log_spot,
                                     self.log_barrier, int_var_dt)
        else:
            d0 = self.log_barrier - prev.log_spot
            d1 = self.log_barrier - new.log_spot
            p = np.where(d0 * d1 <= 0.0, 1.0, 0.0)
        self.survival[sl] *= 1.0 - p
        new.alive &= p < 1.0


@dataclass
class _ProductSamples:
    """Per-path undiscounted estimators for one product (CV already applied)."""

    product: BarrierProduct
    adjusted: np.ndarray
    raw: np.ndarray
    cv_beta: float
    discount: float

    def price(self) -> McPrice:
        n = len(self.adjusted)
        mean = float(self.adjusted.mean())
        if self.product.kind == ONE_TOUCH:
            mean = min(max(mean, 0.0), 1.0)
        else:
            mean = max(mean, 0.0)
        se = float(self.adjusted.std(ddof=1) / math.sqrt(n))
        return McPrice(self.discount * mean, self.discount * se, self.cv_beta)

    def raw_price(self) -> McPrice:
        n = len(self.raw)
        return McPrice(self.discount * float(self.raw.mean()),
                       self.discount * float(self.raw.std(ddof=1) / math.sqrt(n)),
                       0.0)


def _regression_cv(samples: np.ndarray, control: np.ndarray, control_mean: float):
    var = float(control.var(ddof=1))
    if var <= 0.0:
        return samples.copy(), 0.0
    beta = float(np.cov(samples, control, ddof=1)[0, 1] / var)
    return samples - beta * (control - control_mean), beta


def _prob_above(params: ModelParams, spot: float, barrier: float, tau: float) -> float:
    """P(S_T > barrier); alpha = 0 collapses to the deterministic-variance normal."""
    if params.alpha > 0.0:
        return prob_above(params, spot, barrier, tau)
    iv = expected_integrated_variance(params, tau)
    d2 = (math.log(spot / barrier) + (params.r - params.q) * tau - 0.5 * iv) / math.sqrt(iv)
    return float(ndtr(d2))


def _vanilla_price(params: ModelParams, spot: float, option: VanillaOption) -> float:
    """Fourier price, or exact Black-Scholes with the RMS vol when alpha = 0."""
    if params.alpha > 0.0:
        return price_vanilla(option, spot, params)
    iv = expected_integrated_variance(params, option.expiry)
    vol = math.sqrt(iv / option.expiry)
    return bs_price(spot, option.strike, vol, option.expiry, params.r, params.q,
                    option.is_call)


def _touched_at_start(product: BarrierProduct, spot: float) -> bool:
    if product.kind == ONE_TOUCH:
        return product.barrier == spot
    if product.kind == DOWN_AND_OUT_CALL:
        return spot <= product.barrier
    return spot >= product.barrier


def barrier_samples(params: ModelParams, spot: float, products, cfg: McConfig,
                    steps: int | None = None) -> list[_ProductSamples]:
    """Simulate once and build control-variate-adjusted samples per product.

    Products sharing a barrier level share the survival monitor, so sweeps
    over many barriers cost one path generation.
    """
    products = list(products)
    if not products:
        return []
    expiry = products[0].expiry
    if any(prod.expiry != expiry for prod in products):
        raise ValueError("all products in one batch must share an expiry")
    if steps is None:
        steps = effective_steps(params, cfg, expiry)

    monitors: dict[float, _SurvivalMonitor] = {}
    for prod in products:
        monitors.setdefault(prod.barrier, _SurvivalMonitor(math.log(prod.barrier),
                                                           cfg.bridge_enabled))
    terminal = evolve_paths(params, spot, expiry, cfg,
                            observers=list(monitors.values()), steps=steps)
    s_t = np.exp(terminal.log_spot)
    discount = math.exp(-params.r * expiry)
    grow = math.exp(params.r * expiry)

    out = []
    for prod in products:
        survival = monitors[prod.barrier].survival
        if _touched_at_start(prod, spot):
            # barrier already breached at inception
            n = len(survival)
            value = np.ones(n) if prod.kind == ONE_TOUCH else np.zeros(n)
            out.append(_ProductSamples(prod, value, value.copy(), 0.0, discount))
            continue
        if prod.kind == ONE_TOUCH:
            raw = 1.0 - survival
            up = prod.barrier > spot
            control = (terminal.log_spot >= monitors[prod.barrier].log_barrier
                       if up else
                       terminal.log_spot <= monitors[prod.barrier].log_barrier).astype(float)
            p_model = _prob_above(params, spot, prod.barrier, expiry)
            control_mean = p_model if up else 1.0 - p_model
        else:
            if prod.kind == DOWN_AND_OUT_CALL:
                intrinsic = np.maximum(s_t - prod.strike, 0.0)
                vanilla = VanillaOption(prod.strike, expiry, is_call=True)
            else:
                intrinsic = np.maximum(prod.strike - s_t, 0.0)
                vanilla = VanillaOption(prod.strike, expiry, is_call=False)
            raw = survival * intrinsic
            control = intrinsic
            control_mean = _vanilla_price(params, spot, vanilla) * grow
        adjusted, cv_beta = _regression_cv(raw, control, control_mean)
        out.append(_ProductSamples(prod, adjusted, raw, cv_beta, discount))
    return out


def price_one_touch(product: BarrierProduct, spot: float, params: ModelParams,
                    cfg: McConfig) -> McPrice:
    """One touch paying 1 at expiry if the barrier trades before expiry."""
    if product.kind != ONE_TOUCH:
        raise ValueError(f"expected a one-touch product, got {product.kind!r}")
    return barrier_samples(params, spot, [product], cfg)[0].price()


def price_knockout(product: BarrierProduct, spot: float, params: ModelParams,
                   cfg: McConfig) -> McPrice:
    """Out-of-the-money knockout (down-and-out call or up-and-out put)."""
    if product.kind == ONE_TOUCH:
        raise ValueError("expected a knockout product, got a one-touch")
    return barrier_samples(params, spot, [product], cfg)[0].price()


def realized_vols(spec: VolSwapSpec, spot: float, params: ModelParams,
                  cfg: McConfig) -> np.ndarray:
    """Per-path annualized realized volatility on the fixing grid."""
    n_ret = spec.returns_count()
    terminal = evolve_paths(params, spot, spec.expiry, cfg, steps=n_ret)
    return np.sqrt(spec.fixings_per_year / n_ret * terminal.sum_sq_returns)


def price_vol_swap_strike(spec: VolSwapSpec, spot: float, params: ModelParams,
                          cfg: McConfig) -> McPrice:
    """Fair volatility-swap strike E[realized vol], with its standard error.

    Time steps coincide with the daily fixings (one step per return).
    """
    sig = realized_vols(spec, spot, params, cfg)
    return McPrice(float(sig.mean()), float(sig.std(ddof=1) / math.sqrt(len(sig))), 0.0)


def heston_difference(product_or_spec, quote: SmileQuote, spot: float, beta: float,
                      eta: float, cfg: McConfig, r: float = 0.0, q: float = 0.0) -> DifferenceResult:
    """Exotic price difference between the eta model and Heston (eta = 0).

    Both models are calibrated to the same quote; paths share random draws
    and a common (finer-of-the-two) time grid so the difference's standard
    error reflects only genuine model disagreement.
    """
    cal = calibrate(quote, spot, beta, eta, r, q)
    cal0 = calibrate(quote, spot, beta, 0.0, r, q)
    if isinstance(product_or_spec, VolSwapSpec):
        spec = product_or_spec
        sig = realized_vols(spec, spot, cal.params, cfg)
        sig0 = realized_vols(spec, spot, cal0.params, cfg)
        diff = sig - sig0
        n = len(diff)
        return DifferenceResult(
            difference=float(diff.mean()),
            std_error=float(diff.std(ddof=1) / math.sqrt(n)),
            price=float(sig.mean()),
            price_heston=float(sig0.mean()),
            calibration=cal,
            calibration_heston=cal0,
        )
    product = product_or_spec
    steps = max(effective_steps(cal.params, cfg, product.expiry),
                effective_steps(cal0.params, cfg, product.expiry))
    samples = barrier_samples(cal.params, spot, [product], cfg, steps=steps)[0]
    samples0 = barrier_samples(cal0.params, spot, [product], cfg, steps=steps)[0]
    return difference_from_samples(samples, samples0, cal, cal0)


def difference_from_samples(samples: _ProductSamples, samples0: _ProductSamples,
                            cal: CalibrationResult, cal0: CalibrationResult) -> DifferenceResult:
    diff = samples.discount * samples.adjusted - samples0.discount * samples0.adjusted
    n = len(diff)
    return DifferenceResult(
        difference=float(diff.mean()),
        std_error=float(diff.std(ddof=1) / math.sqrt(n)),
        price=samples.price().value,
        price_heston=samples0.price().value,
        calibration=cal,
        calibration_heston=cal0,
    )


def bs_one_touch_price(spot: float, barrier: float, vol: float, tau: float,
                       r: float = 0.0, q: float = 0.0) -> float:
    """Black-Scholes one touch (pay-at-expiry): discounted first-passage probability."""
    if vol <= 0.0:
        raise ValueError(f"vol must be positive, got {vol}")
    if spot <= 0.0 or barrier <= 0.0 or tau <= 0.0:
        raise ValueError("spot, barrier, tau must be positive")
    df = math.exp(-r * tau)
    if barrier == spot:
        return df
    m = math.log(barrier / spot)
    mu = r - q - 0.5 * vol * vol
    sig = vol * math.sqrt(tau)
    if m > 0.0:
        prob = ndtr((mu * tau - m) / sig) + math.exp(2.0 * mu * m / (vol * vol)) * ndtr(
            (-m - mu * tau) / sig
        )
    else:
        prob = ndtr((m - mu * tau) / sig) + math.exp(2.0 * mu * m / (vol * vol)) * ndtr(
            (m + mu * tau) / sig
        )
    return df * float(prob)


def barrier_from_bs_price(target: float, spot: float, vol: float, tau: float,
                          r: float = 0.0, q: float = 0.0, up: bool = True) -> float:
    """Invert the BS one touch price for the barrier level (bisection to 1e-10)."""
    df = math.exp(-r * tau)
    if not 0.0 < target <= df:
        raise NoSolutionError(f"one touch price {target} unattainable (band (0, {df}])")
    sign = 1.0 if up else -1.0

    def price_at(m: float) -> float:
        return bs_one_touch_price(spot, spot * math.exp(sign * m), vol, tau, r, q)

    lo, hi = 0.0, vol * math.sqrt(tau)
    while price_at(hi) > target:
        hi *= 2.0
        if hi > 100.0:
            raise NoSolutionError(f"no barrier attains one touch price {target}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if price_at(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return spot * math.exp(sign * 0.5 * (lo + hi))
