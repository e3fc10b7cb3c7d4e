"""Risk-reversal-beta analytics.

Covers the empirical side (OLS of daily risk-reversal changes on spot log
returns from a user CSV) and the model side: the slope k of the model RR
with respect to the initial spot/vol correlation, the implied RR beta
k * alpha * eta^2 / theta, the inverse map estimating eta from an observed
beta, and a simulation consistency check that re-prices the model RR along
paths and regresses its daily changes on the simulated returns.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .blackscholes import (
    Conventions,
    DEFAULT_CONVENTIONS,
    SmileQuote,
    implied_vol,
    strike_from_delta,
)
from .calibration import calibrate
from .charfn import riccati_closed_form
from .fourier_pricer import (
    DEFAULT_QUADRATURE,
    QuadratureConfig,
    _find_truncation,
    _panel_rule,
    price_vanilla,
)
from .blackscholes import VanillaOption
from .model_core import ModelParams
from .montecarlo import McConfig, PathState, evolve_paths

WING_DELTA = 0.25
BUSINESS_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class MarketSeries:
    """Aligned daily closes: spot levels and one tenor's 25-delta RR (vol fraction)."""

    dates: tuple
    spot: np.ndarray
    rr: np.ndarray

    def __post_init__(self):
        if not (len(self.dates) == len(self.spot) == len(self.rr)):
            raise ValueError("dates, spot, rr must have equal lengths")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if not (np.isfinite(self.spot).all() and np.isfinite(self.rr).all()):
            raise ValueError("spot and rr must be finite")
        if np.any(self.spot <= 0.0):
            raise ValueError("spot must be positive")


@dataclass
class RrBetaEstimate:
    beta_rr: float        # vol change per unit log return
    r_squared: float
    corr: float           # sqrt(R^2) signed by the slope
    n: int                # number of daily changes in the regression
    intercept: float = 0.0
    beta_se: float = float("nan")


def load_market_series(path) -> MarketSeries:
    """Read a `date,spot,rr` CSV; ISO dates, rr quoted in vol percentage points.

    Rows with missing or unparsable fields are dropped with a warning count.
    """
    dates, spots, rrs = [], [], []
    dropped = 0
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        missing = {"date", "spot", "rr"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"market CSV missing columns: {sorted(missing)}")
        for row in reader:
            try:
                day = _dt.date.fromisoformat(row["date"].strip())
                spot = float(row["spot"])
                rr = float(row["rr"]) / 100.0
            except (ValueError, AttributeError, TypeError):
                dropped += 1
                continue
            dates.append(day)
            spots.append(spot)
            rrs.append(rr)
    if dropped:
        warnings.warn(f"dropped {dropped} malformed rows from {path}", RuntimeWarning)
    return MarketSeries(tuple(dates), np.asarray(spots), np.asarray(rrs))


def estimate_rr_beta(series: MarketSeries) -> RrBetaEstimate:
    """OLS of daily RR changes on daily spot log returns (intercept fitted)."""
    x = np.diff(np.log(series.spot))
    y = np.diff(series.rr)
    if len(x) < 30:
        raise ValueError(f"need at least 30 daily changes, got {len(x)}")
    return _ols(x, y)


def _ols(x: np.ndarray, y: np.ndarray) -> RrBetaEstimate:
    n = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx <= 0.0:
        raise ValueError("spot returns have zero variance")
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - slope * x - intercept
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    se = math.sqrt(ss_res / max(n - 2, 1) / sxx)
    return RrBetaEstimate(
        beta_rr=slope,
        r_squared=r2,
        corr=math.copysign(math.sqrt(r2), slope),
        n=n,
        intercept=intercept,
        beta_se=se,
    )


def _wing(params: ModelParams, spot: float, tau: float, delta: float, is_call: bool,
          conventions: Conventions, cfg: QuadratureConfig) -> tuple[float, float]:
    """(strike, vol) of the model-smile wing whose BS delta equals ``delta``."""
    vol = math.sqrt(max(params.v0, 1e-8))
    strike = strike_from_delta(delta, spot, vol, tau, params.r, params.q,
                               is_call=is_call, conventions=conventions)
    for _ in range(30):
        price = price_vanilla(VanillaOption(strike, tau, is_call), spot, params, cfg)
        vol = implied_vol(price, spot, strike, tau, params.r, params.q, is_call)
        new = strike_from_delta(delta, spot, vol, tau, params.r, params.q,
                                is_call=is_call, conventions=conventions)
        if abs(new - strike) <= 1e-12 * strike:
            return new, vol
        strike = new
    return strike, vol


def model_rr(params: ModelParams, spot: float, tau: float,
             conventions: Conventions = DEFAULT_CONVENTIONS,
             cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Model 25-delta risk reversal: call wing vol minus put wing vol."""
    _, vol_call = _wing(params, spot, tau, WING_DELTA, True, conventions, cfg)
    _, vol_put = _wing(params, spot, tau, -WING_DELTA, False, conventions, cfg)
    return vol_call - vol_put


def rr_correlation_slope(params: ModelParams, spot: float, tau: float,
                         bump: float = 0.01,
                         conventions: Conventions = DEFAULT_CONVENTIONS,
                         cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Central-difference slope of the model RR in the initial correlation.

    The bump shrinks automatically when rho_0 sits close to one edge of its
    admissible range.
    """
    if params.eta <= 0.0:
        raise ValueError("rr_correlation_slope requires eta > 0")
    rho_0 = params.rho_0
    room_up = params.rho_plus - rho_0
    room_dn = rho_0 - params.rho_minus
    b = min(bump, 0.99 * room_up, 0.99 * room_dn)
    if b <= 1e-8:
        raise ValueError("rho_0 too close to its range edge to take a slope")
    rr_up = model_rr(params.with_rho_0(rho_0 + b), spot, tau, conventions, cfg)
    rr_dn = model_rr(params.with_rho_0(rho_0 - b), spot, tau, conventions, cfg)
    return (rr_up - rr_dn) / (2.0 * b)


def model_k_tau(quote: SmileQuote, spot: float, beta: float, eta: float, tau: float,
                bump: float = 0.01, r: float = 0.0, q: float = 0.0,
                conventions: Conventions = DEFAULT_CONVENTIONS,
                cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """RR/correlation slope k(tau) after calibrating the quote at tenor ``tau``."""
    tenor_quote = SmileQuote(tenor=tau, atm_vol=quote.atm_vol, rr25=quote.rr25,
                             bf25=quote.bf25)
    cal = calibrate(tenor_quote, spot, beta, eta, r, q, conventions=conventions, cfg=cfg)
    return rr_correlation_slope(cal.params, spot, tau, bump, conventions, cfg)


def model_rr_beta(k_tau: float, alpha: float, eta: float, theta: float) -> float:
    """Model risk reversal beta: k(tau) * alpha * eta^2 / theta."""
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    return k_tau * alpha * eta * eta / theta


def estimate_eta(beta_rr_target: float, k_tau: float, alpha: float, theta: float) -> float:
    """Invert the RR beta for eta: sqrt(theta * beta_rr / (k * alpha))."""
    if beta_rr_target < 0.0:
        raise ValueError("beta_rr_target must be non-negative")
    if min(k_tau, alpha, theta) <= 0.0:
        raise ValueError("k_tau, alpha, theta must be positive")
    return math.sqrt(theta * beta_rr_target / (k_tau * alpha))


class _DailyStateRecorder:
    """Stores (log spot, v+, v-) after every step of a daily-step run."""

    def begin(self, n_paths: int, n_steps: int, dt: float):
        self.log_spot = np.empty((n_steps, n_paths))
        self.v_plus = np.empty((n_steps, n_paths))
        self.v_minus = np.empty((n_steps, n_paths))

    def observe(self, sl, step, prev: PathState, new: PathState, int_var_dt):
        self.log_spot[step, sl] = new.log_spot
        self.v_plus[step, sl] = new.v_plus
        self.v_minus[step, sl] = new.v_minus


def _batched_wing_vols(params: ModelParams, v_plus: np.ndarray, v_minus: np.ndarray,
                       tau: float, delta: float, is_call: bool,
                       conventions: Conventions, nodes: int = 192,
                       chunk: int = 16384) -> np.ndarray:
    """Delta-consistent wing vols for many (v+, v-) states at one tenor.

    Prices in units of spot (the model is spot-homogeneous) on a shared
    Fourier grid: the Riccati terms are state-independent, so each state
    only re-weights exp(B+ v+ + B- v-).
    """
    r, q = params.r, params.q
    a = DEFAULT_QUADRATURE.damping if is_call else -1.0 - DEFAULT_QUADRATURE.damping
    truncation = 1.5 * _find_truncation(params, tau, a)
    v_nodes, w_nodes = _panel_rule(truncation, nodes)
    xi = v_nodes - 1j * (a + 1.0)
    sol = riccati_closed_form(xi, tau, params)
    denom = (a + 1j * v_nodes) * (a + 1.0 + 1j * v_nodes)
    kernel_w = w_nodes * math.exp(-r * tau) / denom   # absorb weights and discount

    mag = delta if is_call else -delta
    if conventions.delta_style == "spot":
        mag *= math.exp(q * tau)
    d1 = ndtri(mag) if is_call else -ndtri(mag)
    drift = (r - q) * tau
    df = math.exp(-r * tau)
    fwd = math.exp(drift)
    sqrt_tau = math.sqrt(tau)

    def bs_price_vec(x, vol):
        stdev = np.maximum(vol, 1e-8) * sqrt_tau
        dd1 = (drift - x) / stdev + 0.5 * stdev
        dd2 = dd1 - stdev
        k = np.exp(x)
        if is_call:
            return df * (fwd * ndtr(dd1) - k * ndtr(dd2))
        return df * (k * ndtr(-dd2) - fwd * ndtr(-dd1))

    def bs_vega_vec(x, vol):
        stdev = np.maximum(vol, 1e-8) * sqrt_tau
        dd1 = (drift - x) / stdev + 0.5 * stdev
        return df * fwd * sqrt_tau * np.exp(-0.5 * dd1 * dd1) / math.sqrt(2.0 * math.pi)

    out = np.empty(len(v_plus))
    for start in range(0, len(v_plus), chunk):
        sl = slice(start, min(start + chunk, len(v_plus)))
        state = np.exp(
            sol.a[None, :]
            + np.outer(v_plus[sl], sol.b_plus)
            + np.outer(v_minus[sl], sol.b_minus)
        )
        psi = state * kernel_w[None, :]
        vol = np.full(sl.stop - sl.start, math.sqrt(max(params.theta, 1e-6)))
        for _ in range(8):
            x = drift + (0.5 * vol * sqrt_tau - d1) * vol * sqrt_tau
            phase = np.exp(np.outer(x, -1j * v_nodes))
            price = np.exp(-a * x) / math.pi * np.einsum("jm,jm->j", psi, phase).real
            vol_new = vol.copy()
            for _ in range(5):
                diff = bs_price_vec(x, vol_new) - price
                vol_new = np.clip(vol_new - diff / np.maximum(bs_vega_vec(x, vol_new), 1e-12),
                                  1e-6, 5.0)
            converged = np.max(np.abs(vol_new - vol)) < 1e-9
            vol = vol_new
            if converged:
                break
        out[sl] = vol
    return out


def mc_rr_beta(params: ModelParams, quote: SmileQuote, spot: float, cfg: McConfig,
               horizon_days: int = 60,
               conventions: Conventions = DEFAULT_CONVENTIONS) -> RrBetaEstimate:
    """Simulated RR beta: re-price the model RR daily along paths and regress.

    Time steps are business days (252/year); the RR tenor is the quote's.
    Pooled daily changes across paths feed the same OLS as the empirical
    estimator.
    """
    if horizon_days < 2:
        raise ValueError("need at least two days to difference")
    recorder = _DailyStateRecorder()
    evolve_paths(params, spot, horizon_days / BUSINESS_DAYS_PER_YEAR, cfg,
                 observers=[recorder], steps=horizon_days)

    log_spot = np.vstack([np.full((1, cfg.paths), math.log(spot)), recorder.log_spot])
    v_plus = np.vstack([np.full((1, cfg.paths), params.v0_plus), recorder.v_plus])
    v_minus = np.vstack([np.full((1, cfg.paths), params.v0_minus), recorder.v_minus])

    tau = quote.tenor
    flat_p = v_plus.ravel()
    flat_m = v_minus.ravel()
    vol_call = _batched_wing_vols(params, flat_p, flat_m, tau, WING_DELTA, True, conventions)
    vol_put = _batched_wing_vols(params, flat_p, flat_m, tau, -WING_DELTA, False, conventions)
    rr = (vol_call - vol_put).reshape(v_plus.shape)

    d_rr = np.diff(rr, axis=0).ravel()
    d_x = np.diff(log_spot, axis=0).ravel()
    return _ols(d_x, d_rr)
