"""Parameter set and instantaneous-correlation formulas.

The model is a Double Heston variant: total variance is the sum of two CIR
sub-variances sharing mean reversion ``beta`` and vol-of-vol ``alpha`` but
loading on spot shocks with different correlations ``rho_bar + eta`` and
``rho_bar - eta``.  The mix of the two sub-variances makes the effective
spot/volatility correlation stochastic, bounded in
``[rho_bar - eta, rho_bar + eta]``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

# Tolerance absorbing float drift at correlation-range boundaries.
CORR_TOL = 1e-12

# Total variance below this is treated as degenerate (0/0 correlation).
MIN_TOTAL_VARIANCE = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Raw SDE parameters.

    beta        mean-reversion rate of both sub-variances (1/years)
    alpha       vol-of-vol on each sub-variance (loads on sqrt(v))
    theta_plus  long-run level of the high-correlation sub-variance
    theta_minus long-run level of the low-correlation sub-variance
    rho_bar     center of the spot/vol correlation range
    eta         correlation half-range (eta = 0 is plain Heston)
    v0_plus     initial high-correlation sub-variance
    v0_minus    initial low-correlation sub-variance
    r, q        domestic / foreign continuously-compounded rates
    """

    beta: float
    alpha: float
    theta_plus: float
    theta_minus: float
    rho_bar: float
    eta: float
    v0_plus: float
    v0_minus: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        for name in ("theta_plus", "theta_minus", "v0_plus", "v0_minus", "eta"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not (self.rho_bar - self.eta > -1.0 and self.rho_bar + self.eta < 1.0):
            raise ValueError(
                f"correlation range [{self.rho_bar - self.eta}, {self.rho_bar + self.eta}] "
                "must lie strictly inside (-1, 1)"
            )

    @property
    def theta(self) -> float:
        return self.theta_plus + self.theta_minus

    @property
    def v0(self) -> float:
        return self.v0_plus + self.v0_minus

    @property
    def rho_plus(self) -> float:
        return self.rho_bar + self.eta

    @property
    def rho_minus(self) -> float:
        return self.rho_bar - self.eta

    @property
    def rho_a(self) -> float:
        """Long-run spot/vol correlation (correlation of the stationary mix)."""
        if self.theta <= 0.0:
            return self.rho_bar
        return self.rho_bar + self.eta * (self.theta_plus - self.theta_minus) / self.theta

    @property
    def rho_0(self) -> float:
        """Initial spot/vol correlation."""
        if self.v0 <= 0.0:
            return self.rho_bar
        return self.rho_bar + self.eta * (self.v0_plus - self.v0_minus) / self.v0

    def with_rho_0(self, rho_0: float) -> "ModelParams":
        """New params with the initial correlation moved to ``rho_0``.

        Re-splits the initial variance v0 while keeping everything else;
        requires eta > 0 and rho_0 within the allowed range.
        """
        if self.eta <= 0.0:
            raise ValueError("cannot move rho_0 when eta = 0")
        frac = (rho_0 - self.rho_bar) / self.eta
        if abs(frac) > 1.0 + CORR_TOL:
            raise ValueError(
                f"rho_0={rho_0} outside [{self.rho_minus}, {self.rho_plus}]"
            )
        frac = min(max(frac, -1.0), 1.0)
        v0 = self.v0
        return replace(self, v0_plus=0.5 * v0 * (1.0 + frac), v0_minus=0.5 * v0 * (1.0 - frac))


@dataclass(frozen=True)
class NaturalParams:
    """Desk-facing parameterization.

    theta   total long-run variance (theta_plus + theta_minus)
    rho_a   long-run spot/vol correlation
    rho_0   initial spot/vol correlation
    v0      total initial variance
    """

    theta: float
    rho_a: float
    rho_0: float
    v0: float
    beta: float
    alpha: float
    eta: float
    r: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.v0 > 0.0:
            raise ValueError(f"v0 must be positive, got {self.v0}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.alpha < 0.0 or self.eta < 0.0:
            raise ValueError("alpha and eta must be non-negative")
        for name in ("rho_a", "rho_0"):
            if not -1.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (-1, 1)")


def _split_fraction(corr: float, rho_bar: float, eta: float, what: str) -> float:
    """(corr - rho_bar)/eta clipped to [-1, 1], validating the range."""
    if eta == 0.0:
        if abs(corr - rho_bar) > CORR_TOL:
            raise ValueError(
                f"eta = 0 requires {what} = rho_bar, got {corr} vs {rho_bar}"
            )
        return 0.0
    frac = (corr - rho_bar) / eta
    if abs(frac) > 1.0 + CORR_TOL:
        raise ValueError(
            f"{what}={corr} outside allowed range [{rho_bar - eta}, {rho_bar + eta}]"
        )
    return min(max(frac, -1.0), 1.0)


def to_raw(natural: NaturalParams, rho_bar: float) -> ModelParams:
    """Map (theta, rho_a, rho_0, v0) onto the raw sub-variance split.

    Inverts rho_a = rho_bar + eta*(theta_plus - theta_minus)/theta and the
    analogous relation for rho_0.  When eta = 0 the split is unidentified
    and both pairs are split equally (continuous with the eta -> 0 limit).
    """
    fa = _split_fraction(natural.rho_a, rho_bar, natural.eta, "rho_a")
    f0 = _split_fraction(natural.rho_0, rho_bar, natural.eta, "rho_0")
    return ModelParams(
        beta=natural.beta,
        alpha=natural.alpha,
        theta_plus=0.5 * natural.theta * (1.0 + fa),
        theta_minus=0.5 * natural.theta * (1.0 - fa),
        rho_bar=rho_bar,
        eta=natural.eta,
        v0_plus=0.5 * natural.v0 * (1.0 + f0),
        v0_minus=0.5 * natural.v0 * (1.0 - f0),
        r=natural.r,
        q=natural.q,
    )


def to_natural(params: ModelParams) -> NaturalParams:
    """Inverse of :func:`to_raw` (rho_bar is carried on ModelParams)."""
    return NaturalParams(
        theta=params.theta,
        rho_a=params.rho_a,
        rho_0=params.rho_0,
        v0=params.v0,
        beta=params.beta,
        alpha=params.alpha,
        eta=params.eta,
        r=params.r,
        q=params.q,
    )


def heston_params(theta: float, alpha: float, beta: float, rho: float,
                  v0: float, r: float = 0.0, q: float = 0.0) -> ModelParams:
    """Plain Heston (eta = 0) expressed in this model's parameter set."""
    return to_raw(
        NaturalParams(theta=theta, rho_a=rho, rho_0=rho, v0=v0,
                      beta=beta, alpha=alpha, eta=0.0, r=r, q=q),
        rho_bar=rho,
    )


def symmetric_params(theta: float, alpha: float, beta: float, rho_bar: float,
                     eta: float, v0: float | None = None,
                     r: float = 0.0, q: float = 0.0) -> ModelParams:
    """Params with rho_a = rho_0 = rho_bar, i.e. equal sub-variance splits."""
    v0 = theta if v0 is None else v0
    return to_raw(
        NaturalParams(theta=theta, rho_a=rho_bar, rho_0=rho_bar, v0=v0,
                      beta=beta, alpha=alpha, eta=eta, r=r, q=q),
        rho_bar=rho_bar,
    )


def expected_integrated_variance(params: ModelParams, tau: float) -> float:
    """E[int_0^tau v_t dt] = theta*tau + (v0 - theta)(1 - e^{-beta tau})/beta.

    Exact for any alpha by linearity; when alpha = 0 it is the (deterministic)
    integrated variance itself.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    return params.theta * tau + (params.v0 - params.theta) * (
        -np.expm1(-params.beta * tau)
    ) / params.beta


def instant_correlation(v_plus, v_minus, rho_bar: float, eta: float):
    """Instantaneous spot/vol correlation implied by the sub-variance mix.

    rho = rho_bar + eta * (v_plus - v_minus) / (v_plus + v_minus)

    Accepts scalars or arrays.  Raises if any total variance falls below
    ``MIN_TOTAL_VARIANCE`` (callers simulating paths must guard).
    """
    v_plus = np.asarray(v_plus, dtype=float)
    v_minus = np.asarray(v_minus, dtype=float)
    if np.any(v_plus < 0.0) or np.any(v_minus < 0.0):
        raise ValueError("sub-variances must be non-negative")
    total = v_plus + v_minus
    if np.any(total < MIN_TOTAL_VARIANCE):
        raise ValueError(
            f"total variance below {MIN_TOTAL_VARIANCE}: correlation undefined"
        )
    out = rho_bar + eta * (v_plus - v_minus) / total
    return float(out) if out.ndim == 0 else out


def spot_corr_correlation(corr, rho_bar: float, eta: float):
    """Correlation between spot returns and moves in the spot/vol correlation.

    Equals sqrt(eta^2 - (rho_bar - corr)^2): maximal (= eta) at
    corr = rho_bar, zero at the edges of the correlation range.
    """
    corr = np.asarray(corr, dtype=float)
    arg = eta * eta - (rho_bar - corr) ** 2
    if np.any(arg < -CORR_TOL):
        raise ValueError(
            f"correlation outside [{rho_bar - eta}, {rho_bar + eta}]"
        )
    out = np.sqrt(np.maximum(arg, 0.0))
    return float(out) if out.ndim == 0 else out


def correlation_sde_coefficients(v, corr, params: ModelParams):
    """Drift and diffusion of the instantaneous correlation process.

    drift     = beta * (theta / v) * (rho_a - corr)
    diffusion = (alpha / sqrt(v)) * sqrt(eta^2 - (corr - rho_bar)^2)

    The diffusion vanishes exactly at corr = rho_bar +- eta, which keeps the
    correlation inside its range.  Returns (drift, diffusion); both are
    per-year quantities.
    """
    v = np.asarray(v, dtype=float)
    corr = np.asarray(corr, dtype=float)
    if np.any(v <= 0.0):
        raise ValueError("total variance must be positive")
    arg = params.eta ** 2 - (corr - params.rho_bar) ** 2
    if np.any(arg < -CORR_TOL):
        raise ValueError(
            f"correlation outside [{params.rho_minus}, {params.rho_plus}]"
        )
    drift = params.beta * (params.theta / v) * (params.rho_a - corr)
    diffusion = params.alpha / np.sqrt(v) * np.sqrt(np.maximum(arg, 0.0))
    if drift.ndim == 0:
        return float(drift), float(diffusion)
    return drift, diffusion
