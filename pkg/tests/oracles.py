"""Independent oracles used by the test suite.

Everything here is coded from standard closed forms, written without
reference to the package internals, so agreement is a genuine cross-check:
a classic single-Heston characteristic function and Gil-Pelaez pricer, a
lognormal payoff quadrature, exact CIR conditional moments, the
noncentral-chi-square expectation of a constant-vol realized volatility,
and a brute-force fine-step barrier-crossing simulator.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, hyp1f1


def heston_cf(u, ln_spot, tau, v0, kappa, theta, sigma, rho, r=0.0, q=0.0):
    """Classic Heston characteristic function of ln S_T (stable branch)."""
    u = np.asarray(u, dtype=complex)
    b = kappa - rho * sigma * 1j * u
    d = np.sqrt(b * b + sigma * sigma * (1j * u + u * u))
    g = (b - d) / (b + d)
    e = np.exp(-d * tau)
    c_term = (r - q) * 1j * u * tau + kappa * theta / sigma**2 * (
        (b - d) * tau - 2.0 * np.log((1.0 - g * e) / (1.0 - g))
    )
    d_term = (b - d) / sigma**2 * (1.0 - e) / (1.0 - g * e)
    return np.exp(c_term + d_term * v0 + 1j * u * ln_spot)


def heston_call(spot, strike, tau, v0, kappa, theta, sigma, rho, r=0.0, q=0.0):
    """Heston call by Gil-Pelaez inversion with adaptive quadrature."""
    ln_k = math.log(strike)
    ln_s = math.log(spot)
    phi_minus_i = heston_cf(-1j, ln_s, tau, v0, kappa, theta, sigma, rho, r, q).real

    def integrand_p2(u):
        phi = heston_cf(u, ln_s, tau, v0, kappa, theta, sigma, rho, r, q)
        return (np.exp(-1j * u * ln_k) * phi / (1j * u)).real

    def integrand_p1(u):
        phi = heston_cf(u - 1j, ln_s, tau, v0, kappa, theta, sigma, rho, r, q)
        return (np.exp(-1j * u * ln_k) * phi / (1j * u * phi_minus_i)).real

    kwargs = dict(epsabs=1e-13, epsrel=1e-11, limit=500)
    i1 = quad(integrand_p1, 0.0, 2000.0, **kwargs)[0]
    i2 = quad(integrand_p2, 0.0, 2000.0, **kwargs)[0]
    p1 = 0.5 + i1 / math.pi
    p2 = 0.5 + i2 / math.pi
    return spot * math.exp(-q * tau) * p1 - strike * math.exp(-r * tau) * p2


def heston_put(spot, strike, tau, v0, kappa, theta, sigma, rho, r=0.0, q=0.0):
    call = heston_call(spot, strike, tau, v0, kappa, theta, sigma, rho, r, q)
    return call - spot * math.exp(-q * tau) + strike * math.exp(-r * tau)


def bs_price_quadrature(spot, strike, vol, tau, r=0.0, q=0.0, is_call=True):
    """Black-Scholes price by direct integration of the lognormal payoff."""
    fwd = spot * math.exp((r - q) * tau)
    stdev = vol * math.sqrt(tau)

    def integrand(z):
        s_t = fwd * math.exp(-0.5 * stdev * stdev + stdev * z)
        payoff = max(s_t - strike, 0.0) if is_call else max(strike - s_t, 0.0)
        return payoff * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    value = quad(integrand, -12.0, 12.0, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
    return math.exp(-r * tau) * value


def cir_conditional_moments(v0, theta, beta, alpha, t):
    """Exact mean and variance of a CIR process at time t given v0."""
    e = math.exp(-beta * t)
    mean = theta + (v0 - theta) * e
    var = v0 * alpha**2 / beta * e * (1.0 - e) + theta * alpha**2 / (2.0 * beta) * (1.0 - e) ** 2
    return mean, var


def expected_realized_vol_constant_variance(variance, n_returns, dt, fixings_per_year,
                                            drift_rate=None):
    """E[sqrt(Nd/N sum R_i^2)] when R_i are iid normal (constant variance).

    Each return is N(mu*dt, variance*dt), so the sum of squares is a scaled
    noncentral chi-square; E[sqrt(.)] has a closed form via 1F1.
    """
    mu = -0.5 * variance if drift_rate is None else drift_rate
    lam = n_returns * (mu * dt) ** 2 / (variance * dt)
    e_sqrt_chi2 = (
        math.sqrt(2.0)
        * math.exp(gammaln((n_returns + 1) / 2.0) - gammaln(n_returns / 2.0))
        * hyp1f1(-0.5, n_returns / 2.0, -lam / 2.0)
    )
    return math.sqrt(fixings_per_year / n_returns * variance * dt) * e_sqrt_chi2


def gbm_first_passage_prob(spot, barrier, vol, tau, drift_rate=0.0):
    """Reflection-principle probability that GBM touches the barrier by tau."""
    from scipy.special import ndtr

    m = math.log(barrier / spot)
    mu = drift_rate - 0.5 * vol * vol
    sig = vol * math.sqrt(tau)
    if m == 0.0:
        return 1.0
    if m > 0.0:
        return float(ndtr((mu * tau - m) / sig)
                     + math.exp(2.0 * mu * m / (vol * vol)) * ndtr((-m - mu * tau) / sig))
    return float(ndtr((m - mu * tau) / sig)
                 + math.exp(2.0 * mu * m / (vol * vol)) * ndtr((m + mu * tau) / sig))


def gbm_touch_frequency(spot, barrier, vol, tau, n_paths, substeps, seed, drift=0.0):
    """Fine-grid first-passage estimate for GBM, crossing-corrected per substep.

    Each substep multiplies the survival probability by one minus the exact
    conditional crossing probability of a Brownian bridge over the substep,
    so the estimate targets the continuous monitoring limit.
    """
    rng = np.random.default_rng(seed)
    dt = tau / substeps
    log_s = np.full(n_paths, math.log(spot))
    log_b = math.log(barrier)
    survival = np.ones(n_paths)
    var_step = vol * vol * dt
    for _ in range(substeps):
        log_new = log_s + (drift - 0.5 * vol * vol) * dt \
            + vol * math.sqrt(dt) * rng.standard_normal(n_paths)
        d0 = log_b - log_s
        d1 = log_b - log_new
        cross = np.where(d0 * d1 <= 0.0, 1.0, np.exp(-2.0 * np.maximum(d0 * d1, 0.0) / var_step))
        survival *= 1.0 - cross
        log_s = log_new
    touched = 1.0 - survival
    return touched.mean(), touched.std(ddof=1) / math.sqrt(n_paths)
