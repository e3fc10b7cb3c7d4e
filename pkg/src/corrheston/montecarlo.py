"""Path simulation of (ln S, v+, v-) with the quadratic-exponential scheme.

Each sub-variance is advanced by Andersen's QE discretization (matching the
exact CIR conditional mean and variance, non-negative by construction).
The log spot uses the three-factor decomposition onto uncorrelated drivers:
the correlated parts are recovered from the variance increments, the
residual is an independent Gaussian, and the per-step variance integral is
the trapezoid of the endpoint totals.

Paths are processed in fixed-size blocks, each with its own counter-based
RNG stream keyed by (seed, block index), so results are reproducible
bit-for-bit regardless of thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .calibration import feller_ratio
from .model_core import ModelParams

BLOCK_SIZE = 1 << 17
THREADS_ENV_VAR = "CORRHESTON_THREADS"


@dataclass(frozen=True)
class McConfig:
    paths: int = 100_000
    steps_per_year: int = 252
    seed: int = 0
    bridge_enabled: bool = True
    feller_refine_threshold: float = 1.0
    psi_threshold: float = 1.5
    martingale_correction: bool = False
    threads: int | None = None   # None: read CORRHESTON_THREADS, default 1

    def __post_init__(self):
        if self.paths < 1000:
            raise ValueError(f"need at least 1000 paths, got {self.paths}")
        if self.steps_per_year < 50:
            raise ValueError(f"need at least 50 steps/year, got {self.steps_per_year}")
        if not 1.0 <= self.psi_threshold <= 2.0:
            raise ValueError(f"psi_threshold must lie in [1, 2], got {self.psi_threshold}")
        if self.feller_refine_threshold <= 0.0:
            raise ValueError("feller_refine_threshold must be positive")

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, self.threads)
        return max(1, int(os.environ.get(THREADS_ENV_VAR, "1")))


@dataclass
class PathState:
    """Per-path state; arrays share one index."""

    log_spot: np.ndarray
    v_plus: np.ndarray
    v_minus: np.ndarray
    alive: np.ndarray
    sum_sq_returns: np.ndarray

    def view(self, sl: slice) -> "PathState":
        return PathState(self.log_spot[sl], self.v_plus[sl], self.v_minus[sl],
                         self.alive[sl], self.sum_sq_returns[sl])


def effective_steps(params: ModelParams, cfg: McConfig, horizon: float) -> int:
    """Step count after the Feller-ratio refinement heuristic.

    base steps x max(1, ceil(feller_ratio / threshold)); monotone
    non-decreasing in alpha.
    """
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    base = max(1, math.ceil(cfg.steps_per_year * horizon))
    mult = max(1, math.ceil(feller_ratio(params) / cfg.feller_refine_threshold))
    return base * mult


def _cir_moments(v, theta_star: float, beta: float, alpha: float, dt: float):
    decay = math.exp(-beta * dt)
    growth = -math.expm1(-beta * dt)          # 1 - e^{-beta dt}
    m = theta_star + (v - theta_star) * decay
    s2 = (
        v * (alpha * alpha / beta) * decay * growth
        + theta_star * (alpha * alpha / (2.0 * beta)) * growth * growth
    )
    return m, s2


def _qe_step(v, theta_star: float, beta: float, alpha: float, dt: float,
             uniform_draw, psi_threshold: float, want_extras: bool = False):
    """One QE update; optionally returns branch data for the martingale fix.

    Both branches are evaluated densely and selected with ``where`` (cheaper
    than boolean gathers at these sizes); lanes belonging to the other
    branch may produce clamped garbage that the select discards.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(uniform_draw, dtype=float)
    m, s2 = _cir_moments(v, theta_star, beta, alpha, dt)
    extras = None
    if alpha == 0.0:
        out = m.copy()
        return (out, extras) if want_extras else out

    if theta_star > 0.0:
        psi = s2 / (m * m)       # m >= theta*(1 - e^{-beta dt}) > 0
    else:
        dead = m <= 0.0
        psi = np.divide(s2, m * m, out=np.full_like(m, np.inf), where=~dead)
    quad = psi <= psi_threshold

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 2.0 / psi
        b2 = inv - 1.0 + np.sqrt(np.maximum(inv * (inv - 1.0), 0.0))
        a = m / (1.0 + b2)
        draw_quad = a * (np.sqrt(b2) + ndtri(u)) ** 2

        prob_zero = (psi - 1.0) / (psi + 1.0)
        rate = (1.0 - prob_zero) / m
        draw_expo = np.where(u <= prob_zero, 0.0,
                             np.log((1.0 - prob_zero) / (1.0 - u)) / rate)

    out = np.where(quad, draw_quad, draw_expo)
    if theta_star <= 0.0:
        out = np.where(m > 0.0, out, 0.0)
    if want_extras:
        extras = (quad, a, b2, prob_zero, rate)
    return (out, extras) if want_extras else out


def qe_variance_step(v, theta_star: float, beta: float, alpha: float, dt: float,
                     uniform_draw, psi_threshold: float = 1.5):
    """Advance a CIR variance by one QE step using the given uniforms.

    Always returns non-negative values; alpha = 0 reduces to the exact
    conditional mean theta* + (v - theta*) e^{-beta dt}.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    scalar = np.ndim(v) == 0 and np.ndim(uniform_draw) == 0
    out = _qe_step(np.atleast_1d(v), theta_star, beta, alpha, dt,
                   np.atleast_1d(uniform_draw), psi_threshold)
    return float(out[0]) if scalar else out


def bridge_crossing_prob(log_s0, log_s1, log_barrier, effective_variance):
    """Probability a Brownian bridge between the log endpoints touches the barrier.

    Returns 1 where the barrier lies between the endpoints (or is touched),
    exp(-2 (b-x0)(b-x1) / var) otherwise; 0 when the variance vanishes with
    the barrier strictly to one side.
    """
    x0 = np.asarray(log_s0, dtype=float)
    x1 = np.asarray(log_s1, dtype=float)
    var = np.asarray(effective_variance, dtype=float)
    d0 = log_barrier - x0
    d1 = log_barrier - x1
    prod = d0 * d1
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = np.where(var > 0.0, -2.0 * prod / np.where(var > 0.0, var, 1.0), -np.inf)
        p = np.exp(np.minimum(expo, 0.0))
    out = np.where(prod <= 0.0, 1.0, p)
    return float(out) if out.ndim == 0 else out


def _martingale_corrections(rho: float, theta_star: float, params: ModelParams,
                            dt: float, v, extras):
    """Per-path additive log-spot correction making the factor's step a martingale."""
    alpha, beta = params.alpha, params.beta
    quad, a, b2, prob_zero, rate = extras
    coef = rho * beta / alpha - 0.5 * rho * rho
    a_lin = rho / alpha + 0.5 * dt * coef
    c_term = (-rho / alpha + 0.5 * dt * coef) * v - rho * beta * theta_star * dt / alpha
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # quadratic branch: E[exp(A a (b+Z)^2)] known in closed form for 2Aa < 1
        aa = a_lin * a
        denom = np.maximum(1.0 - 2.0 * aa, 1e-300)
        log_m_quad = np.where(
            2.0 * aa < 1.0 - 1e-12,
            a_lin * b2 * a / denom - 0.5 * np.log(denom),
            a_lin * a * (b2 + 1.0),   # fallback: first-moment proxy
        )
        # exponential branch: point mass at 0 plus an exponential tail
        mgf_expo = np.where(
            a_lin < rate - 1e-12,
            prob_zero + (1.0 - prob_zero) * rate / np.maximum(rate - a_lin, 1e-300),
            1.0 + a_lin * (1.0 - prob_zero) / rate,
        )
        log_m = np.where(quad, log_m_quad, np.log(np.maximum(mgf_expo, 1e-300)))
    return -(c_term + log_m)


def _evolve_block(params: ModelParams, spot: float, cfg: McConfig, steps: int,
                  dt: float, sl: slice, block_index: int, terminal: PathState,
                  observers) -> None:
    n = sl.stop - sl.start
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((cfg.seed, block_index))))

    log_s = np.full(n, math.log(spot))
    vp = np.full(n, params.v0_plus)
    vm = np.full(n, params.v0_minus)
    alive = np.ones(n, dtype=bool)
    sum_sq = np.zeros(n)

    alpha = params.alpha
    rho_p, rho_m = params.rho_plus, params.rho_minus
    th_p, th_m = params.theta_plus, params.theta_minus
    beta = params.beta
    mu_dt = (params.r - params.q) * dt
    res_p = 1.0 - rho_p * rho_p
    res_m = 1.0 - rho_m * rho_m
    want_extras = cfg.martingale_correction and alpha > 0.0

    prev = PathState(log_s, vp, vm, alive, sum_sq)
    for step in range(steps):
        u_p = rng.random(n)
        u_m = rng.random(n)
        u_0 = rng.random(n)
        if want_extras:
            vp_new, extras_p = _qe_step(vp, th_p, beta, alpha, dt, u_p,
                                        cfg.psi_threshold, want_extras=True)
            vm_new, extras_m = _qe_step(vm, th_m, beta, alpha, dt, u_m,
                                        cfg.psi_threshold, want_extras=True)
        else:
            vp_new = _qe_step(vp, th_p, beta, alpha, dt, u_p, cfg.psi_threshold)
            vm_new = _qe_step(vm, th_m, beta, alpha, dt, u_m, cfg.psi_threshold)
        vbar_p = 0.5 * (vp + vp_new)
        vbar_m = 0.5 * (vm + vm_new)
        int_var_dt = (vbar_p + vbar_m) * dt
        z0 = ndtri(u_0)
        if alpha > 0.0:
            incr = (
                mu_dt
                - 0.5 * int_var_dt
                + (rho_p / alpha) * (vp_new - vp - beta * (th_p - vbar_p) * dt)
                + (rho_m / alpha) * (vm_new - vm - beta * (th_m - vbar_m) * dt)
                + np.sqrt(np.maximum((res_p * vbar_p + res_m * vbar_m) * dt, 0.0)) * z0
            )
            if want_extras:
                incr += _martingale_corrections(rho_p, th_p, params, dt, vp, extras_p)
                incr += _martingale_corrections(rho_m, th_m, params, dt, vm, extras_m)
        else:
            incr = mu_dt - 0.5 * int_var_dt + np.sqrt(np.maximum(int_var_dt, 0.0)) * z0

        log_new = log_s + incr
        sum_sq += incr * incr
        new = PathState(log_new, vp_new, vm_new, alive, sum_sq)
        for obs in observers:
            obs.observe(sl, step, prev, new, int_var_dt)
        log_s, vp, vm = log_new, vp_new, vm_new
        prev = new

    terminal.log_spot[sl] = log_s
    terminal.v_plus[sl] = vp
    terminal.v_minus[sl] = vm
    terminal.alive[sl] = alive
    terminal.sum_sq_returns[sl] = sum_sq


def evolve_paths(params: ModelParams, spot: float, horizon: float, cfg: McConfig,
                 observers=(), steps: int | None = None) -> PathState:
    """Simulate all paths to the horizon; returns the terminal state.

    ``steps`` overrides the Feller-refined default (exotics align steps to
    fixing dates this way).  Observers see every step of every block and
    must write only into their own per-path arrays (block slices are
    disjoint, so threaded execution stays deterministic).
    """
    if spot <= 0.0:
        raise ValueError(f"spot must be positive, got {spot}")
    if steps is None:
        steps = effective_steps(params, cfg, horizon)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    dt = horizon / steps
    n = cfg.paths

    terminal = PathState(
        log_spot=np.empty(n),
        v_plus=np.empty(n),
        v_minus=np.empty(n),
        alive=np.ones(n, dtype=bool),
        sum_sq_returns=np.empty(n),
    )
    for obs in observers:
        obs.begin(n, steps, dt)

    blocks = [(i, slice(start, min(start + BLOCK_SIZE, n)))
              for i, start in enumerate(range(0, n, BLOCK_SIZE))]
    threads = cfg.resolved_threads()
    if threads == 1 or len(blocks) == 1:
        for i, sl in blocks:
            _evolve_block(params, spot, cfg, steps, dt, sl, i, terminal, observers)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_evolve_block, params, spot, cfg, steps, dt, sl, i,
                            terminal, observers)
                for i, sl in blocks
            ]
            for fut in futures:
                fut.result()
    return terminal
