"""Single-tenor smile calibration.

Calibrates (theta = v0, alpha, rho_bar = rho_a = rho_0) so the model's
implied vols at the 25-delta put, ATM, and 25-delta call strikes match the
quote triple; ``beta`` and ``eta`` are fixed a priori.  Strikes are placed
from the quoted wing vols under the configured conventions and held fixed
inside the solve, with one outer refinement recomputing them from the
model smile (a fixed point that is already satisfied at convergence).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .blackscholes import (
    Conventions,
    DEFAULT_CONVENTIONS,
    SmileQuote,
    atm_strike,
    smile_vols,
    strike_from_delta,
)
from .fourier_pricer import DEFAULT_QUADRATURE, QuadratureConfig, smile_from_model
from .model_core import ModelParams, symmetric_params

THETA_BOUNDS = (1e-6, 4.0)
ALPHA_BOUNDS = (1e-4, 5.0)
RHO_MARGIN = 1e-4
_JACOBIAN_STEP = 1e-5


@dataclass
class CalibrationResult:
    params: ModelParams
    residuals: np.ndarray       # (25d put, ATM, 25d call) vol errors
    iterations: int
    feller_ratio: float


class CalibrationError(RuntimeError):
    """Solver did not converge; carries the best result reached."""

    def __init__(self, message: str, result: CalibrationResult):
        super().__init__(message)
        self.result = result


def feller_ratio(params: ModelParams) -> float:
    """alpha^2 / (2 beta theta); above 1 the origin is attainable for v."""
    theta = params.theta
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    return params.alpha ** 2 / (2.0 * params.beta * theta)


def _bounds(eta: float):
    rho_cap = (1.0 - eta) - RHO_MARGIN
    return np.array([THETA_BOUNDS[0], ALPHA_BOUNDS[0], -rho_cap]), np.array(
        [THETA_BOUNDS[1], ALPHA_BOUNDS[1], rho_cap]
    )


def _project(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lo), hi)


def _initial_guess(quote: SmileQuote, beta: float, eta: float) -> np.ndarray:
    # heuristic: theta from the ATM level, alpha scaled off the butterfly,
    # correlation read off the risk-reversal sign
    theta0 = quote.atm_vol ** 2
    alpha0 = min(max(8.0 * quote.bf25 * np.sqrt(beta) / np.sqrt(quote.tenor), 0.05), 2.0)
    rho0 = 25.0 * quote.rr25
    lo, hi = _bounds(eta)
    return _project(np.array([theta0, alpha0, rho0]), lo, hi)


def _strikes_from_quote(quote: SmileQuote, spot: float, r: float, q: float,
                        conventions: Conventions) -> np.ndarray:
    vol_p, vol_atm, vol_c = smile_vols(quote)
    tau = quote.tenor
    return np.array([
        strike_from_delta(-0.25, spot, vol_p, tau, r, q, is_call=False,
                          conventions=conventions),
        atm_strike(spot, vol_atm, tau, r, q, conventions=conventions),
        strike_from_delta(0.25, spot, vol_c, tau, r, q, is_call=True,
                          conventions=conventions),
    ])


def _make_params(x: np.ndarray, beta: float, eta: float, r: float, q: float) -> ModelParams:
    theta, alpha, rho_bar = x
    return symmetric_params(theta=theta, alpha=alpha, beta=beta,
                            rho_bar=rho_bar, eta=eta, r=r, q=q)


def model_smile_strikes(params: ModelParams, spot: float, tau: float,
                        conventions: Conventions = DEFAULT_CONVENTIONS,
                        cfg: QuadratureConfig = DEFAULT_QUADRATURE,
                        atm_vol_hint: float | None = None) -> np.ndarray:
    """25-delta and ATM strikes consistent with the model's own smile.

    Each wing is the fixed point K = strike_from_delta(target, sigma(K)),
    iterated to 1e-12 relative strike movement.
    """
    strikes = np.empty(3)
    vol_atm = atm_vol_hint or float(
        smile_from_model(params, spot, tau,
                         [atm_strike(spot, 0.1, tau, params.r, params.q, conventions)],
                         cfg)[0]
    )
    # ATM placement may itself depend on the ATM vol (dns convention)
    for _ in range(8):
        k_atm = atm_strike(spot, vol_atm, tau, params.r, params.q, conventions)
        new = float(smile_from_model(params, spot, tau, [k_atm], cfg)[0])
        if abs(new - vol_atm) < 1e-12:
            break
        vol_atm = new
    strikes[1] = atm_strike(spot, vol_atm, tau, params.r, params.q, conventions)
    for idx, (delta, is_call) in ((0, (-0.25, False)), (2, (0.25, True))):
        vol = vol_atm
        k = strike_from_delta(delta, spot, vol, tau, params.r, params.q,
                              is_call=is_call, conventions=conventions)
        for _ in range(20):
            vol = float(smile_from_model(params, spot, tau, [k], cfg)[0])
            k_new = strike_from_delta(delta, spot, vol, tau, params.r, params.q,
                                      is_call=is_call, conventions=conventions)
            if abs(k_new - k) <= 1e-12 * k:
                k = k_new
                break
            k = k_new
        strikes[idx] = k
    return strikes


def calibrate(quote: SmileQuote, spot: float, beta: float, eta: float,
              r: float = 0.0, q: float = 0.0,
              init: np.ndarray | None = None,
              conventions: Conventions = DEFAULT_CONVENTIONS,
              cfg: QuadratureConfig = DEFAULT_QUADRATURE,
              tol: float = 1e-6, max_iter: int = 60) -> CalibrationResult:
    """Fit (theta, alpha, rho_bar) to the quote; raises CalibrationError on failure.

    ``tol`` is the max-norm residual target in absolute vol.  ``init`` may
    override the heuristic starting point as (theta, alpha, rho_bar).
    """
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if eta < 0.0 or eta >= 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    tau = quote.tenor
    targets = np.array(smile_vols(quote))
    lo, hi = _bounds(eta)
    x = _project(np.asarray(init, dtype=float) if init is not None
                 else _initial_guess(quote, beta, eta), lo, hi)

    strikes = _strikes_from_quote(quote, spot, r, q, conventions)
    total_iters = 0

    def residuals(xv: np.ndarray, kv: np.ndarray) -> np.ndarray:
        params = _make_params(xv, beta, eta, r, q)
        return smile_from_model(params, spot, tau, kv, cfg) - targets

    def solve(x0: np.ndarray, kv: np.ndarray, iters_left: int):
        xcur = x0.copy()
        res = residuals(xcur, kv)
        used = 0
        while np.max(np.abs(res)) > tol and used < iters_left:
            used += 1
            jac = np.empty((3, 3))
            for j in range(3):
                step = _JACOBIAN_STEP * max(abs(xcur[j]), 1e-3)
                xb = xcur.copy()
                xb[j] = min(xcur[j] + step, hi[j])
                if xb[j] == xcur[j]:
                    xb[j] = xcur[j] - step
                jac[:, j] = (residuals(xb, kv) - res) / (xb[j] - xcur[j])
            try:
                full_step = np.linalg.solve(jac, -res)
            except np.linalg.LinAlgError:
                full_step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            damping = 1.0
            improved = False
            for _ in range(10):
                cand = _project(xcur + damping * full_step, lo, hi)
                try:
                    res_cand = residuals(cand, kv)
                except Exception:
                    res_cand = None
                if res_cand is not None and (
                    np.linalg.norm(res_cand) < np.linalg.norm(res)
                    or np.max(np.abs(res_cand)) <= tol
                ):
                    xcur, res = cand, res_cand
                    improved = True
                    break
                damping *= 0.5
            if not improved:
                break
        return xcur, res, used

    x, res, used = solve(x, strikes, max_iter)
    total_iters += used

    # one outer fixed-point refinement of the strike placement against the
    # model's own smile deltas (a no-op when the inner solve converged)
    if np.max(np.abs(res)) <= 10.0 * tol:
        params = _make_params(x, beta, eta, r, q)
        refined = model_smile_strikes(params, spot, tau, conventions, cfg,
                                      atm_vol_hint=quote.atm_vol)
        if np.max(np.abs(refined - strikes) / strikes) > 1e-10:
            strikes = refined
            x, res, used = solve(x, strikes, max_iter - total_iters if max_iter > total_iters else 1)
            total_iters += used

    params = _make_params(x, beta, eta, r, q)
    result = CalibrationResult(
        params=params,
        residuals=res,
        iterations=total_iters,
        feller_ratio=feller_ratio(params),
    )
    if np.max(np.abs(res)) > tol:
        raise CalibrationError(
            f"calibration stalled at max residual {np.max(np.abs(res)):.3e} "
            f"after {total_iters} iterations",
            result,
        )
    rho_cap = (1.0 - eta) - RHO_MARGIN
    if rho_cap - abs(params.rho_bar) < 10.0 * RHO_MARGIN:
        warnings.warn(
            f"calibrated rho_bar {params.rho_bar:.4f} pinned near the "
            f"correlation bound +-{rho_cap:.4f}",
            RuntimeWarning,
        )
    return result
