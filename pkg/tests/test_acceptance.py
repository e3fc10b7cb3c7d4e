"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete.  The barrier-impact criteria share one Monte Carlo
sweep fixture (the paths are generated once per model and monitored
against every barrier simultaneously).
"""

import math
import time

import numpy as np
import pytest

from conftest import SPOT, smile_params
from oracles import (
    cir_conditional_moments,
    expected_realized_vol_constant_variance,
    heston_call,
)

from corrheston.analytics import estimate_eta, estimate_rr_beta, rr_correlation_slope
from corrheston.blackscholes import SmileQuote, VanillaOption, strike_from_delta, smile_vols
from corrheston.calibration import calibrate
from corrheston.charfn import char_fn, riccati_closed_form, riccati_ode_oracle
from corrheston.exotics import (
    DOWN_AND_OUT_CALL,
    ONE_TOUCH,
    UP_AND_OUT_PUT,
    BarrierProduct,
    VolSwapSpec,
    barrier_from_bs_price,
    barrier_samples,
    realized_vols,
)
from corrheston.fourier_pricer import price_vanilla
from corrheston.model_core import heston_params, instant_correlation, symmetric_params
from corrheston.montecarlo import McConfig, effective_steps, evolve_paths
from test_analytics import make_series
from test_calibration import synthetic_quote

pytestmark = pytest.mark.acceptance

QUOTE = SmileQuote(tenor=0.25, atm_vol=0.08, rr25=0.01, bf25=0.005)
BETA = 2.0


def report(num: int, description: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:02d} {status}  {description}  {detail}".rstrip())
    assert ok, f"criterion {num}: {description}: {detail}"


def _random_params(rng):
    theta = rng.uniform(0.002, 0.09)
    alpha = rng.uniform(0.05, 1.0)
    beta = rng.uniform(0.5, 5.0)
    eta = rng.uniform(0.0, 0.45)
    rho_bar = rng.uniform(-(0.95 - eta), 0.95 - eta)
    return symmetric_params(theta=theta, alpha=alpha, beta=beta, rho_bar=rho_bar,
                            eta=eta, v0=theta * rng.uniform(0.5, 2.0),
                            r=rng.uniform(-0.02, 0.05), q=rng.uniform(-0.02, 0.05))


def test_criterion_01_heston_limit_equivalence():
    start = time.perf_counter()
    p = heston_params(theta=0.01, alpha=0.3, beta=BETA, rho=0.0, v0=0.01)
    tenors = (0.1, 0.25, 1.0, 3.0)
    z_grid = np.linspace(-3.0, 3.0, 15)
    worst = 0.0
    for tau in tenors:
        strikes = SPOT * np.exp(0.1 * math.sqrt(tau) * z_grid)
        for strike in strikes:
            ours = price_vanilla(VanillaOption(float(strike), tau, True), SPOT, p)
            ref = heston_call(SPOT, float(strike), tau, 0.01, BETA, 0.01, 0.3, 0.0)
            worst = max(worst, abs(ours - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    report(1, "Fourier vanillas match semi-analytic Heston at eta=0",
           worst < 1e-8 and elapsed < 5.0,
           f"worst rel err {worst:.2e} over 60 prices in {elapsed:.1f}s")


def test_criterion_02_riccati_closed_form_vs_ode():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    xi = np.linspace(-200.0, 200.0, 64)
    worst = 0.0
    for _ in range(20):
        p = _random_params(rng)
        for tau in (0.05, 0.25, 1.0, 5.0):
            cf = riccati_closed_form(xi, tau, p)
            ode = riccati_ode_oracle(xi, tau, p, steps=4000)
            worst = max(
                worst,
                float(np.max(np.abs(cf.a - ode.a))),
                float(np.max(np.abs(cf.b_plus - ode.b_plus))),
                float(np.max(np.abs(cf.b_minus - ode.b_minus))),
            )
    elapsed = time.perf_counter() - start
    report(2, "closed-form Riccati matches RK4 oracle on the xi/tau grid",
           worst < 1e-9 and elapsed < 30.0,
           f"max |deviation| {worst:.2e} in {elapsed:.1f}s")


def test_criterion_03_cf_sanity():
    rng = np.random.default_rng(7)
    xi = np.linspace(0.25, 180.0, 40)
    ok = True
    detail = []
    for _ in range(10):
        p = _random_params(rng)
        tau = rng.uniform(0.05, 3.0)
        if char_fn(0.0, tau, SPOT, p) != 1.0 + 0.0j:
            ok, _ = False, detail.append("phi(0) != 1")
        fwd = SPOT * math.exp((p.r - p.q) * tau)
        if abs(char_fn(-1j, tau, SPOT, p) - fwd) > 1e-10 * fwd:
            ok, _ = False, detail.append("martingale")
        herm = np.max(np.abs(char_fn(-xi, tau, SPOT, p) - np.conj(char_fn(xi, tau, SPOT, p))))
        if herm > 1e-12:
            ok, _ = False, detail.append(f"hermitian {herm:.1e}")
    report(3, "phi(0)=1 exact, martingale 1e-10, Hermitian symmetry 1e-12",
           ok, "; ".join(detail) or "10 random parameter sets")


@pytest.mark.slow
def test_criterion_04_mc_vs_fourier_on_calibrated_model():
    start = time.perf_counter()
    cal = calibrate(QUOTE, SPOT, BETA, 0.4)
    vol_p, vol_atm, vol_c = smile_vols(QUOTE)
    strikes = [
        (strike_from_delta(-0.25, SPOT, vol_p, 0.25, is_call=False), False),
        (SPOT, True),
        (strike_from_delta(0.25, SPOT, vol_c, 0.25, is_call=True), True),
    ]
    cfg = McConfig(paths=1_000_000, steps_per_year=252, seed=2024)
    term = evolve_paths(cal.params, SPOT, 0.25, cfg)
    s_t = np.exp(term.log_spot)
    ok = True
    details = []
    for strike, is_call in strikes:
        payoff = np.maximum(s_t - strike, 0.0) if is_call else np.maximum(strike - s_t, 0.0)
        mc = payoff.mean()
        se = payoff.std(ddof=1) / math.sqrt(len(payoff))
        ref = price_vanilla(VanillaOption(strike, 0.25, is_call), SPOT, cal.params)
        t_stat = (mc - ref) / se
        details.append(f"K={strike:.2f}: t={t_stat:+.2f}")
        ok &= abs(t_stat) < 3.0
    elapsed = time.perf_counter() - start
    report(4, "calibrated-model MC vanillas within 3 SE of Fourier at 1e6 paths",
           ok and elapsed < 120.0, "; ".join(details) + f" in {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_05_calibration_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    worst_rel = 0.0
    worst_resid = 0.0
    for _ in range(50):
        theta = rng.uniform(0.004, 0.04)
        alpha = rng.uniform(0.12, 0.65)
        eta = rng.choice([0.0, 0.15, 0.3, 0.45])
        rho_bar = rng.uniform(-0.5, 0.5) * (1.0 - eta)
        gen = symmetric_params(theta=theta, alpha=alpha, beta=BETA, rho_bar=rho_bar, eta=eta)
        quote = synthetic_quote(gen, SPOT, 0.25)
        res = calibrate(quote, SPOT, BETA, float(eta), tol=1e-8)
        worst_resid = max(worst_resid, float(np.max(np.abs(res.residuals))))
        worst_rel = max(
            worst_rel,
            abs(res.params.theta - theta) / theta,
            abs(res.params.alpha - alpha) / alpha,
            abs(res.params.rho_bar - rho_bar) / max(abs(rho_bar), 1.0),
        )
    elapsed = time.perf_counter() - start
    report(5, "50 synthetic-smile calibrations recover generating params",
           worst_rel < 1e-3 and worst_resid <= 1e-6 and elapsed < 120.0,
           f"worst rel err {worst_rel:.2e}, worst residual {worst_resid:.1e}, {elapsed:.0f}s")


def test_criterion_06_calibrated_alpha_decreases_with_eta():
    etas = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    results = [calibrate(QUOTE, SPOT, BETA, eta) for eta in etas]
    alphas = [r.params.alpha for r in results]
    fellers = [r.feller_ratio for r in results]
    ok = all(b < a for a, b in zip(alphas, alphas[1:])) and all(
        b < a for a, b in zip(fellers, fellers[1:])
    )
    report(6, "calibrated alpha and Feller ratio strictly decrease in eta", ok,
           "alpha " + " > ".join(f"{a:.4f}" for a in alphas))


def test_criterion_07_k_tau_point_check():
    p = smile_params(0.25)
    k = rr_correlation_slope(p, SPOT, 0.25)
    report(7, "k(0.25) at theta=0.01, alpha=0.3, beta=2 lies in [0.031, 0.043]",
           0.031 <= k <= 0.043, f"k = {k:.4f}")


def test_criterion_08_eta_estimation_round_trip():
    eta = estimate_eta(0.16, 0.037, 0.3, 0.01)
    report(8, "estimate_eta(0.16, 0.037, 0.3, 0.01) in [0.35, 0.42]",
           0.35 <= eta <= 0.42, f"eta = {eta:.4f}")


BARRIER_TARGETS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@pytest.fixture(scope="module")
def barrier_sweep():
    """Shared MC sweep: one touches and ATM knockouts on the same barriers.

    Path generation happens once per model on a common time grid; all
    barriers are monitored simultaneously and etas 0.25 / 0.5 are priced
    only at the 50% BS-price barriers (for the quadratic-in-eta check).
    """
    start = time.perf_counter()
    tau, vol = QUOTE.tenor, QUOTE.atm_vol
    grid = []
    for side in ("up", "down"):
        for target in BARRIER_TARGETS:
            barrier = barrier_from_bs_price(target, SPOT, vol, tau, up=side == "up")
            grid.append((side, target, barrier))

    def products_for(barriers):
        prods = []
        for side, target, barrier in barriers:
            prods.append(BarrierProduct(ONE_TOUCH, barrier, tau))
            if side == "down":
                prods.append(BarrierProduct(DOWN_AND_OUT_CALL, barrier, tau, strike=SPOT))
            else:
                prods.append(BarrierProduct(UP_AND_OUT_PUT, barrier, tau, strike=SPOT))
        return prods

    cfg = McConfig(paths=1_000_000, steps_per_year=252, seed=99)
    cals = {eta: calibrate(QUOTE, SPOT, BETA, eta) for eta in (0.0, 0.25, 0.4, 0.5)}
    steps = max(effective_steps(c.params, cfg, tau) for c in cals.values())

    mid = [g for g in grid if g[1] == 0.5]
    all_products = products_for(grid)
    mid_products = products_for(mid)
    samples = {
        0.0: barrier_samples(cals[0.0].params, SPOT, all_products, cfg, steps=steps),
        0.4: barrier_samples(cals[0.4].params, SPOT, all_products, cfg, steps=steps),
        0.25: barrier_samples(cals[0.25].params, SPOT, mid_products, cfg, steps=steps),
        0.5: barrier_samples(cals[0.5].params, SPOT, mid_products, cfg, steps=steps),
    }

    def diff_stats(eta, index, base_index):
        smp = samples[eta][index]
        base = samples[0.0][base_index]
        d = smp.discount * smp.adjusted - base.discount * base.adjusted
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))

    out = {"grid": grid, "mid": mid, "elapsed": None, "ot": {}, "ko": {}, "ot_price": {}}
    for i, (side, target, barrier) in enumerate(grid):
        out["ot"][(0.4, side, target)] = diff_stats(0.4, 2 * i, 2 * i)
        out["ko"][(0.4, side, target)] = diff_stats(0.4, 2 * i + 1, 2 * i + 1)
        out["ot_price"][(side, target)] = samples[0.4][2 * i].price().value
    for j, (side, target, barrier) in enumerate(mid):
        base_index = 2 * grid.index((side, target, barrier))
        for eta in (0.25, 0.5):
            out["ot"][(eta, side, target)] = diff_stats(eta, 2 * j, base_index)
            out["ko"][(eta, side, target)] = diff_stats(eta, 2 * j + 1, base_index + 1)
    out["elapsed"] = time.perf_counter() - start
    out["steps"] = steps
    return out


@pytest.mark.slow
def test_criterion_09_one_touch_impact(barrier_sweep):
    ot = barrier_sweep["ot"]
    all_positive = True
    worst_se = 0.0
    for side, target, _ in barrier_sweep["grid"]:
        diff, se = ot[(0.4, side, target)]
        worst_se = max(worst_se, se)
        all_positive &= diff > 0.0
    mid_ok = True
    ratios = []
    for side in ("up", "down"):
        d04, _ = ot[(0.4, side, 0.5)]
        mid_ok &= 0.005 <= d04 <= 0.05
        d025, se025 = ot[(0.25, side, 0.5)]
        d05, se05 = ot[(0.5, side, 0.5)]
        ratios.append(d05 / d025)
    quad_ok = all(2.5 <= r <= 5.5 for r in ratios)
    elapsed = barrier_sweep["elapsed"]
    ok = all_positive and mid_ok and quad_ok and worst_se < 0.001 and elapsed < 1200.0
    report(9, "one touch impact: positive everywhere, % scale at 50%, ~quadratic in eta",
           ok,
           f"all positive={all_positive}, 50% diffs up/down="
           f"{ot[(0.4, 'up', 0.5)][0]*100:.2f}%/{ot[(0.4, 'down', 0.5)][0]*100:.2f}%, "
           f"ratios {ratios[0]:.2f}/{ratios[1]:.2f}, max SE {worst_se*100:.3f}%, "
           f"{barrier_sweep['steps']} steps, {elapsed:.0f}s")


@pytest.mark.slow
def test_one_touch_price_monotone_in_barrier_distance(barrier_sweep):
    # supporting invariant on the same sweep: touch prices fall as the
    # barrier moves away from spot (lower flat-vol price target)
    for side in ("up", "down"):
        prices = [barrier_sweep["ot_price"][(side, t)] for t in BARRIER_TARGETS]
        assert all(a < b for a, b in zip(prices, prices[1:]))


@pytest.mark.slow
def test_criterion_10_knockout_impact(barrier_sweep):
    ko = barrier_sweep["ko"]
    no_significant_negative = True
    significant_positive = 0
    for side, target, _ in barrier_sweep["grid"]:
        diff, se = ko[(0.4, side, target)]
        no_significant_negative &= diff > -2.0 * se
        if diff > 3.0 * se:
            significant_positive += 1
    mid_bp = {side: ko[(0.4, side, 0.5)][0] / SPOT * 1e4 for side in ("up", "down")}
    mid_ok = all(1.0 <= bp <= 10.0 for bp in mid_bp.values())
    ok = no_significant_negative and significant_positive >= 12 and mid_ok
    report(10, "ATM knockout impact: positive across the grid, 1-10 bp at the 50% barrier",
           ok,
           f"50% diffs {mid_bp['up']:.2f}/{mid_bp['down']:.2f} bp, "
           f"{significant_positive}/18 points significantly positive")


@pytest.mark.slow
def test_criterion_11_vol_swap_fair_strike():
    start = time.perf_counter()
    spec = VolSwapSpec(expiry=QUOTE.tenor, fixings_per_year=250)
    cfg = McConfig(paths=1_000_000, steps_per_year=252, seed=404)
    strikes, ses = [], []
    for eta in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5):
        cal = calibrate(QUOTE, SPOT, BETA, eta)
        sig = realized_vols(spec, SPOT, cal.params, cfg)
        strikes.append(float(sig.mean()))
        ses.append(float(sig.std(ddof=1) / math.sqrt(len(sig))))
    increasing = all(b > a for a, b in zip(strikes, strikes[1:]))
    total_rise = strikes[-1] - strikes[0]

    # constant-volatility sanity vs the noncentral-chi-square expectation
    theta = QUOTE.atm_vol**2
    flat = heston_params(theta=theta, alpha=0.0, beta=BETA, rho=0.0, v0=theta)
    sig0 = realized_vols(spec, SPOT, flat, McConfig(paths=200_000, seed=405))
    n_ret = spec.returns_count()
    oracle = expected_realized_vol_constant_variance(theta, n_ret, QUOTE.tenor / n_ret, 250)
    flat_ok = abs(float(sig0.mean()) - oracle) < 1e-3
    elapsed = time.perf_counter() - start
    ok = increasing and total_rise >= 5e-4 and max(ses) < 1e-4 and flat_ok
    report(11, "vol swap fair strike strictly increases in eta; flat-vol oracle check",
           ok,
           f"strikes {', '.join(f'{s*100:.3f}%' for s in strikes)}; rise "
           f"{total_rise*100:.3f}%, max SE {max(ses)*100:.4f}%, flat err "
           f"{abs(float(sig0.mean()) - oracle)*100:.4f}%, {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_12_mc_invariant_suite():
    p = smile_params(0.4, rho_bar=0.2)
    cfg = McConfig(paths=400_000, seed=606)
    term = evolve_paths(p, SPOT, 0.5, cfg)
    nonneg = bool(np.all(term.v_plus >= 0.0) and np.all(term.v_minus >= 0.0))

    total = term.v_plus + term.v_minus
    mask = total > 1e-12
    rho = instant_correlation(term.v_plus[mask], term.v_minus[mask], p.rho_bar, p.eta)
    bounded = bool(np.all(rho >= p.rho_minus - 1e-12) and np.all(rho <= p.rho_plus + 1e-12))

    mean_ex, _ = cir_conditional_moments(p.v0, p.theta, p.beta, p.alpha, 0.5)
    t_mom = (total.mean() - mean_ex) / (total.std(ddof=1) / math.sqrt(len(total)))

    s_t = np.exp(term.log_spot)
    t_mart = (s_t.mean() / SPOT - 1.0) / (s_t.std(ddof=1) / math.sqrt(len(s_t)) / SPOT)

    t1 = evolve_paths(p, SPOT, 0.1, McConfig(paths=300_000, seed=607, threads=1))
    t4 = evolve_paths(p, SPOT, 0.1, McConfig(paths=300_000, seed=607, threads=4))
    deterministic = bool(
        np.array_equal(t1.log_spot, t4.log_spot)
        and np.array_equal(t1.v_plus, t4.v_plus)
        and np.array_equal(t1.v_minus, t4.v_minus)
        and np.array_equal(t1.sum_sq_returns, t4.sum_sq_returns)
    )
    ok = nonneg and bounded and abs(t_mom) < 3.0 and abs(t_mart) < 3.0 and deterministic
    report(12, "MC invariants: non-negativity, correlation bounds, moments, determinism",
           ok,
           f"CIR t={t_mom:+.2f}, martingale t={t_mart:+.2f}, thread-invariant={deterministic}")


def test_criterion_13_empirical_regression_tool():
    rng = np.random.default_rng(1234)
    x = rng.normal(0.0, 0.005, 260)
    noise_sd = 0.16 * x.std() * math.sqrt(1.0 / 0.43 - 1.0)
    y = 0.16 * x + rng.normal(0.0, noise_sd, len(x))
    est = estimate_rr_beta(make_series(x, y))
    slope_ok = abs(est.beta_rr - 0.16) < 2.0 * est.beta_se
    r2_ok = abs(est.r_squared - 0.43) < 0.05
    report(13, "synthetic RR regression recovers slope 0.16 and R^2 0.43",
           slope_ok and r2_ok,
           f"beta {est.beta_rr:.4f} +- {est.beta_se:.4f}, R^2 {est.r_squared:.3f}, "
           f"corr {est.corr:.3f}, n={est.n}")
