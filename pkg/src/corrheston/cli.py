"""Command-line experiment runner.

Each subcommand runs one named experiment from a YAML config file and
writes a CSV plus a JSON manifest (written before computation starts and
finalized with the wall clock afterwards).  Identical config and seed
produce byte-identical CSVs.  Numeric CSV fields use repr round-trip
formatting.

Config schema (YAML; CLI flags override file values):

    spot: 100.0
    r: 0.0
    q: 0.0
    beta: 2.0
    quote: {tenor: 0.25, atm_vol: 0.08, rr25: 0.01, bf25: 0.005}
    eta_grid: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    mc: {paths: 100000, steps_per_year: 252, seed: 1}
    output: results.csv
    # experiment-specific sections, see EXPERIMENTS below:
    smile: {theta: 0.01, alpha: 0.3, rho_bar: 0.0, tau: 0.25,
            strikes: {lo: 80.0, hi: 120.0, n: 17}}
    barriers: {bs_prices: [0.1, ..., 0.9], sides: [up, down]}
    volswap: {fixings_per_year: 250}
    rr_beta_model: {tenors: [0.083333, 0.25, 0.5, 1.0], bump: 0.01}
    k_tau: {theta: 0.01, alpha: 0.3, rho_bar: 0.0, eta: 0.25,
            tenors: [0.25], bump: 0.01}
    rr_beta_empirical: {csv: series.csv}
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analytics import (
    estimate_rr_beta,
    load_market_series,
    model_rr_beta,
    rr_correlation_slope,
)
from .blackscholes import SmileQuote
from .calibration import calibrate
from .exotics import (
    DOWN_AND_OUT_CALL,
    ONE_TOUCH,
    UP_AND_OUT_PUT,
    BarrierProduct,
    VolSwapSpec,
    barrier_from_bs_price,
    barrier_samples,
    difference_from_samples,
    realized_vols,
)
from .fourier_pricer import smile_from_model
from .model_core import symmetric_params
from .montecarlo import McConfig, effective_steps

EXPERIMENTS = {
    "smile": "implied-vol smile per strike for each eta (fixed raw params)",
    "calib-sweep": "calibrated (theta, alpha, rho_bar) and Feller ratio per eta",
    "one-touch-sweep": "one touch price vs Heston across barrier levels per eta",
    "knockout-sweep": "ATM knockout price vs Heston across barrier levels per eta",
    "volswap-sweep": "volatility-swap fair strike vs Heston per eta",
    "rr-beta-model": "model risk-reversal beta and k slope per tenor and eta",
    "rr-beta-empirical": "OLS risk-reversal beta from a date,spot,rr CSV",
    "k-tau": "RR/correlation slope k per tenor at fixed raw params",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    output: Path
    spot: float = 100.0
    r: float = 0.0
    q: float = 0.0
    beta: float = 2.0
    quote: SmileQuote | None = None
    eta_grid: list = field(default_factory=list)
    mc: McConfig = field(default_factory=McConfig)
    extra: dict = field(default_factory=dict)


def _require(cond: bool, code: str, message: str):
    if not cond:
        raise ConfigError(f"{code}: {message}")


def load_config(experiment: str, path, seed=None, paths=None, out=None) -> ExperimentConfig:
    _require(experiment in EXPERIMENTS, "unknown-experiment",
             f"{experiment!r} not one of {sorted(EXPERIMENTS)}")
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config-missing: no config file at {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config-parse: {exc}")
    _require(isinstance(raw, dict), "config-parse", "top level must be a mapping")

    mc_raw = dict(raw.get("mc") or {})
    if seed is not None:
        mc_raw["seed"] = seed
    if paths is not None:
        mc_raw["paths"] = paths
    try:
        mc = McConfig(**mc_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"mc-config: {exc}")

    quote = None
    if raw.get("quote") is not None:
        try:
            quote = SmileQuote(**raw["quote"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quote: {exc}")

    output = Path(out) if out is not None else Path(raw.get("output", f"{experiment}.csv"))
    known = {"mc", "quote", "output", "spot", "r", "q", "beta", "eta_grid"}
    cfg = ExperimentConfig(
        experiment=experiment,
        output=output,
        spot=float(raw.get("spot", 100.0)),
        r=float(raw.get("r", 0.0)),
        q=float(raw.get("q", 0.0)),
        beta=float(raw.get("beta", 2.0)),
        quote=quote,
        eta_grid=list(raw.get("eta_grid") or []),
        mc=mc,
        extra={k: v for k, v in raw.items() if k not in known},
    )
    _require(cfg.spot > 0.0, "spot", "spot must be positive")
    return cfg


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class _CsvSink:
    """Streams rows so partially completed sweeps still leave their rows."""

    def __init__(self, path: Path, columns: list):
        self.columns = columns
        path.parent.mkdir(parents=True, exist_ok=True)
        self.handle = open(path, "w", newline="")
        self.handle.write(",".join(columns) + "\n")
        self.rows = 0

    def write(self, row: dict):
        self.handle.write(",".join(_fmt(row.get(c, "")) for c in self.columns) + "\n")
        self.rows += 1

    def fail(self, message: str):
        marker = {c: "" for c in self.columns}
        marker[self.columns[-1]] = "error: " + message.replace(",", ";").replace("\n", " ")
        self.write(marker)

    def close(self):
        self.handle.close()


def _manifest(cfg: ExperimentConfig, status: str, wall: float | None, rows: int | None):
    payload = {
        "experiment": cfg.experiment,
        "version": __version__,
        "seed": cfg.mc.seed,
        "paths": cfg.mc.paths,
        "status": status,
        "started_utc": getattr(cfg, "_started", None),
        "wall_clock_seconds": wall,
        "rows": rows,
        "config": {
            "spot": cfg.spot, "r": cfg.r, "q": cfg.q, "beta": cfg.beta,
            "quote": dataclasses.asdict(cfg.quote) if cfg.quote else None,
            "eta_grid": cfg.eta_grid,
            "mc": dataclasses.asdict(cfg.mc),
            "output": str(cfg.output),
            **cfg.extra,
        },
    }
    path = cfg.output.with_suffix(cfg.output.suffix + ".manifest.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n")


def _strike_grid(spec) -> list:
    if isinstance(spec, list):
        return [float(s) for s in spec]
    _require(isinstance(spec, dict) and {"lo", "hi", "n"} <= set(spec), "strikes",
             "strikes must be a list or {lo, hi, n}")
    return list(np.linspace(float(spec["lo"]), float(spec["hi"]), int(spec["n"])))


def _run_smile(cfg: ExperimentConfig, sink: _CsvSink):
    sm = cfg.extra.get("smile") or {}
    _require({"theta", "alpha", "rho_bar", "tau"} <= set(sm), "smile",
             "smile section needs theta, alpha, rho_bar, tau")
    strikes = _strike_grid(sm.get("strikes", {"lo": 0.8 * cfg.spot, "hi": 1.2 * cfg.spot, "n": 17}))
    _require(bool(cfg.eta_grid), "eta-grid", "eta_grid must be non-empty")
    for eta in cfg.eta_grid:
        params = symmetric_params(theta=float(sm["theta"]), alpha=float(sm["alpha"]),
                                  beta=cfg.beta, rho_bar=float(sm["rho_bar"]),
                                  eta=float(eta), r=cfg.r, q=cfg.q)
        vols = smile_from_model(params, cfg.spot, float(sm["tau"]), strikes)
        for strike, vol in zip(strikes, vols):
            sink.write({"eta": eta, "strike": strike, "implied_vol": vol, "status": "ok"})


def _run_calib_sweep(cfg: ExperimentConfig, sink: _CsvSink):
    _require(cfg.quote is not None, "quote", "calib-sweep needs a quote")
    _require(bool(cfg.eta_grid), "eta-grid", "eta_grid must be non-empty")
    for eta in cfg.eta_grid:
        res = calibrate(cfg.quote, cfg.spot, cfg.beta, float(eta), cfg.r, cfg.q)
        sink.write({
            "eta": eta,
            "theta": res.params.theta,
            "alpha": res.params.alpha,
            "rho_bar": res.params.rho_bar,
            "feller_ratio": res.feller_ratio,
            "iterations": res.iterations,
            "max_residual": float(np.max(np.abs(res.residuals))),
            "status": "ok",
        })


def _barrier_grid(cfg: ExperimentConfig):
    bar = cfg.extra.get("barriers") or {}
    bs_prices = [float(p) for p in bar.get("bs_prices",
                 [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    sides = list(bar.get("sides", ["up", "down"]))
    _require(all(s in ("up", "down") for s in sides), "barriers", "sides must be up/down")
    vol = cfg.quote.atm_vol
    tau = cfg.quote.tenor
    out = []
    for side in sides:
        for target in bs_prices:
            barrier = barrier_from_bs_price(target, cfg.spot, vol, tau, cfg.r, cfg.q,
                                            up=side == "up")
            out.append((side, target, barrier))
    return out


def _run_barrier_sweep(cfg: ExperimentConfig, sink: _CsvSink, knockout: bool):
    _require(cfg.quote is not None, "quote", "barrier sweeps need a quote")
    _require(bool(cfg.eta_grid), "eta-grid", "eta_grid must be non-empty")
    tau = cfg.quote.tenor
    grid = _barrier_grid(cfg)

    def make_product(side: str, barrier: float) -> BarrierProduct:
        if not knockout:
            return BarrierProduct(ONE_TOUCH, barrier, tau)
        if side == "down":
            return BarrierProduct(DOWN_AND_OUT_CALL, barrier, tau, strike=cfg.spot)
        return BarrierProduct(UP_AND_OUT_PUT, barrier, tau, strike=cfg.spot)

    products = [make_product(side, barrier) for side, _, barrier in grid]
    cals = {eta: calibrate(cfg.quote, cfg.spot, cfg.beta, float(eta), cfg.r, cfg.q)
            for eta in set(cfg.eta_grid) | {0.0}}
    steps = max(effective_steps(c.params, cfg.mc, tau) for c in cals.values())
    base_samples = barrier_samples(cals[0.0].params, cfg.spot, products, cfg.mc, steps=steps)
    for eta in cfg.eta_grid:
        samples = (base_samples if float(eta) == 0.0 else
                   barrier_samples(cals[eta].params, cfg.spot, products, cfg.mc, steps=steps))
        for (side, target, barrier), smp, base in zip(grid, samples, base_samples):
            diff = difference_from_samples(smp, base, cals[eta], cals[0.0])
            row = {
                "eta": eta, "side": side, "bs_price": target, "barrier": barrier,
                "price": diff.price, "price_heston": diff.price_heston,
                "difference": diff.difference, "diff_std_error": diff.std_error,
                "status": "ok",
            }
            if knockout:
                row["strike"] = cfg.spot
                row["difference_bp"] = diff.difference / cfg.spot * 1e4
            sink.write(row)


def _run_volswap_sweep(cfg: ExperimentConfig, sink: _CsvSink):
    _require(cfg.quote is not None, "quote", "volswap-sweep needs a quote")
    _require(bool(cfg.eta_grid), "eta-grid", "eta_grid must be non-empty")
    vs = cfg.extra.get("volswap") or {}
    spec = VolSwapSpec(expiry=cfg.quote.tenor,
                       fixings_per_year=int(vs.get("fixings_per_year", 250)),
                       num_returns=vs.get("num_returns"))
    cal0 = calibrate(cfg.quote, cfg.spot, cfg.beta, 0.0, cfg.r, cfg.q)
    base = realized_vols(spec, cfg.spot, cal0.params, cfg.mc)
    n = len(base)
    for eta in cfg.eta_grid:
        cal = calibrate(cfg.quote, cfg.spot, cfg.beta, float(eta), cfg.r, cfg.q)
        sig = (base if float(eta) == 0.0 else
               realized_vols(spec, cfg.spot, cal.params, cfg.mc))
        diff = sig - base
        sink.write({
            "eta": eta,
            "theta": cal.params.theta,
            "alpha": cal.params.alpha,
            "fair_strike": float(sig.mean()),
            "std_error": float(sig.std(ddof=1) / math.sqrt(n)),
            "diff_to_heston": float(diff.mean()),
            "diff_std_error": float(diff.std(ddof=1) / math.sqrt(n)) if float(eta) != 0.0 else 0.0,
            "status": "ok",
        })


def _run_rr_beta_model(cfg: ExperimentConfig, sink: _CsvSink):
    _require(cfg.quote is not None, "quote", "rr-beta-model needs a quote")
    _require(bool(cfg.eta_grid), "eta-grid", "eta_grid must be non-empty")
    section = cfg.extra.get("rr_beta_model") or {}
    tenors = [float(t) for t in section.get("tenors", [1 / 12, 0.25, 0.5, 1.0])]
    bump = float(section.get("bump", 0.01))
    for eta in cfg.eta_grid:
        for tenor in tenors:
            quote = SmileQuote(tenor=tenor, atm_vol=cfg.quote.atm_vol,
                               rr25=cfg.quote.rr25, bf25=cfg.quote.bf25)
            cal = calibrate(quote, cfg.spot, cfg.beta, float(eta), cfg.r, cfg.q)
            k = rr_correlation_slope(cal.params, cfg.spot, tenor, bump)
            sink.write({
                "eta": eta, "tenor": tenor,
                "theta": cal.params.theta, "alpha": cal.params.alpha,
                "rho_bar": cal.params.rho_bar, "k_tau": k,
                "beta_rr": model_rr_beta(k, cal.params.alpha, float(eta), cal.params.theta),
                "status": "ok",
            })


def _run_rr_beta_empirical(cfg: ExperimentConfig, sink: _CsvSink):
    section = cfg.extra.get("rr_beta_empirical") or {}
    _require("csv" in section, "rr-beta-empirical", "needs rr_beta_empirical.csv path")
    series = load_market_series(section["csv"])
    est = estimate_rr_beta(series)
    sink.write({
        "beta_rr": est.beta_rr, "r_squared": est.r_squared, "corr": est.corr,
        "n": est.n, "intercept": est.intercept, "beta_se": est.beta_se,
        "status": "ok",
    })


def _run_k_tau(cfg: ExperimentConfig, sink: _CsvSink):
    section = cfg.extra.get("k_tau") or {}
    _require({"theta", "alpha", "rho_bar", "eta"} <= set(section), "k-tau",
             "k_tau section needs theta, alpha, rho_bar, eta")
    tenors = [float(t) for t in section.get("tenors", [0.25])]
    bump = float(section.get("bump", 0.01))
    params = symmetric_params(theta=float(section["theta"]), alpha=float(section["alpha"]),
                              beta=cfg.beta, rho_bar=float(section["rho_bar"]),
                              eta=float(section["eta"]), r=cfg.r, q=cfg.q)
    for tenor in tenors:
        k = rr_correlation_slope(params, cfg.spot, tenor, bump)
        sink.write({"tenor": tenor, "k_tau": k, "status": "ok"})


_COLUMNS = {
    "smile": ["eta", "strike", "implied_vol", "status"],
    "calib-sweep": ["eta", "theta", "alpha", "rho_bar", "feller_ratio", "iterations",
                    "max_residual", "status"],
    "one-touch-sweep": ["eta", "side", "bs_price", "barrier", "price", "price_heston",
                        "difference", "diff_std_error", "status"],
    "knockout-sweep": ["eta", "side", "bs_price", "barrier", "strike", "price",
                       "price_heston", "difference", "difference_bp", "diff_std_error",
                       "status"],
    "volswap-sweep": ["eta", "theta", "alpha", "fair_strike", "std_error",
                      "diff_to_heston", "diff_std_error", "status"],
    "rr-beta-model": ["eta", "tenor", "theta", "alpha", "rho_bar", "k_tau", "beta_rr",
                      "status"],
    "rr-beta-empirical": ["beta_rr", "r_squared", "corr", "n", "intercept", "beta_se",
                          "status"],
    "k-tau": ["tenor", "k_tau", "status"],
}

_RUNNERS = {
    "smile": _run_smile,
    "calib-sweep": _run_calib_sweep,
    "one-touch-sweep": lambda cfg, sink: _run_barrier_sweep(cfg, sink, knockout=False),
    "knockout-sweep": lambda cfg, sink: _run_barrier_sweep(cfg, sink, knockout=True),
    "volswap-sweep": _run_volswap_sweep,
    "rr-beta-model": _run_rr_beta_model,
    "rr-beta-empirical": _run_rr_beta_empirical,
    "k-tau": _run_k_tau,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one experiment: manifest first, stream CSV rows, finalize manifest."""
    cfg._started = datetime.now(timezone.utc).isoformat()
    _manifest(cfg, status="running", wall=None, rows=None)
    sink = _CsvSink(cfg.output, _COLUMNS[cfg.experiment])
    start = time.perf_counter()
    try:
        _RUNNERS[cfg.experiment](cfg, sink)
    except ConfigError:
        sink.close()
        raise
    except Exception as exc:  # partial sweep: keep completed rows, mark failure
        sink.fail(f"{type(exc).__name__}: {exc}")
        sink.close()
        _manifest(cfg, status="failed", wall=time.perf_counter() - start, rows=sink.rows)
        print(f"error: experiment-failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    sink.close()
    _manifest(cfg, status="done", wall=time.perf_counter() - start, rows=sink.rows)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="corrheston",
        description="Stochastic-correlation Double Heston experiment runner",
    )
    parser.add_argument("--list", action="store_true", help="list experiments and exit")
    sub = parser.add_subparsers(dest="experiment")
    for name, help_text in EXPERIMENTS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="override mc.seed")
        p.add_argument("--paths", type=int, default=None, help="override mc.paths")
        p.add_argument("--out", default=None, help="override output CSV path")
    args = parser.parse_args(argv)

    if args.list:
        for name, help_text in EXPERIMENTS.items():
            print(f"{name}: {help_text}")
        return 0
    if not args.experiment:
        parser.print_usage(sys.stderr)
        print("error: no-experiment: choose a subcommand or --list", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.experiment, args.config, seed=args.seed,
                          paths=args.paths, out=args.out)
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
