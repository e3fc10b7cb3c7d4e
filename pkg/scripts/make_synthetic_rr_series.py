#!/usr/bin/env python3
"""Generate a synthetic daily (date, spot, rr) CSV for the empirical tool.

Real risk-reversal closes are proprietary desk data, so this builds a
stand-in with a chosen RR beta and noise level: daily spot log returns are
iid normal and RR changes are beta * return + noise sized to hit a target
R^2.  RR is written in vol percentage points, matching the ingestion
schema.
"""

import argparse
import csv
import datetime as dt
import math

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/synthetic_rr_series.csv")
    parser.add_argument("--days", type=int, default=260)
    parser.add_argument("--beta", type=float, default=0.16,
                        help="RR change (vol fraction) per unit log return")
    parser.add_argument("--r2", type=float, default=0.43)
    parser.add_argument("--daily-vol", type=float, default=0.005)
    parser.add_argument("--spot0", type=float, default=1.10)
    parser.add_argument("--rr0", type=float, default=0.85,
                        help="starting RR level in vol points")
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    x = rng.normal(0.0, args.daily_vol, args.days)
    noise_sd = abs(args.beta) * x.std() * math.sqrt(1.0 / args.r2 - 1.0)
    d_rr = args.beta * x + rng.normal(0.0, noise_sd, args.days)

    spot = args.spot0 * np.exp(np.cumsum(np.concatenate([[0.0], x])))
    rr_points = args.rr0 + 100.0 * np.cumsum(np.concatenate([[0.0], d_rr]))

    day = dt.date(2025, 1, 2)
    import pathlib
    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "spot", "rr"])
        for s, r in zip(spot, rr_points):
            while day.weekday() >= 5:
                day += dt.timedelta(days=1)
            writer.writerow([day.isoformat(), repr(float(s)), repr(float(r))])
            day += dt.timedelta(days=1)
    print(f"wrote {len(spot)} rows to {args.out}")


if __name__ == "__main__":
    main()
