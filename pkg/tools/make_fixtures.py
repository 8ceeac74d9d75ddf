"""Regenerate the bundled fixtures under src/vollab/data.

Market prices and the Table XI replay columns are copied from the source
tables. Spot, implied volatility and expiry were never published, so the
values below are reconstructions chosen to be plausible for each underlying
on 2024-11-18. Price histories are synthetic GARCH(1,1) series ending at the
reconstructed spot.

    python tools/make_fixtures.py            # snapshots, histories, replay
    python tools/make_fixtures.py --params   # also re-run the calibrations
"""

import argparse
import csv
import datetime as dt
import json
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "vollab" / "data"
AS_OF = dt.date(2024, 11, 18)
RATE = 0.0427
HISTORY_DAYS = 505

# symbol: (spot, expiry, iv, {strike: market price}, history seed)
SNAPSHOTS = {
    "SHOP": (104.60, "2024-11-22", 0.55,
             {80: 24.65, 81: 23.28, 82: 22.90, 83: 22.40, 84: 20.62, 85: 19.80}, 11),
    "MARA": (20.50, "2024-11-22", 0.90,
             {18: 2.77, 18.5: 2.27, 19: 1.77, 19.5: 1.27, 20: 0.77}, 12),
    "META": (559.50, "2024-12-20", 0.35,
             {420: 143.90, 450: 106.27, 470: 84.39, 480: 77.40, 500: 57.69}, 13),
    "AMC": (4.15, "2024-12-20", 0.85,
            {3: 1.18, 3.5: 0.79, 4: 0.35, 4.5: 0.08, 5: 0.04}, 14),
    "TSLA": (318.00, "2025-01-17", 0.60,
             {170: 149.53, 175: 145.03, 190: 129.94, 195: 125.25, 200: 120.96,
              205: 115.45, 210: 112.00, 215: 106.61, 220: 100.11, 225: 95.63}, 15),
}

# strike, heston, monte carlo (gbm), market
TABLE_XI = [
    (170, 150.35, 151.69, 149.53),
    (175, 145.39, 147.19, 145.03),
    (190, 130.46, 130.98, 129.94),
    (195, 125.41, 126.40, 125.25),
    (200, 120.42, 120.68, 120.96),
    (205, 115.47, 117.11, 115.45),
    (210, 110.47, 111.27, 112.00),
    (215, 105.44, 106.03, 106.61),
    (220, 100.44, 101.28, 100.11),
    (225, 95.41, 96.34, 95.63),
]


def business_days(end, n):
    days = []
    d = end
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d -= dt.timedelta(days=1)
    return days[::-1]


def garch_closes(spot, iv, seed, n):
    rng = np.random.default_rng(seed)
    alpha1, beta1 = 0.08, 0.90
    long_run = iv**2 / 252
    alpha0 = long_run * (1 - alpha1 - beta1)
    var, r = long_run, np.empty(n - 1)
    for t in range(n - 1):
        r[t] = np.sqrt(var) * rng.standard_normal()
        var = alpha0 + alpha1 * r[t] ** 2 + beta1 * var
    log_path = np.concatenate([[0.0], np.cumsum(r)])
    return spot * np.exp(log_path - log_path[-1])


def write_snapshot(symbol, spot, expiry, iv, quotes):
    doc = {
        "symbol": symbol,
        "spot": spot,
        "as_of": AS_OF.isoformat(),
        "risk_free_rate": RATE,
        "contracts": [
            {"strike": float(k), "market_price": p, "implied_volatility": iv,
             "expiration": expiry, "option_type": "call"}
            for k, p in quotes.items()
        ],
    }
    (DATA / f"{symbol.lower()}_snapshot.json").write_text(json.dumps(doc, indent=2) + "\n")


def write_history(symbol, spot, iv, seed):
    closes = garch_closes(spot, iv, seed, HISTORY_DAYS)
    with open(DATA / f"{symbol.lower()}_history.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "close"])
        for d, c in zip(business_days(AS_OF, HISTORY_DAYS), closes):
            w.writerow([d.isoformat(), f"{c:.4f}"])


def write_replay():
    with open(DATA / "tsla_table_xi.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strike", "heston", "gbm", "market"])
        w.writerows(TABLE_XI)


def write_params():
    from vollab.cli import main

    main(["calibrate", "--model", "heston", "--history", str(DATA / "tsla_history.csv"),
          "--snapshot", str(DATA / "tsla_snapshot.json"), "--out", str(DATA / "tsla_heston.json")])
    main(["calibrate", "--model", "merton", "--snapshot", str(DATA / "meta_snapshot.json"),
          "--out", str(DATA / "meta_merton.json")])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params", action="store_true", help="also regenerate calibrated parameter documents")
    args = ap.parse_args()
    DATA.mkdir(parents=True, exist_ok=True)
    for symbol, (spot, expiry, iv, quotes, seed) in SNAPSHOTS.items():
        write_snapshot(symbol, spot, expiry, iv, quotes)
        write_history(symbol, spot, iv, seed)
    write_replay()
    if args.params:
        write_params()


if __name__ == "__main__":
    main()
