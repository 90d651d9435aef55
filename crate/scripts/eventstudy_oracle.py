"""Straight-line recomputation of the event-study fixture summaries.

Reads a fixture directory (prices.csv, benchmark.csv, roster.csv) and
writes the expected per-grade summaries as JSON. Kept deliberately naive:
no shared code with the Rust implementation.

    python3 scripts/eventstudy_oracle.py fixtures/eventstudy > fixtures/eventstudy/expected.json
"""

import csv
import json
import math
import statistics
import sys
from pathlib import Path

MONTHS = 36
MONTH_DAYS = 21


def read_closes(path):
    out = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.setdefault(row["symbol"].strip(), {})[row["date"].strip()] = float(row["close"])
    return out


def main(fixture):
    fixture = Path(fixture)
    (bench,) = read_closes(fixture / "benchmark.csv").values()
    prices = read_closes(fixture / "prices.csv")
    with open(fixture / "roster.csv", newline="") as f:
        roster = list(csv.DictReader(f))

    members = []
    first_day = []
    for entry in roster:
        symbol = entry["symbol"]
        dates = sorted(d for d in prices[symbol] if d in bench)
        days = [d for d in dates if d >= entry["listing_date"]]
        raw, adj = [], []
        for t in range(1, MONTHS + 1):
            base_day = MONTH_DAYS * (t - 1) + 1
            end_day = MONTH_DAYS * t + 1
            if end_day > len(days):
                break
            b, e = days[base_day - 1], days[end_day - 1]
            r = prices[symbol][e] / prices[symbol][b] - 1
            m = bench[e] / bench[b] - 1
            raw.append(r)
            adj.append(r - m)
        members.append({"grade": int(entry["grade"]), "raw": raw, "adj": adj,
                        "bench": [r - a for r, a in zip(raw, adj)]})
        offer = entry.get("offer_price")
        if offer:
            first = prices[symbol][days[0]]
            first_day.append({"symbol": symbol, "value": first / float(offer) - 1})

    grades = {}
    for g in range(1, 6):
        cohort = [m for m in members if m["grade"] == g]
        if not cohort:
            continue
        out = {"n": len(cohort)}
        for key in ("raw", "adj"):
            ar = []
            for t in range(MONTHS):
                col = [m[key][t] for m in cohort if len(m[key]) > t]
                if not col:
                    break
                ar.append(sum(col) / len(col))
            car, running = [], 0.0
            for a in ar:
                running += a
                car.append(running)
            out[key] = {"ar": ar, "car": car, "negative_months": sum(1 for a in ar if a < 0)}
        complete = [m for m in cohort if len(m["raw"]) == MONTHS]
        bhr = [math.prod(1 + r for r in m["raw"]) - 1 for m in complete]
        bench_bhr = [math.prod(1 + (r - a) for r, a in zip(m["raw"], m["adj"])) - 1 for m in complete]
        out["n_complete"] = len(complete)
        if bhr:
            out["hpr"] = {"high": max(bhr), "low": min(bhr), "mean": sum(bhr) / len(bhr),
                          "median": statistics.median(bhr)}
            out["wealth_relative"] = (1 + sum(bhr) / len(bhr)) / (1 + sum(bench_bhr) / len(bench_bhr))
        grades[str(g)] = out

    json.dump({"months": MONTHS, "month_days": MONTH_DAYS, "grades": grades,
               "first_day": first_day}, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1])
