"""
Aggregate per-seed extraction JSONs into per-sample and per-quantity CSVs.

Input:
  eval/extract_reports/<RUN_ID>/*.json

Output:
  eval/extract_samples_<RUN_ID>.csv
  eval/extract_aggregated_<RUN_ID>.csv
"""
import csv
import datetime
import glob
import json
import os
from collections import defaultdict

import numpy as np

RUN_ID = os.getenv("RUN_ID") or datetime.datetime.now().strftime("run_%Y%m%d_%H%M")
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
IN_DIR = os.path.join(ROOT, "eval", "extract_reports", RUN_ID)
OUT_SAMPLES = os.path.join(ROOT, "eval", f"extract_samples_{RUN_ID}.csv")
OUT_AGG = os.path.join(ROOT, "eval", f"extract_aggregated_{RUN_ID}.csv")
QUANTITIES = ("lambda_1", "lambda_2", "lambda_3")


def sample_rows(data, seed, fname):
    rows = []
    for q in QUANTITIES:
        rec = data.get(q, {})
        if "error" in rec or not rec:
            rows.append({"RUN_ID": RUN_ID, "seed": seed, "quantity": q, "value": "", "sigma": "",
                         "error": rec.get("error", "missing"), "file": fname})
            continue
        rows.append({"RUN_ID": RUN_ID, "seed": seed, "quantity": q, "value": rec["params"]["lambda_c"],
                     "sigma": rec["sigmas"]["lambda_c"], "error": "", "file": fname})
    return rows


def aggregate(rows):
    g = defaultdict(list)
    for r in rows:
        if r["value"] != "":
            g[r["quantity"]].append(float(r["value"]))
    out = []
    for q in QUANTITIES:
        vals = np.array(g.get(q, []))
        out.append({"RUN_ID": RUN_ID, "quantity": q, "n": len(vals),
                    "mean": round(float(vals.mean()), 6) if len(vals) else "",
                    "std": round(float(vals.std(ddof=1)), 6) if len(vals) > 1 else ""})
    return out


def main():
    rows = []
    for fp in sorted(glob.glob(os.path.join(IN_DIR, "*.json"))):
        with open(fp, "r", encoding="utf-8") as f:
            data = json.load(f)
        seed = os.path.splitext(os.path.basename(fp))[0]
        rows += sample_rows(data, seed, os.path.basename(fp))

    os.makedirs(os.path.join(ROOT, "eval"), exist_ok=True)
    with open(OUT_SAMPLES, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=["RUN_ID", "seed", "quantity", "value", "sigma", "error", "file"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
    print(f"[ok] extraction samples -> {OUT_SAMPLES} ({len(rows)} rows)")

    with open(OUT_AGG, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=["RUN_ID", "quantity", "mean", "std", "n"])
        w.writeheader()
        for r in aggregate(rows):
            w.writerow(r)
    print(f"[ok] extraction aggregated -> {OUT_AGG}")


if __name__ == "__main__":
    main()
