#!/usr/bin/env python3
"""Summarize method comparison from evaluation CSVs.

Each CSV is the evaluator's per-sample report (with trailing mean/std
rows). Prints mean in-gt-mask sO2 MSE, pixel accuracy, FPR and FNR per
method and checks the expected ordering of the sO2 error.

Usage: compare_methods.py hybrid=hybrid.csv mse=mse.csv lu=lu.csv
"""

import csv
import sys


def load_mean(path):
    with open(path) as fp:
        rows = list(csv.DictReader(fp))
    mean = next(r for r in rows if r["sample_id"] == "mean")
    return {k: float(v) for k, v in mean.items() if k != "sample_id"}


def main():
    methods = {}
    for arg in sys.argv[1:]:
        name, path = arg.split("=", 1)
        methods[name] = load_mean(path)

    for name, m in methods.items():
        print(f"{name:8s} so2_mse_in_gt_mask={m['so2_mse_in_gt_mask']:.6g} "
              f"accuracy={m['accuracy']:.4f} fpr={m['fpr']:.6g} fnr={m['fnr']:.6g}")

    if {"hybrid", "mse", "lu"} <= methods.keys():
        h = methods["hybrid"]["so2_mse_in_gt_mask"]
        m = methods["mse"]["so2_mse_in_gt_mask"]
        l = methods["lu"]["so2_mse_in_gt_mask"]
        print(f"ordering hybrid < mse < lu: {h < m < l} ({h:.6g} / {m:.6g} / {l:.6g})")
        print(f"hybrid accuracy >= 0.95: {methods['hybrid']['accuracy'] >= 0.95}")
        print(f"hybrid fnr > fpr: {methods['hybrid']['fnr'] > methods['hybrid']['fpr']}")


if __name__ == "__main__":
    main()
