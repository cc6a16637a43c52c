"""Wrist height from body height with a fixed ratio, next to the published standing table."""

import argparse
import csv
from pathlib import Path

import numpy as np

from lvlkit.experiments import ratio_table

REFERENCE = Path(__file__).resolve().parents[1] / "tests" / "data" / "standing_reference.csv"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratio", type=float, default=0.495)
    ap.add_argument("--reference", type=Path, default=REFERENCE)
    args = ap.parse_args()
    with open(args.reference, newline="") as f:
        ref = list(csv.DictReader(f))
    rows = ratio_table([float(r["body_height_cm"]) for r in ref], [float(r["true_cm"]) for r in ref], args.ratio)
    print(f"{'subj':>4} {'height':>7} {'est':>7} {'pub':>7} {'err':>6} {'pub':>6} {'acc':>7} {'pub':>7}")
    for r, x in zip(ref, rows):
        print(f"{r['subject']:>4} {x.body_height:7.1f} {x.estimated:7.3f} {float(r['estimated_cm']):7.2f} "
              f"{x.abs_error:6.3f} {float(r['abs_error_cm']):6.2f} {x.accuracy:7.3f} {float(r['accuracy_pct']):7.2f}")
    print(f"mean {'':7} {np.mean([x.estimated for x in rows]):7.3f} {'':7} "
          f"{np.mean([x.abs_error for x in rows]):6.3f} {'':6} {np.mean([x.accuracy for x in rows]):7.3f}")
    # the ratio that would reproduce the published estimates on average
    h = np.array([float(r["body_height_cm"]) for r in ref])
    e = np.array([float(r["estimated_cm"]) for r in ref])
    print(f"least-squares ratio through the published estimates: {float(h @ e / (h @ h)):.5f}")


if __name__ == "__main__":
    main()
