#!/usr/bin/env python3
"""Plot Q-factor vs launch power curves from a sweep's qreport.csv."""

import argparse
import csv
import sys
from collections import defaultdict


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("qreport", help="qreport.csv produced by a sweep")
    ap.add_argument("--out", default="qcurves.png")
    args = ap.parse_args()

    curves = defaultdict(list)
    with open(args.qreport) as fh:
        for row in csv.DictReader(fh):
            curves[row["equalizer"]].append((float(row["power_dbm"]), float(row["q_db"])))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    markers = {"CDC": "^", "DBP": "+", "BILSTM": "o", "CNN": "s"}
    for eq, pts in sorted(curves.items()):
        pts.sort()
        plt.plot(*zip(*pts), marker=markers.get(eq, "."), label=eq)
    plt.xlabel("Launch power [dBm]")
    plt.ylabel("Q-factor [dB]")
    plt.grid(True, linestyle="--", alpha=0.5)
    plt.legend()
    plt.savefig(args.out, dpi=150, bbox_inches="tight")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
