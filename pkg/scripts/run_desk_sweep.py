#!/usr/bin/env python3
"""Run the desk-scale Q-vs-launch-power sweep and print the report table."""

import argparse
import sys
from pathlib import Path

from ceq import bench
from ceq.modem import qreports_to_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "desk_sim.json"))
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()

    cfg = bench.load_config(args.config)
    if args.out_dir:
        from dataclasses import replace
        cfg = replace(cfg, out_dir=args.out_dir)
    reports = bench.run_sweep(cfg)
    print(qreports_to_csv(reports), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
