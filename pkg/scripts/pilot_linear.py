#!/usr/bin/env python3
"""Pilot: calibrate desk noise, then CDC and DBP Q vs power on test sets."""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ceq import bench

cfg = bench.load_config(Path(__file__).resolve().parents[1] / "configs" / "desk_sim.json")

t0 = time.time()
sigma2 = bench.calibrate_run_noise(cfg)
print(f"sigma2 = {sigma2:.6e}  ({time.time()-t0:.1f}s)", flush=True)

for power in cfg.sweep_powers:
    t1 = time.time()
    test_ds = bench.generate_dataset(cfg, power, "test", sigma2, persist=False)
    val_ds = bench.generate_dataset(cfg, power, "val", sigma2, persist=False)
    r_cdc = bench._pol_reports(test_ds.soft_x, test_ds.soft_y, test_ds.frame, "CDC", power)
    xi = bench.optimize_xi_for_power(cfg, val_ds)
    sx, sy = bench.dbp_receive(cfg, test_ds.chan, test_ds.frame, xi, sigma2, power, "test")
    r_dbp = bench._pol_reports(sx, sy, test_ds.frame, "DBP", power)
    print(
        f"P={power:+.0f}  CDC Q={r_cdc.q_db:6.3f}  DBP Q={r_dbp.q_db:6.3f} (xi={xi:.2f})"
        f"  [{time.time()-t1:.0f}s]",
        flush=True,
    )
