#!/usr/bin/env python3
"""Probe desk-scale training hyperparameters at the highest launch power."""

import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ceq import bench
from ceq.neuraleq import EqArch, build_model, train, evaluate_model_q

root = Path(__file__).resolve().parents[1]
cfg = bench.load_config(root / "configs" / "desk_sim.json")
arch_kind = sys.argv[1] if len(sys.argv) > 1 else "BILSTM"
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 80

sigma2 = bench.calibrate_run_noise(cfg)
p_max = max(cfg.sweep_powers)
train_ds = bench.generate_dataset(cfg, p_max, "train", sigma2, persist=False)
val_ds = bench.generate_dataset(cfg, p_max, "val", sigma2, persist=False)
arch = EqArch(kind=bench._ARCH_BY_EQ[arch_kind])
windows = bench._pool_windows(arch, train_ds, swap=False)
val = bench._val_eval_set(val_ds, swap=False)
print(f"{arch_kind} at {p_max:+.0f} dBm, sigma2={sigma2:.3e}", flush=True)

for batch, lr in ((32, 5e-4), (32, 2e-3), (64, 3e-3), (16, 2e-3)):
    t0 = time.time()
    tc = replace(cfg.train, epochs=epochs, batch=batch, lr=lr, seed=7)
    model = build_model(arch, 7)
    model, hist = train(model, windows, val, tc)
    updates = epochs * -(-min(len(windows[0]), tc.epoch_subset // 61) // batch)
    print(
        f"batch={batch:3d} lr={lr:.0e}: loss {hist[0][1]:.4f}->{hist[-1][1]:.4f}, "
        f"best valQ={max(h[2] for h in hist):6.3f}, ~{updates} updates, {time.time()-t0:.0f}s",
        flush=True,
    )
