#!/usr/bin/env python3
"""Pilot: desk-scale biLSTM/CNN training at the highest sweep power, with
periodic validation-Q prints, then transfer to two other powers."""

import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ceq import bench
from ceq.neuraleq import EqArch, build_model, train, transfer_fit

root = Path(__file__).resolve().parents[1]
cfg = bench.load_config(root / "configs" / "desk_sim.json")

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 150
arch_kind = sys.argv[2] if len(sys.argv) > 2 else "BILSTM"

sigma2 = bench.calibrate_run_noise(cfg)
print(f"sigma2={sigma2:.4e}", flush=True)

p_max = max(cfg.sweep_powers)
t0 = time.time()
train_ds = bench.generate_dataset(cfg, p_max, "train", sigma2, persist=False)
val_ds = bench.generate_dataset(cfg, p_max, "val", sigma2, persist=False)
test_ds = bench.generate_dataset(cfg, p_max, "test", sigma2, persist=False)
print(f"datasets at {p_max:+.0f} dBm in {time.time()-t0:.0f}s", flush=True)

r_cdc = bench._pol_reports(test_ds.soft_x, test_ds.soft_y, test_ds.frame, "CDC", p_max)
print(f"CDC test Q at {p_max:+.0f}: {r_cdc.q_db:.3f}", flush=True)

eq = "BILSTM" if arch_kind == "BILSTM" else "CNN"
arch = EqArch(kind=bench._ARCH_BY_EQ[eq])
windows = bench._pool_windows(arch, train_ds, swap=False)
val = bench._val_eval_set(val_ds, swap=False)
print(f"{eq}: {len(windows[0])} pool windows", flush=True)

cfg_t = replace(cfg.train, epochs=epochs, seed=bench.derive_seed(cfg.train.seed, 0, 3))
model = build_model(arch, cfg_t.seed)

t0 = time.time()
chunk = 25
hist_all = []
for lo in range(0, epochs, chunk):
    cfg_chunk = replace(cfg_t, epochs=min(chunk, epochs - lo), seed=cfg_t.seed + lo)
    model, hist = train(model, windows, val, cfg_chunk)
    hist_all += hist
    test_ev = bench._val_eval_set(test_ds, swap=False)
    from ceq.neuraleq import evaluate_model_q
    q_test = evaluate_model_q(model, test_ev)
    print(
        f"epoch {lo+len(hist):4d}  loss={hist[-1][1]:.5f}  valQ={hist[-1][2]:6.3f}  "
        f"testQ(x)={q_test:6.3f}  [{time.time()-t0:.0f}s]",
        flush=True,
    )

# transfer to +1 and -1 dBm
for p in (1.0, -1.0):
    tr = bench.generate_dataset(cfg, p, "train", sigma2, persist=False)
    vl = bench.generate_dataset(cfg, p, "val", sigma2, persist=False)
    te = bench.generate_dataset(cfg, p, "test", sigma2, persist=False)
    w = bench._pool_windows(arch, tr, swap=False)
    fitted, hist = transfer_fit(model, w, bench._val_eval_set(vl, swap=False), cfg_t)
    from ceq.neuraleq import evaluate_model_q
    q_t = evaluate_model_q(fitted, bench._val_eval_set(te, swap=False))
    r = bench._pol_reports(te.soft_x, te.soft_y, te.frame, "CDC", p)
    print(f"transfer to {p:+.0f}: testQ(x)={q_t:6.3f}  (CDC both-pol {r.q_db:.3f})", flush=True)
