"""Acceptance suite: every release criterion as one test, each printing a
PASS/FAIL line. Criteria 6, 8, and 9 share two desk-scale sweep runs
(run with ``pytest tests/test_acceptance.py -v -s``; allow about an hour).
"""

import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from ceq import bench, complexity
from ceq.fiberlink import LinkConfig, propagate_link
from ceq.fixedpoint import dequantize, quantize_weights, read_blob, write_blob
from ceq.modem import SymbolFrame, demap_16qam_hard, evm, q_factor_db
from ceq.neuraleq import layers
from ceq.neuraleq.model import ARCH_DEEP_CNN, EqArch
from ceq.neuraleq.train import EvalSet, evaluate_model_q
from ceq.rxdsp import DbpConfig, apply_cdc, cdc_design, dbp, normalize_to_reference
from ceq.sigkit import RrcFilter, dbm_to_watts, matched_filter_downsample, pulse_shape

from conftest import finite_difference, max_rel_err

pytestmark = pytest.mark.acceptance

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk_sim.json"


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"\n[ACCEPTANCE {num}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="session")
def desk_runs(tmp_path_factory):
    """Two identical desk-scale sweeps; reports from the first, bytes of both."""
    cfg = bench.load_config(CONFIG)
    outputs = []
    for tag in ("a", "b"):
        out_dir = tmp_path_factory.mktemp(f"sweep_{tag}")
        run_cfg = replace(cfg, out_dir=str(out_dir))
        t0 = time.time()
        reports = bench.run_sweep(run_cfg, log=lambda *a: None)
        outputs.append({
            "cfg": run_cfg,
            "reports": reports,
            "csv": (out_dir / "qreport.csv").read_bytes(),
            "seconds": time.time() - t0,
        })
    return outputs


def test_criterion_1_linear_inversion_oracle():
    t0 = time.time()
    n = 1 << 14
    frame = SymbolFrame.generate(101, n)
    rrc = RrcFilter(0.1, 32, 2)
    wave = pulse_shape(frame.tx_x, frame.tx_y, rrc, dbm_to_watts(0.0), 34e9)
    link = LinkConfig(gamma=0.0, steps_per_span_sim=1)
    chan = propagate_link(wave, link, ase=False)
    filt = cdc_design(link, chan.sample_rate, 556)
    eq = apply_cdc(chan, filt, mode="circular")
    sx, sy = matched_filter_downsample(eq, rrc)
    sx = normalize_to_reference(sx, frame.tx_x)
    sy = normalize_to_reference(sy, frame.tx_y)

    evm_x, evm_y = evm(sx, frame.tx_x), evm(sy, frame.tx_y)
    sym_err = 0
    for soft, bits in ((sx, frame.bits_x), (sy, frame.bits_y)):
        errs = demap_16qam_hard(soft) != bits
        sym_err += int(np.sum(errs.reshape(-1, 4).any(axis=1)))
    elapsed = time.time() - t0
    ok = sym_err == 0 and evm_x < 0.01 and evm_y < 0.01 and elapsed < 60
    verdict(1, ok, f"SER={sym_err}/{2*n}, EVM=({evm_x:.4f},{evm_y:.4f}), {elapsed:.1f}s (<60s)")


def test_criterion_2_dbp_inversion_oracle():
    t0 = time.time()
    frame = SymbolFrame.generate(102, 1 << 12)
    rrc = RrcFilter(0.1, 32, 4)
    wave = pulse_shape(frame.tx_x, frame.tx_y, rrc, dbm_to_watts(0.0), 34e9)
    link = LinkConfig(steps_per_span_sim=50)
    chan = propagate_link(wave, link, ase=False)
    back = dbp(chan, link, DbpConfig(50, Fraction(4), 1.0))
    field_evm = max(evm(back.x, wave.x), evm(back.y, wave.y))
    sx, _ = matched_filter_downsample(back, rrc)
    sx = normalize_to_reference(sx, frame.tx_x)
    symbol_evm = evm(sx, frame.tx_x)
    elapsed = time.time() - t0
    ok = field_evm < 0.005 and symbol_evm < 0.01 and elapsed < 120
    verdict(2, ok, f"inversion EVM={field_evm:.2e}, symbol EVM={symbol_evm:.4f}, {elapsed:.1f}s (<120s)")


def test_criterion_3_gradient_suite():
    t0 = time.time()
    rng = np.random.default_rng(303)
    worst = 0.0

    for trial in range(3):
        for padding in ("same", "valid"):
            x = rng.standard_normal((2, rng.integers(6, 10), 3))
            w = rng.standard_normal((3, 3, 3))
            b = rng.standard_normal(3)
            tgt = rng.standard_normal(layers.conv1d_forward(x, w, b, padding)[0].shape)

            def loss():
                return layers.mse_loss(layers.conv1d_forward(x, w, b, padding)[0], tgt)[0]

            out, cache = layers.conv1d_forward(x, w, b, padding)
            _, dout = layers.mse_loss(out, tgt)
            dx, dw, db = layers.conv1d_backward(dout, cache)
            for analytic, arr in ((dx, x), (dw, w), (db, b)):
                worst = max(worst, max_rel_err(analytic, finite_difference(loss, arr)))

    for trial in range(2):
        h, c_in, t_len = 3, 2, int(rng.integers(4, 7))
        params = {
            "w_fwd": rng.standard_normal((4 * h, c_in)) * 0.5,
            "u_fwd": rng.standard_normal((4 * h, h)) * 0.5,
            "b_fwd": rng.standard_normal(4 * h) * 0.5,
            "w_bwd": rng.standard_normal((4 * h, c_in)) * 0.5,
            "u_bwd": rng.standard_normal((4 * h, h)) * 0.5,
            "b_bwd": rng.standard_normal(4 * h) * 0.5,
        }
        x = rng.standard_normal((2, t_len, c_in))
        tgt = rng.standard_normal((2, t_len, 2 * h))

        def loss():
            return layers.mse_loss(layers.bilstm_forward(x, params)[0], tgt)[0]

        out, cache = layers.bilstm_forward(x, params)
        _, dout = layers.mse_loss(out, tgt)
        dx, grads = layers.bilstm_backward(dout, cache)
        worst = max(worst, max_rel_err(dx, finite_difference(loss, x)))
        for name in params:
            worst = max(worst, max_rel_err(grads[name], finite_difference(loss, params[name])))

    pred = rng.standard_normal((4, 5))
    tgt = rng.standard_normal((4, 5))
    _, dpred = layers.mse_loss(pred, tgt)
    worst = max(worst, max_rel_err(dpred, finite_difference(
        lambda: layers.mse_loss(pred, tgt)[0], pred)))

    elapsed = time.time() - t0
    ok = worst < 1e-5 and elapsed < 30
    verdict(3, ok, f"max relative gradient error {worst:.2e} (<1e-5), {elapsed:.1f}s (<30s)")


def test_criterion_4_q_factor_formula():
    q1 = q_factor_db(0.158655)
    q2 = q_factor_db(0.02275)
    ok = abs(q1 - 0.00) <= 0.01 and abs(q2 - 6.02) <= 0.01
    verdict(4, ok, f"Q(0.158655)={q1:+.4f} dB (0.00±0.01), Q(0.02275)={q2:.4f} dB (6.02±0.01)")


def test_criterion_5_throughput_and_fpga_arithmetic():
    cases = [  # (clock, utilization, expected Gb/s, expected FPGA count)
        (270e6, 0.64, 65.9, 5),
        (244e6, 0.30, 59.5, 3),
        (524e6, 0.54, 127.9, 2),
    ]
    details = []
    ok = True
    for clock, util, gbps, count in cases:
        thr = complexity.throughput_bps(61, 4, clock)
        n = complexity.fpgas_for_400g(thr, util)
        ok &= abs(thr / 1e9 - gbps) < 0.05 and n == count
        details.append(f"{clock/1e6:.0f}MHz->{thr/1e9:.2f}G/{n}FPGA")
    verdict(5, ok, ", ".join(details) + " (expect 65.9/5, 59.5/3, 127.9/2)")


def _peaks(reports, equalizer):
    rows = sorted((r for r in reports if r.equalizer_id == equalizer), key=lambda r: r.power_dbm)
    best = max(rows, key=lambda r: r.q_db)
    return best.power_dbm, best.q_db


def test_criterion_6_desk_scale_performance_trend(desk_runs):
    reports = desk_runs[0]["reports"]
    elapsed = desk_runs[0]["seconds"]
    p_cdc, q_cdc = _peaks(reports, "CDC")
    p_lstm, q_lstm = _peaks(reports, "BILSTM")
    p_cnn, q_cnn = _peaks(reports, "CNN")
    gain_lstm = q_lstm - q_cdc
    gain_cnn = q_cnn - q_cdc
    ok = (
        gain_lstm >= 0.5
        and (p_lstm - p_cdc) >= 1.0
        and 0.0 < gain_cnn <= gain_lstm
        and elapsed < 7200
    )
    verdict(6, ok, (
        f"biLSTM gain {gain_lstm:+.2f} dB (>=0.5) at {p_lstm:+.0f} vs CDC at {p_cdc:+.0f} "
        f"(shift {p_lstm - p_cdc:+.0f} >= 1), CNN gain {gain_cnn:+.2f} in (0, {gain_lstm:.2f}], "
        f"sweep {elapsed/60:.1f} min (<120)"
    ))


def test_criterion_7_noise_calibration():
    cfg = bench.load_config(CONFIG)
    sigma2 = bench.calibrate_run_noise(cfg)
    frame, chan = bench.simulate_channel(cfg, cfg.calibration_power_dbm, "val")
    sx, sy = bench.cdc_soft_symbols(cfg, chan, frame, sigma2, cfg.calibration_power_dbm, "val")
    rep = bench._pol_reports(sx, sy, frame, "CDC", cfg.calibration_power_dbm)
    ok = abs(rep.q_db - 3.91) <= 0.05
    verdict(7, ok, f"sigma2={sigma2:.4e}, replayed CDC Q={rep.q_db:.3f} dB (3.91±0.05)")


def test_criterion_8_fixed_point_round_trip(desk_runs, tmp_path):
    run = desk_runs[0]
    cfg = run["cfg"]
    p_max = max(cfg.sweep_powers)
    models = bench.load_models(cfg, "BILSTM", p_max)
    test_ds = bench.generate_dataset(cfg, p_max, "test", _sigma2_of(cfg), persist=False)
    ev = EvalSet(test_ds.soft_x, test_ds.soft_y, test_ds.frame.tx_x, test_ds.frame.bits_x, False)

    blob = quantize_weights(models["x"], 24)
    dq = abs(evaluate_model_q(models["x"], ev) - evaluate_model_q(dequantize(blob), ev))

    p1, p2 = tmp_path / "w1.ceqn", tmp_path / "w2.ceqn"
    write_blob(p1, blob)
    write_blob(p2, read_blob(p1))
    stable = p1.read_bytes() == p2.read_bytes()
    ok = dq < 0.05 and stable
    verdict(8, ok, f"fb=24 |dQ|={dq:.4f} dB (<0.05), blob byte-stable={stable}")


def _sigma2_of(cfg):
    import json

    manifest = json.loads((Path(cfg.out_dir) / "manifest.json").read_text())
    return manifest["sigma2"]


def test_criterion_9_sweep_determinism(desk_runs):
    same = desk_runs[0]["csv"] == desk_runs[1]["csv"]
    verdict(9, same, (
        f"two sweeps with identical seeds produced "
        f"{'byte-identical' if same else 'DIFFERENT'} qreport.csv "
        f"({desk_runs[0]['seconds']/60:.1f} + {desk_runs[1]['seconds']/60:.1f} min)"
    ))
