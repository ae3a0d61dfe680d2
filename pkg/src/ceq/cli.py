"""Command-line entry points for dataset generation, training, evaluation,
sweeps, complexity tables, and fixed-point weight exchange."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, complexity
from .modem import qreports_to_csv
from .neuraleq import EqArch
from .neuraleq.model import ARCH_BILSTM, ARCH_DEEP_CNN

# Post-synthesis operating points reported for the VCK190-class realization;
# inputs here, not predictions.
FPGA_OPERATING_POINTS = {
    "BILSTM": {"clock_hz": 270e6, "max_util": 0.64},
    "CNN": {"clock_hz": 244e6, "max_util": 0.30},
    "CDC": {"clock_hz": 524e6, "max_util": 0.54},
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="run-config JSON file")
    p.add_argument("--seed", type=int, help="override data_seed")
    p.add_argument("--out-dir", help="override output directory")
    p.add_argument("--threads", type=int, help="worker threads (CEQ_THREADS env overrides)")
    p.add_argument("--deterministic", action="store_true", help="force sequential, reproducible execution")


def _load_cfg(args) -> bench.RunConfig:
    cfg = bench.load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, data_seed=args.seed)
    if args.out_dir is not None:
        cfg = replace(cfg, out_dir=args.out_dir)
    threads = os.environ.get("CEQ_THREADS")
    if threads is not None:
        cfg = replace(cfg, threads=int(threads))
    elif args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.deterministic:
        cfg = replace(cfg, deterministic=True)
    return cfg


def _cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    sigma2 = bench.calibrate_run_noise(cfg)
    print(f"sigma2 = {sigma2:.6e}")
    for power in sorted(cfg.sweep_powers):
        for role in bench.ROLES:
            bench.generate_dataset(cfg, power, role, sigma2)
        print(f"generated {power:+.1f} dBm")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    sigma2 = bench.calibrate_run_noise(cfg)
    p_max = max(cfg.sweep_powers)
    train_ds = bench.generate_dataset(cfg, p_max, "train", sigma2, persist=False)
    val_ds = bench.generate_dataset(cfg, p_max, "val", sigma2, persist=False)
    for eq in bench.NN_EQUALIZERS:
        if eq in cfg.equalizers:
            fitted = bench.train_equalizer(cfg, eq, train_ds, val_ds)
            path = bench.save_models(cfg, eq, p_max, fitted["models"])
            print(f"trained {eq} at {p_max:+.1f} dBm -> {path}")
    return 0


def _cmd_transfer(args) -> int:
    cfg = _load_cfg(args)
    sigma2 = bench.calibrate_run_noise(cfg)
    p_max = max(cfg.sweep_powers)
    for eq in bench.NN_EQUALIZERS:
        if eq not in cfg.equalizers:
            continue
        base = bench.load_models(cfg, eq, p_max)
        for power in sorted(cfg.sweep_powers):
            if power == p_max:
                continue
            train_ds = bench.generate_dataset(cfg, power, "train", sigma2, persist=False)
            val_ds = bench.generate_dataset(cfg, power, "val", sigma2, persist=False)
            fitted = bench.transfer_equalizer(cfg, base, train_ds, val_ds)
            path = bench.save_models(cfg, eq, power, fitted["models"])
            print(f"transferred {eq} to {power:+.1f} dBm -> {path}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    sigma2 = bench.calibrate_run_noise(cfg)
    reports = []
    for power in sorted(cfg.sweep_powers):
        test_ds = bench.generate_dataset(cfg, power, "test", sigma2, persist=False)
        if "CDC" in cfg.equalizers:
            reports.append(bench._pol_reports(test_ds.soft_x, test_ds.soft_y, test_ds.frame, "CDC", power))
        if "DBP" in cfg.equalizers:
            val_ds = bench.generate_dataset(cfg, power, "val", sigma2, persist=False)
            xi = bench.optimize_xi_for_power(cfg, val_ds)
            sx, sy = bench.dbp_receive(cfg, test_ds.chan, test_ds.frame, xi, sigma2, power, "test")
            reports.append(bench._pol_reports(sx, sy, test_ds.frame, "DBP", power))
        for eq in bench.NN_EQUALIZERS:
            if eq in cfg.equalizers:
                models = bench.load_models(cfg, eq, power)
                reports.append(bench._nn_report(models, test_ds, eq))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "qreport.csv").write_text(qreports_to_csv(reports))
    print(f"wrote {out / 'qreport.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    reports = bench.run_sweep(cfg)
    print(qreports_to_csv(reports), end="")
    print(f"wrote {Path(cfg.out_dir) / 'qreport.csv'}", file=sys.stderr)
    return 0


def _cmd_complexity(args) -> int:
    cfg = _load_cfg(args)
    arch_lstm = EqArch(kind=ARCH_BILSTM)
    arch_cnn = EqArch(kind=ARCH_DEEP_CNN)
    rm = {
        "BILSTM": complexity.rm_bilstm(
            arch_lstm.n_hidden, arch_lstm.in_channels, arch_lstm.n_in_symbols,
            arch_lstm.out_kernel, arch_lstm.out_filters, arch_lstm.n_out_symbols,
        ),
        "CNN": complexity.rm_cnn(complexity.deep_cnn_layers(arch_cnn), arch_cnn.n_out_symbols),
        "CDC": complexity.rm_cdc(cfg.cdc_taps, cfg.dsp_sps),
    }
    rows = [
        complexity.resource_report(eq, rm[eq], pt["clock_hz"], pt["max_util"],
                                   n_out_symbols=arch_lstm.n_out_symbols)
        for eq, pt in FPGA_OPERATING_POINTS.items()
    ]
    print(complexity.reports_to_csv(rows), end="")
    return 0


def _cmd_export_weights(args) -> int:
    cfg = _load_cfg(args)
    power = args.power if args.power is not None else max(cfg.sweep_powers)
    where = bench.export_weights(cfg, args.equalizer, power, args.dest)
    print(f"wrote CEQN1 blobs under {where}")
    return 0


def _cmd_import_weights(args) -> int:
    models = bench.import_weights(args.blobs)
    for stem, model in models.items():
        print(f"{stem}: {model.arch.kind}, {model.param_count()} parameters")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ceq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, extra in (
        ("generate", _cmd_generate, None),
        ("train", _cmd_train, None),
        ("transfer", _cmd_transfer, None),
        ("evaluate", _cmd_evaluate, None),
        ("sweep", _cmd_sweep, None),
        ("complexity", _cmd_complexity, None),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("export-weights")
    _add_common(p)
    p.add_argument("--equalizer", choices=list(bench.NN_EQUALIZERS), required=True)
    p.add_argument("--power", type=float, help="launch power of the stored model (default: max sweep power)")
    p.add_argument("--dest", help="directory for the blobs")
    p.set_defaults(fn=_cmd_export_weights)

    p = sub.add_parser("import-weights")
    p.add_argument("blobs", nargs="+", help="CEQN1 files")
    p.set_defaults(fn=_cmd_import_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
