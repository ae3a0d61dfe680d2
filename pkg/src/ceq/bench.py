"""Benchmark orchestration: run configuration, dataset generation and
persistence, noise calibration, equalizer sweeps, and report emission."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fixedpoint, modem, rxdsp
from .fiberlink import LinkConfig, propagate_link
from .modem import QReport, SymbolFrame, qreports_to_csv
from .neuraleq import (
    ARCH_BILSTM,
    ARCH_DEEP_CNN,
    EqArch,
    EqModel,
    EvalSet,
    TrainConfig,
    build_model,
    equalize,
    evaluate_model_q,
    history_to_csv,
    make_windows,
    param_template,
    train,
    transfer_fit,
)
from .rxdsp import (
    DbpConfig,
    add_transceiver_noise,
    apply_cdc,
    calibrate_transceiver_noise,
    cdc_design,
    dbp_soft_symbols,
    normalize_to_reference,
    optimize_dbp_xi,
)
from .sigkit import (
    DualPolWaveform,
    RrcFilter,
    dbm_to_watts,
    matched_filter_downsample,
    pulse_shape,
    read_waveform,
    resample_rational,
    resample_to_sps,
    write_waveform,
)

ROLES = ("train", "val", "test")
_ROLE_ID = {"train": 0, "val": 1, "test": 2}
NN_EQUALIZERS = ("CNN", "BILSTM")
_ARCH_BY_EQ = {"BILSTM": ARCH_BILSTM, "CNN": ARCH_DEEP_CNN}


@dataclass(frozen=True)
class RunConfig:
    """Everything a sweep needs; JSON-serializable, unknown keys rejected."""

    link: LinkConfig = field(default_factory=LinkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep_powers: tuple = tuple(float(p) for p in range(-4, 5))
    equalizers: tuple = ("CDC", "DBP", "CNN", "BILSTM")
    symbol_rate: float = 34e9
    rolloff: float = 0.1
    rrc_span: int = 32
    sim_sps: int = 4
    dsp_sps: int = 2
    cdc_taps: int = 556
    dbp_steps_per_span: int = 1
    dbp_sa_per_symbol: tuple = (23, 10)
    xi_grid: tuple = tuple(round(0.05 * k, 2) for k in range(31))
    test_symbols: int = 1 << 14
    val_symbols: int = 1 << 12
    data_seed: int = 1234
    calibration_target_q_db: float = 3.91
    calibration_power_dbm: float = -1.0
    fraction_bits: int = 24
    out_dir: str = "runs/desk"
    threads: int = 1
    deterministic: bool = True
    retrain_all: bool = False

    def __post_init__(self):
        if not self.sweep_powers:
            raise ValueError("sweep_powers must be non-empty")
        for eq in self.equalizers:
            if eq not in modem.EQUALIZER_IDS:
                raise ValueError(f"unknown equalizer {eq!r}")
        if self.sim_sps % self.dsp_sps != 0:
            raise ValueError("sim_sps must be a multiple of dsp_sps")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def dbp_config(self) -> DbpConfig:
        num, den = self.dbp_sa_per_symbol
        return DbpConfig(self.dbp_steps_per_span, Fraction(num, den), 1.0)

    def rrc(self, sps: int) -> RrcFilter:
        return RrcFilter(self.rolloff, self.rrc_span, sps)

    def role_symbols(self, role: str) -> int:
        if role == "train":
            return self.train.pool_size
        if role == "val":
            return self.val_symbols
        return self.test_symbols


_LINK_KEYS = {
    "alpha_db_km", "dispersion_d", "gamma", "span_km", "n_spans", "nf_db",
    "wavelength_nm", "steps_per_span_sim", "launch_power_dbm", "noise_seed", "ase",
}
_TRAIN_KEYS = {"lr", "batch", "epochs", "pool_size", "epoch_subset", "seed", "loss", "lr_final"}
_RUN_KEYS = {
    "link", "train", "sweep_powers", "equalizers", "symbol_rate", "rolloff",
    "rrc_span", "sim_sps", "dsp_sps", "cdc_taps", "dbp_steps_per_span",
    "dbp_sa_per_symbol", "xi_grid", "test_symbols", "val_symbols", "data_seed",
    "calibration_target_q_db", "calibration_power_dbm", "fraction_bits",
    "out_dir", "threads", "deterministic", "retrain_all",
}


def _strict(d: dict, allowed: set, what: str) -> dict:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {what} config keys: {sorted(unknown)}")
    return d


def config_from_dict(d: dict) -> RunConfig:
    d = _strict(dict(d), _RUN_KEYS, "run")
    kwargs = {}
    if "link" in d:
        kwargs["link"] = LinkConfig(**_strict(d.pop("link"), _LINK_KEYS, "link"))
    if "train" in d:
        kwargs["train"] = TrainConfig(**_strict(d.pop("train"), _TRAIN_KEYS, "train"))
    for key in ("sweep_powers", "equalizers", "xi_grid", "dbp_sa_per_symbol"):
        if key in d:
            kwargs[key] = tuple(d.pop(key))
    kwargs.update(d)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def config_to_dict(cfg: RunConfig) -> dict:
    train_d = {k: getattr(cfg.train, k) for k in sorted(_TRAIN_KEYS)}
    if train_d.get("lr_final") is None:
        train_d.pop("lr_final", None)
    return {
        "link": {k: getattr(cfg.link, k) for k in sorted(_LINK_KEYS)},
        "train": train_d,
        "sweep_powers": list(cfg.sweep_powers),
        "equalizers": list(cfg.equalizers),
        "symbol_rate": cfg.symbol_rate,
        "rolloff": cfg.rolloff,
        "rrc_span": cfg.rrc_span,
        "sim_sps": cfg.sim_sps,
        "dsp_sps": cfg.dsp_sps,
        "cdc_taps": cfg.cdc_taps,
        "dbp_steps_per_span": cfg.dbp_steps_per_span,
        "dbp_sa_per_symbol": list(cfg.dbp_sa_per_symbol),
        "xi_grid": list(cfg.xi_grid),
        "test_symbols": cfg.test_symbols,
        "val_symbols": cfg.val_symbols,
        "data_seed": cfg.data_seed,
        "calibration_target_q_db": cfg.calibration_target_q_db,
        "calibration_power_dbm": cfg.calibration_power_dbm,
        "fraction_bits": cfg.fraction_bits,
        "out_dir": cfg.out_dir,
        "threads": cfg.threads,
        "deterministic": cfg.deterministic,
        "retrain_all": cfg.retrain_all,
    }


def derive_seed(*ids) -> int:
    """Stable 32-bit stream id from a tuple of (possibly negative) integers."""
    key = tuple(int(i) & 0xFFFFFFFFFFFFFFFF for i in ids)
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _power_key(power_dbm: float) -> str:
    return f"p{power_dbm:+.1f}"


def _tnoise_rng(cfg: RunConfig, power_dbm: float, role: str) -> np.random.Generator:
    seed = derive_seed(cfg.data_seed, _ROLE_ID[role], int(round(power_dbm * 1000)), 2)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass
class PowerDataset:
    """One (launch power, role) realization of the simulated link."""

    power_dbm: float
    role: str
    frame: SymbolFrame
    chan: DualPolWaveform          # channel output at the receiver DSP rate
    soft_x: np.ndarray             # CDC-path soft symbols (noise included)
    soft_y: np.ndarray
    sigma2: float


def simulate_channel(cfg: RunConfig, power_dbm: float, role: str):
    """Bits -> shaped frame -> Manakov link -> receiver-rate waveform."""
    n = cfg.role_symbols(role)
    pkey = int(round(power_dbm * 1000))
    frame = SymbolFrame.generate(derive_seed(cfg.data_seed, _ROLE_ID[role], pkey), n)
    wave = pulse_shape(
        frame.tx_x, frame.tx_y, cfg.rrc(cfg.sim_sps), dbm_to_watts(power_dbm), cfg.symbol_rate
    )
    link = replace(
        cfg.link,
        launch_power_dbm=power_dbm,
        noise_seed=derive_seed(cfg.link.noise_seed, _ROLE_ID[role], pkey, 1),
    )
    chan = propagate_link(wave, link, ase=cfg.link.ase)
    if cfg.sim_sps != cfg.dsp_sps:
        ratio = Fraction(cfg.dsp_sps, cfg.sim_sps)
        chan = resample_rational(chan, ratio.numerator, ratio.denominator)
    return frame, chan


def cdc_soft_symbols(cfg: RunConfig, chan: DualPolWaveform, frame: SymbolFrame,
                     sigma2: float, power_dbm: float, role: str):
    """Fixed receiver chain: CDC -> matched filter -> 1 Sa/symbol ->
    normalize -> calibrated transceiver noise."""
    filt = cdc_design(cfg.link, chan.sample_rate, cfg.cdc_taps)
    eq = apply_cdc(chan, filt, mode="circular")
    sx, sy = matched_filter_downsample(eq, cfg.rrc(cfg.dsp_sps))
    sx = normalize_to_reference(sx, frame.tx_x)
    sy = normalize_to_reference(sy, frame.tx_y)
    if sigma2 > 0.0:
        rng = _tnoise_rng(cfg, power_dbm, role)
        sx = add_transceiver_noise(sx, sigma2, rng)
        sy = add_transceiver_noise(sy, sigma2, rng)
    return sx, sy


def dbp_receive(cfg: RunConfig, chan: DualPolWaveform, frame: SymbolFrame,
                xi: float, sigma2: float, power_dbm: float, role: str):
    """DBP branch of the receiver chain; shares the CDC branch's noise stream."""
    target = cfg.dbp_config.sa_per_symbol
    wave = resample_to_sps(chan, target)
    dbp_cfg = DbpConfig(cfg.dbp_steps_per_span, target, xi)
    link = replace(cfg.link, launch_power_dbm=power_dbm)
    sx, sy = dbp_soft_symbols(wave, link, dbp_cfg, cfg.rrc(cfg.dsp_sps))
    sx = normalize_to_reference(sx, frame.tx_x)
    sy = normalize_to_reference(sy, frame.tx_y)
    if sigma2 > 0.0:
        rng = _tnoise_rng(cfg, power_dbm, role)
        sx = add_transceiver_noise(sx, sigma2, rng)
        sy = add_transceiver_noise(sy, sigma2, rng)
    return sx, sy


def _dataset_paths(cfg: RunConfig, power_dbm: float, role: str) -> dict:
    base = Path(cfg.out_dir) / "datasets"
    stem = f"{role}_{_power_key(power_dbm)}"
    paths = {"tx": base / f"{stem}_tx.ceqw", "soft": base / f"{stem}_soft.ceqw"}
    if role != "train":
        paths["chan"] = base / f"{stem}_chan.ceqw"
    return paths


def generate_dataset(cfg: RunConfig, power_dbm: float, role: str, sigma2: float,
                     persist: bool = True) -> PowerDataset:
    """Simulate one realization and (optionally) persist it as CEQW1 files."""
    frame, chan = simulate_channel(cfg, power_dbm, role)
    sx, sy = cdc_soft_symbols(cfg, chan, frame, sigma2, power_dbm, role)
    ds = PowerDataset(power_dbm, role, frame, chan, sx, sy, sigma2)
    if persist:
        paths = _dataset_paths(cfg, power_dbm, role)
        paths["tx"].parent.mkdir(parents=True, exist_ok=True)
        write_waveform(paths["tx"], DualPolWaveform(frame.tx_x, frame.tx_y, cfg.symbol_rate, Fraction(1)))
        write_waveform(paths["soft"], DualPolWaveform(sx, sy, cfg.symbol_rate, Fraction(1)))
        if "chan" in paths:
            write_waveform(paths["chan"], chan)
    return ds


def load_dataset(cfg: RunConfig, power_dbm: float, role: str, sigma2: float) -> PowerDataset:
    """Load a persisted dataset; bits are regenerated from the seed."""
    paths = _dataset_paths(cfg, power_dbm, role)
    pkey = int(round(power_dbm * 1000))
    frame = SymbolFrame.generate(
        derive_seed(cfg.data_seed, _ROLE_ID[role], pkey), cfg.role_symbols(role)
    )
    soft = read_waveform(paths["soft"])
    chan = read_waveform(paths["chan"]) if "chan" in paths else None
    return PowerDataset(power_dbm, role, frame, chan, soft.x, soft.y, sigma2)


def calibrate_run_noise(cfg: RunConfig) -> float:
    """Per-symbol transceiver noise variance matching the target CDC Q at the
    calibration power, on the val-role realization."""
    frame, chan = simulate_channel(cfg, cfg.calibration_power_dbm, "val")

    def q_of_sigma2(sigma2: float) -> float:
        sx, sy = cdc_soft_symbols(cfg, chan, frame, sigma2, cfg.calibration_power_dbm, "val")
        bx = modem.ber(modem.demap_16qam_hard(sx), frame.bits_x)
        by = modem.ber(modem.demap_16qam_hard(sy), frame.bits_y)
        return modem.q_factor_db_safe(0.5 * (bx + by))

    return calibrate_transceiver_noise(cfg.calibration_target_q_db, q_of_sigma2)


def _pol_reports(sx, sy, frame: SymbolFrame, equalizer_id: str, power_dbm: float) -> QReport:
    n = len(sx)
    bx = modem.ber(modem.demap_16qam_hard(sx), frame.bits_x[: 4 * n])
    by = modem.ber(modem.demap_16qam_hard(sy), frame.bits_y[: 4 * n])
    avg_ber = 0.5 * (bx + by)
    ev = modem.evm(
        np.concatenate([sx, sy]), np.concatenate([frame.tx_x[:n], frame.tx_y[:n]])
    )
    return QReport(equalizer_id, power_dbm, avg_ber, modem.q_factor_db_safe(avg_ber), ev, 2 * n)


def _nn_report(models: dict, ds: PowerDataset, equalizer_id: str) -> QReport:
    rec_x = equalize(models["x"], ds.soft_x, ds.soft_y, swap=False)
    rec_y = equalize(models["y"], ds.soft_x, ds.soft_y, swap=True)
    rec_x = normalize_to_reference(rec_x, ds.frame.tx_x)
    rec_y = normalize_to_reference(rec_y, ds.frame.tx_y)
    return _pol_reports(rec_x, rec_y, ds.frame, equalizer_id, ds.power_dbm)


def _pool_windows(arch: EqArch, ds: PowerDataset, swap: bool):
    target = ds.frame.tx_y if swap else ds.frame.tx_x
    x, y, _ = make_windows(ds.soft_x, ds.soft_y, target, arch, swap)
    return x, y


def _val_eval_set(ds: PowerDataset, swap: bool) -> EvalSet:
    frame = ds.frame
    return EvalSet(
        ds.soft_x, ds.soft_y,
        frame.tx_y if swap else frame.tx_x,
        frame.bits_y if swap else frame.bits_x,
        swap,
    )


def train_equalizer(cfg: RunConfig, equalizer_id: str, train_ds: PowerDataset,
                    val_ds: PowerDataset) -> dict:
    """Train one architecture for both polarizations at one launch power."""
    arch = EqArch(kind=_ARCH_BY_EQ[equalizer_id])
    models = {}
    history = {}
    for pol, swap in (("x", False), ("y", True)):
        seed = derive_seed(cfg.train.seed, {"x": 0, "y": 1}[pol], 3)
        model = build_model(arch, seed)
        pol_cfg = replace(cfg.train, seed=seed)
        model, hist = train(model, _pool_windows(arch, train_ds, swap),
                            _val_eval_set(val_ds, swap), pol_cfg)
        models[pol] = model
        history[pol] = hist
    return {"models": models, "history": history}


def transfer_equalizer(cfg: RunConfig, base_models: dict, train_ds: PowerDataset,
                       val_ds: PowerDataset) -> dict:
    models = {}
    history = {}
    for pol, swap in (("x", False), ("y", True)):
        seed = derive_seed(cfg.train.seed, {"x": 0, "y": 1}[pol], 4, int(round(train_ds.power_dbm * 1000)))
        pol_cfg = replace(cfg.train, seed=seed)
        arch = base_models[pol].arch
        model, hist = transfer_fit(base_models[pol], _pool_windows(arch, train_ds, swap),
                                   _val_eval_set(val_ds, swap), pol_cfg)
        models[pol] = model
        history[pol] = hist
    return {"models": models, "history": history}


def save_models(cfg: RunConfig, equalizer_id: str, power_dbm: float, models: dict) -> Path:
    path = Path(cfg.out_dir) / "models" / f"{equalizer_id.lower()}_{_power_key(power_dbm)}.npz"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"arch_kind": np.array(models["x"].arch.kind)}
    for pol in ("x", "y"):
        for name, value in models[pol].params.items():
            payload[f"{pol}.{name}"] = value
    np.savez(path, **payload)
    return path


def load_models(cfg: RunConfig, equalizer_id: str, power_dbm: float) -> dict:
    path = Path(cfg.out_dir) / "models" / f"{equalizer_id.lower()}_{_power_key(power_dbm)}.npz"
    if not path.exists():
        raise FileNotFoundError(f"no trained model at {path}; run the train step first")
    with np.load(path) as data:
        arch = EqArch(kind=str(data["arch_kind"]))
        models = {}
        for pol in ("x", "y"):
            params = {name: data[f"{pol}.{name}"] for name in param_template(arch)}
            models[pol] = EqModel(arch, params)
    return models


def optimize_xi_for_power(cfg: RunConfig, val_ds: PowerDataset) -> float:
    """Grid-search the DBP nonlinear scale on the validation realization."""
    target = cfg.dbp_config.sa_per_symbol
    wave = resample_to_sps(val_ds.chan, target)
    link = replace(cfg.link, launch_power_dbm=val_ds.power_dbm)
    return optimize_dbp_xi(
        wave, val_ds.frame, link,
        DbpConfig(cfg.dbp_steps_per_span, target, 1.0),
        cfg.xi_grid, cfg.rrc(cfg.dsp_sps),
    )


def run_sweep(cfg: RunConfig, log=print) -> list:
    """Full benchmark: calibrate, simulate, train/transfer, evaluate, emit CSV."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sigma2 = calibrate_run_noise(cfg)
    log(f"calibrated transceiver noise variance: {sigma2:.6e} W/symbol")

    datasets = {}
    for power in sorted(cfg.sweep_powers):
        for role in ROLES:
            if role == "train" and not any(eq in cfg.equalizers for eq in NN_EQUALIZERS):
                continue
            datasets[(power, role)] = generate_dataset(cfg, power, role, sigma2)
        log(f"datasets ready at {power:+.1f} dBm")

    manifest = {"config": config_to_dict(cfg), "sigma2": sigma2}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    reports = []

    def eval_linear(power: float) -> list:
        rows = []
        test_ds = datasets[(power, "test")]
        if "CDC" in cfg.equalizers:
            rows.append(_pol_reports(test_ds.soft_x, test_ds.soft_y, test_ds.frame, "CDC", power))
        if "DBP" in cfg.equalizers:
            xi = optimize_xi_for_power(cfg, datasets[(power, "val")])
            sx, sy = dbp_receive(cfg, test_ds.chan, test_ds.frame, xi, sigma2, power, "test")
            rows.append(_pol_reports(sx, sy, test_ds.frame, "DBP", power))
        return rows

    powers = sorted(cfg.sweep_powers)
    if cfg.threads > 1 and not cfg.deterministic:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for rows in pool.map(eval_linear, powers):
                reports.extend(rows)
    else:
        for power in powers:
            reports.extend(eval_linear(power))
    log("linear equalizers evaluated")

    p_max = max(powers)
    for eq in NN_EQUALIZERS:
        if eq not in cfg.equalizers:
            continue
        trained = train_equalizer(cfg, eq, datasets[(p_max, "train")], datasets[(p_max, "val")])
        save_models(cfg, eq, p_max, trained["models"])
        for pol in ("x", "y"):
            hist_path = out / f"history_{eq.lower()}_{pol}_{_power_key(p_max)}.csv"
            hist_path.write_text(history_to_csv(trained["history"][pol]))
        reports.append(_nn_report(trained["models"], datasets[(p_max, "test")], eq))
        log(f"{eq} trained at {p_max:+.1f} dBm")
        for power in powers:
            if power == p_max:
                continue
            if cfg.retrain_all:
                fitted = train_equalizer(cfg, eq, datasets[(power, "train")], datasets[(power, "val")])
            else:
                fitted = transfer_equalizer(cfg, trained["models"], datasets[(power, "train")],
                                            datasets[(power, "val")])
            save_models(cfg, eq, power, fitted["models"])
            reports.append(_nn_report(fitted["models"], datasets[(power, "test")], eq))
            log(f"{eq} adapted to {power:+.1f} dBm")

    (out / "qreport.csv").write_text(qreports_to_csv(reports))
    return sorted(reports, key=lambda r: (r.equalizer_id, r.power_dbm))


def export_weights(cfg: RunConfig, equalizer_id: str, power_dbm: float, path=None) -> Path:
    """Quantize a trained model pair into CEQN1 blobs (one file per pol)."""
    models = load_models(cfg, equalizer_id, power_dbm)
    base = Path(path) if path else Path(cfg.out_dir) / "models"
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for pol in ("x", "y"):
        blob = fixedpoint.quantize_weights(models[pol], cfg.fraction_bits)
        target = base / f"{equalizer_id.lower()}_{_power_key(power_dbm)}_{pol}.ceqn"
        fixedpoint.write_blob(target, blob)
        written.append(target)
    return written[0].parent


def import_weights(paths) -> dict:
    """Read CEQN1 blobs back into float models keyed by file stem."""
    out = {}
    for p in paths:
        out[Path(p).stem] = fixedpoint.dequantize(fixedpoint.read_blob(p))
    return out
