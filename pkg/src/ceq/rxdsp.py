"""Receiver-side classical DSP: CDC FIR, digital backpropagation, symbol
normalization, and calibrated transceiver-noise injection."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal.windows import tukey

from . import modem
from .fiberlink import LinkConfig, split_step, MANAKOV_FACTOR
from .sigkit import (
    DualPolWaveform,
    RrcFilter,
    circular_filter,
    matched_filter_downsample,
    resample_rational,
    write_waveform,
)


@dataclass(frozen=True)
class CdcFilter:
    """Time-domain chromatic dispersion compensator."""

    taps: np.ndarray
    design_sample_rate: float
    total_dispersion_ps_nm: float

    def __post_init__(self):
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.complex128))
        if not np.isfinite(self.taps).all():
            raise ValueError("CDC taps must be finite")

    @property
    def center(self) -> int:
        return (len(self.taps) - 1) // 2


@dataclass(frozen=True)
class DbpConfig:
    """Backpropagation operating point."""

    steps_per_span: int = 1
    sa_per_symbol: Fraction = Fraction(23, 10)
    xi: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "sa_per_symbol", Fraction(self.sa_per_symbol))
        if self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")
        if not 0.0 <= self.xi <= 1.5:
            raise ValueError("xi must lie in [0, 1.5]")


def cdc_design(cfg: LinkConfig, sample_rate: float, n_taps: int, edge_fraction: float = 0.25) -> CdcFilter:
    """Design a centered time-domain inverse-dispersion FIR.

    Taps are the inverse DFT of exp(-i*(beta2/2)*w^2*L_total) on a grid of at
    least 8x n_taps points, truncated to n_taps under a raised-cosine edge
    window.
    """
    if n_taps < 3:
        raise ValueError("n_taps must be >= 3")
    grid = 1 << int(np.ceil(np.log2(8 * n_taps)))
    if n_taps > grid:
        raise ValueError("n_taps exceeds the design grid")
    beta2_s2_km = cfg.beta2_ps2_km * 1e-24
    w = 2.0 * np.pi * np.fft.fftfreq(grid) * sample_rate
    h_resp = np.exp(-0.5j * beta2_s2_km * cfg.total_km * w**2)
    impulse = np.roll(np.fft.ifft(h_resp), grid // 2)
    start = grid // 2 - (n_taps - 1) // 2
    taps = impulse[start:start + n_taps] * tukey(n_taps, edge_fraction)
    return CdcFilter(taps, sample_rate, cfg.dispersion_d * cfg.total_km)


def _overlap_save(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Full linear convolution of x with taps via block overlap-save."""
    n = len(x)
    m = len(taps)
    nfft = 1 << int(np.ceil(np.log2(max(8 * m, 1024))))
    step = nfft - m + 1
    h_f = np.fft.fft(taps, nfft)
    full_len = n + m - 1
    xp = np.concatenate([np.zeros(m - 1, x.dtype), x, np.zeros(nfft, x.dtype)])
    out = np.empty(full_len, dtype=np.complex128)
    pos = 0
    while pos < full_len:
        block = np.fft.ifft(np.fft.fft(xp[pos:pos + nfft]) * h_f)[m - 1:]
        take = min(step, full_len - pos)
        out[pos:pos + take] = block[:take]
        pos += take
    return out


def apply_fir(wave: DualPolWaveform, taps: np.ndarray, mode: str = "linear") -> DualPolWaveform:
    """Same-polarization FIR with the filter group delay removed.

    ``linear`` performs overlap-save fast convolution over a zero-extended
    frame (bit-matching direct convolution); ``circular`` wraps the frame,
    which is what the periodic simulation pipeline uses.
    """
    taps = np.asarray(taps, dtype=np.complex128)
    if len(taps) == 0:
        raise ValueError("taps must be non-empty")
    center = (len(taps) - 1) // 2
    if mode == "linear":
        n = len(wave)
        fx = _overlap_save(wave.x, taps)[center:center + n]
        fy = _overlap_save(wave.y, taps)[center:center + n]
    elif mode == "circular":
        fx = circular_filter(wave.x, taps, center)
        fy = circular_filter(wave.y, taps, center)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return wave.with_fields(fx, fy)


def apply_cdc(wave: DualPolWaveform, filt: CdcFilter, mode: str = "circular") -> DualPolWaveform:
    if abs(wave.sample_rate - filt.design_sample_rate) > 1e-3:
        raise ValueError("CDC filter was designed for a different sample rate")
    return apply_fir(wave, filt.taps, mode)


def export_taps(path, filt: CdcFilter, symbol_rate: float) -> None:
    """Dump filter taps as a CEQW1 file (taps in x, zeros in y) for inspection."""
    wave = DualPolWaveform(filt.taps, np.zeros_like(filt.taps), symbol_rate, Fraction(1))
    write_waveform(path, wave)


def dbp(wave: DualPolWaveform, cfg: LinkConfig, dbp_cfg: DbpConfig) -> DualPolWaveform:
    """Span-by-span digital backpropagation.

    Mirrors the forward chain in reverse: undo each EDFA's gain, then run
    the span with negated beta2 and gamma (gamma scaled by xi) and with the
    loss replaced by distributed gain. With steps matching the forward
    simulation and xi=1 this inverts the noiseless channel exactly.
    """
    # frame lengths quantize the achievable rate; accept the nearest rational
    if abs(float(wave.sps) - float(dbp_cfg.sa_per_symbol)) > 0.02 * float(dbp_cfg.sa_per_symbol):
        raise ValueError("waveform must be resampled to dbp_cfg.sa_per_symbol first")
    undo_gain = 10.0 ** (-cfg.span_gain_db / 20.0)
    x, y = wave.x, wave.y
    for _ in range(cfg.n_spans):
        x, y = split_step(
            x * undo_gain,
            y * undo_gain,
            wave.sample_rate,
            cfg.span_km,
            -cfg.alpha_db_km,
            -cfg.beta2_ps2_km,
            -dbp_cfg.xi * MANAKOV_FACTOR * cfg.gamma,
            dbp_cfg.steps_per_span,
        )
    return wave.with_fields(x, y)


def cdc_freq_domain(wave: DualPolWaveform, cfg: LinkConfig) -> DualPolWaveform:
    """Single-shot frequency-domain CDC (exact all-pass inverse)."""
    beta2_s2_km = cfg.beta2_ps2_km * 1e-24
    w = 2.0 * np.pi * np.fft.fftfreq(len(wave)) * wave.sample_rate
    h_resp = np.exp(-0.5j * beta2_s2_km * cfg.total_km * w**2)
    return wave.with_fields(
        np.fft.ifft(np.fft.fft(wave.x) * h_resp),
        np.fft.ifft(np.fft.fft(wave.y) * h_resp),
    )


def normalize_to_reference(rx: np.ndarray, tx: np.ndarray) -> np.ndarray:
    """Least-squares one-tap fit: returns a*rx with a = <rx,tx>/<rx,rx>."""
    rx = np.asarray(rx, dtype=np.complex128)
    tx = np.asarray(tx, dtype=np.complex128)
    if len(rx) != len(tx) or len(rx) == 0:
        raise ValueError("sequences must be non-empty and equal length")
    denom = np.sum(np.abs(rx) ** 2)
    if denom == 0.0:
        raise ValueError("rx is all-zero")
    a = np.vdot(rx, tx) / denom
    return a * rx


def add_transceiver_noise(symbols: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Add circular complex Gaussian noise of variance sigma2 per symbol."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    if sigma2 == 0.0:
        return np.asarray(symbols, dtype=np.complex128)
    n = len(symbols)
    noise = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return np.asarray(symbols, dtype=np.complex128) + noise


def calibrate_transceiver_noise(
    target_q_db: float,
    q_of_sigma2,
    tol_db: float = 0.05,
    sigma2_init: float = 1e-3,
    max_iter: int = 80,
) -> float:
    """Bisect the per-symbol noise variance until the pipeline Q matches.

    ``q_of_sigma2`` evaluates the CDC pipeline Q at the reference launch
    power on a fixed realization; it must be monotone non-increasing in
    sigma2. Raises if even the noiseless pipeline sits below the target.
    """
    q0 = q_of_sigma2(0.0)
    if q0 < target_q_db - tol_db:
        raise ValueError(
            f"target Q {target_q_db:.2f} dB unreachable: noiseless Q is {q0:.2f} dB"
        )
    if abs(q0 - target_q_db) <= tol_db:
        return 0.0

    hi = sigma2_init
    for _ in range(max_iter):
        if q_of_sigma2(hi) <= target_q_db:
            break
        hi *= 4.0
    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        q_mid = q_of_sigma2(mid)
        if abs(q_mid - target_q_db) <= tol_db:
            return mid
        if q_mid > target_q_db:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimize_dbp_xi(
    rx_wave: DualPolWaveform,
    frame: modem.SymbolFrame,
    cfg: LinkConfig,
    dbp_cfg: DbpConfig,
    grid,
    rrc: RrcFilter,
) -> float:
    """Pick the grid xi maximizing Q on a validation slice (ties: smaller xi).

    ``rx_wave`` must already run at ``dbp_cfg.sa_per_symbol``.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("xi grid must be non-empty")
    best_xi = grid[0]
    best_q = -np.inf
    for xi in grid:
        trial = DbpConfig(dbp_cfg.steps_per_span, dbp_cfg.sa_per_symbol, xi)
        sx, sy = dbp_soft_symbols(rx_wave, cfg, trial, rrc)
        q = _soft_symbol_q(sx, sy, frame)
        if q > best_q:
            best_q = q
            best_xi = xi
    return best_xi


def dbp_soft_symbols(
    rx_wave: DualPolWaveform, cfg: LinkConfig, dbp_cfg: DbpConfig, rrc: RrcFilter
) -> tuple[np.ndarray, np.ndarray]:
    """DBP, return to an integer rate, matched-filter, downsample, normalize."""
    out = dbp(rx_wave, cfg, dbp_cfg)
    ratio = Fraction(2) / out.sps
    if ratio != 1:
        out = resample_rational(out, ratio.numerator, ratio.denominator)
    sx, sy = matched_filter_downsample(out, rrc)
    return sx, sy


def _soft_symbol_q(sx, sy, frame: modem.SymbolFrame) -> float:
    sx = normalize_to_reference(sx, frame.tx_x[: len(sx)])
    sy = normalize_to_reference(sy, frame.tx_y[: len(sy)])
    bx = modem.ber(modem.demap_16qam_hard(sx), frame.bits_x[: 4 * len(sx)])
    by = modem.ber(modem.demap_16qam_hard(sy), frame.bits_y[: 4 * len(sy)])
    return modem.q_factor_db_safe(0.5 * (bx + by))
