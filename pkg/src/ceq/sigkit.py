"""Dual-polarization signal types, RRC pulse shaping, resampling, power units.

Frames are treated as periodic: every LTI stage in the simulation chain
(pulse shaping, matched filtering, resampling, fiber propagation) operates
with circular boundary conditions, so a shaped frame round-trips through a
linear channel and its inverse without edge transients.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

CEQW_MAGIC = b"CEQW"
CEQW_VERSION = 1
_CEQW_HEADER = struct.Struct("<4sIQdII")


def dbm_to_watts(p_dbm: float) -> float:
    """Convert dBm to watts."""
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert watts to dBm."""
    if p_watts <= 0:
        raise ValueError("power must be positive")
    return 10.0 * np.log10(p_watts / 1e-3)


@dataclass(frozen=True)
class DualPolWaveform:
    """Oversampled complex baseband field for the two polarizations.

    Samples are in sqrt(W) units. The sample rate is stored as the exact
    rational relation symbol_rate * samples_per_symbol; ``sps`` is a
    :class:`fractions.Fraction` so resampling bookkeeping stays exact.
    """

    x: np.ndarray
    y: np.ndarray
    symbol_rate: float
    sps: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.complex128))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.complex128))
        object.__setattr__(self, "sps", Fraction(self.sps))
        if self.x.ndim != 1 or self.y.ndim != 1:
            raise ValueError("polarization fields must be 1-D")
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have equal length")
        if len(self.x) < 1:
            raise ValueError("waveform must contain at least one sample")
        if self.symbol_rate <= 0:
            raise ValueError("symbol_rate must be positive")
        if self.sps <= 0:
            raise ValueError("samples_per_symbol must be positive")
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def sample_rate(self) -> float:
        """Sample rate in Hz, derived from the exact rational sps."""
        return self.symbol_rate * self.sps.numerator / self.sps.denominator

    def mean_power(self) -> float:
        """Mean of |x|^2 + |y|^2 over the frame, in watts."""
        return float(np.mean(np.abs(self.x) ** 2 + np.abs(self.y) ** 2))

    def with_fields(self, x: np.ndarray, y: np.ndarray) -> "DualPolWaveform":
        """Same rates, new field samples."""
        return DualPolWaveform(x, y, self.symbol_rate, self.sps)


@dataclass(frozen=True)
class RrcFilter:
    """Root-raised-cosine filter taps plus the parameters that produced them."""

    rolloff: float
    span_symbols: int
    sps: int
    taps: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.taps is None:
            object.__setattr__(
                self, "taps", rrc_taps(self.rolloff, self.span_symbols, self.sps)
            )
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.float64))


def rrc_taps(rolloff: float, span_symbols: int, sps: int) -> np.ndarray:
    """Energy-normalized RRC impulse response.

    Sampled at ``sps`` points per symbol over ``span_symbols`` symbols
    (``span_symbols * sps + 1`` taps, centered). The removable singularities
    at t = 0 and |t| = 1/(4*rolloff) use their analytic limits.
    """
    if not 0.0 < rolloff <= 1.0:
        raise ValueError("rolloff must be in (0, 1]")
    if span_symbols <= 0 or span_symbols % 2 != 0:
        raise ValueError("span_symbols must be a positive even integer")
    if sps < 1:
        raise ValueError("sps must be >= 1")
    beta = float(rolloff)
    n = span_symbols * sps + 1
    t = (np.arange(n) - (n - 1) / 2.0) / sps  # symbol units

    num = np.sin(np.pi * t * (1.0 - beta)) + 4.0 * beta * t * np.cos(
        np.pi * t * (1.0 + beta)
    )
    den = np.pi * t * (1.0 - (4.0 * beta * t) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = num / den

    h[t == 0.0] = 1.0 - beta + 4.0 * beta / np.pi
    sing = np.isclose(np.abs(t), 1.0 / (4.0 * beta), rtol=1e-12, atol=0.0)
    h[sing] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
    )
    return h / np.sqrt(np.sum(h**2))


def circular_filter(x: np.ndarray, taps: np.ndarray, center: int | None = None) -> np.ndarray:
    """Circular convolution with taps anchored so tap ``center`` sits at lag 0.

    With centered symmetric taps this is a zero-delay filter over a periodic
    frame. Requires len(taps) <= len(x).
    """
    x = np.asarray(x)
    taps = np.asarray(taps)
    n = len(x)
    m = len(taps)
    if m > n:
        raise ValueError("taps longer than the frame")
    if center is None:
        center = (m - 1) // 2
    kern = np.zeros(n, dtype=np.complex128)
    kern[(np.arange(m) - center) % n] = taps
    return np.fft.ifft(np.fft.fft(x) * np.fft.fft(kern))


def pulse_shape(
    sym_x: np.ndarray,
    sym_y: np.ndarray,
    filt: RrcFilter,
    target_power_watts: float,
    symbol_rate: float,
) -> DualPolWaveform:
    """Upsample both symbol streams by zero stuffing, RRC-filter, set power.

    The output mean power (|x|^2 + |y|^2 averaged over samples) equals
    ``target_power_watts`` exactly; an all-zero frame is returned as zeros.
    """
    sym_x = np.asarray(sym_x, dtype=np.complex128)
    sym_y = np.asarray(sym_y, dtype=np.complex128)
    if len(sym_x) == 0 or len(sym_x) != len(sym_y):
        raise ValueError("symbol frames must be non-empty and equal length")
    sps = filt.sps
    if sps < 2:
        raise ValueError("pulse shaping requires sps >= 2")

    up_x = np.zeros(len(sym_x) * sps, dtype=np.complex128)
    up_y = np.zeros_like(up_x)
    up_x[::sps] = sym_x
    up_y[::sps] = sym_y
    x = circular_filter(up_x, filt.taps)
    y = circular_filter(up_y, filt.taps)

    p = np.mean(np.abs(x) ** 2 + np.abs(y) ** 2)
    if p > 0.0:
        scale = np.sqrt(target_power_watts / p)
        x = x * scale
        y = y * scale
    return DualPolWaveform(x, y, symbol_rate, Fraction(sps))


def matched_filter_downsample(
    wave: DualPolWaveform, filt: RrcFilter, phase_offset: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """RRC matched filtering then decimation to 1 sample/symbol.

    Returns per-polarization symbol sequences of length floor(n / sps).
    """
    sps = wave.sps
    if sps.denominator != 1:
        raise ValueError("matched filtering requires an integer sps")
    sps = sps.numerator
    if not 0 <= phase_offset < sps:
        raise ValueError("phase_offset must lie in [0, sps)")
    n_out = len(wave) // sps
    fx = circular_filter(wave.x, filt.taps)
    fy = circular_filter(wave.y, filt.taps)
    idx = phase_offset + sps * np.arange(n_out)
    return fx[idx], fy[idx]


def resample_rational(wave: DualPolWaveform, p: int, q: int) -> DualPolWaveform:
    """FFT-based rational resampling by p/q; exact for band-limited frames.

    The new sample count is floor(n * p / q) and ``sps`` is updated with
    exact Fraction arithmetic. p and q must be coprime positive integers.
    """
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    if gcd(p, q) != 1:
        raise ValueError("p/q must be in lowest terms")
    if p == 1 and q == 1:
        return wave
    n = len(wave)
    m = (n * p) // q
    if m == 0:
        raise ValueError("resampled frame would be empty")
    return DualPolWaveform(
        _fft_resample(wave.x, m),
        _fft_resample(wave.y, m),
        wave.symbol_rate,
        wave.sps * Fraction(p, q),
    )


def resample_to_sps(wave: DualPolWaveform, target_sps) -> DualPolWaveform:
    """Resample to the achievable rational rate nearest ``target_sps``.

    A periodic frame of n samples only supports ratios m/n exactly; the
    helper picks m = round(n * target/current) so the stored sps stays an
    exact Fraction consistent with the sample count (e.g. 32768 samples at
    2 Sa/symbol land at 37683/16384 ~ 2.29998 for a 23/10 request).
    """
    ratio = Fraction(target_sps) / wave.sps
    if ratio == 1:
        return wave
    m = round(len(wave) * ratio)
    frac = Fraction(m, len(wave))
    return resample_rational(wave, frac.numerator, frac.denominator)


def _fft_resample(u: np.ndarray, m: int) -> np.ndarray:
    """Spectral zero-pad / truncate of a complex frame to m samples."""
    n = len(u)
    spec = np.fft.fft(u)
    out = np.zeros(m, dtype=np.complex128)
    k = min(n, m)
    kp = (k + 1) // 2  # positive-frequency bins kept, incl. DC
    kn = k - kp        # negative-frequency bins kept
    out[:kp] = spec[:kp]
    if kn:
        out[-kn:] = spec[-kn:]
    return np.fft.ifft(out) * (m / n)


def write_waveform(path, wave: DualPolWaveform) -> None:
    """Write a waveform in the CEQW1 container (little-endian throughout)."""
    n = len(wave)
    header = _CEQW_HEADER.pack(
        CEQW_MAGIC,
        CEQW_VERSION,
        n,
        float(wave.symbol_rate),
        wave.sps.numerator,
        wave.sps.denominator,
    )
    data = np.empty((n, 4), dtype="<f8")
    data[:, 0] = wave.x.real
    data[:, 1] = wave.x.imag
    data[:, 2] = wave.y.real
    data[:, 3] = wave.y.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_waveform(path) -> DualPolWaveform:
    """Read a CEQW1 waveform file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CEQW_HEADER.size:
        raise ValueError("truncated CEQW1 file")
    magic, version, n, symbol_rate, num, den = _CEQW_HEADER.unpack_from(raw)
    if magic != CEQW_MAGIC:
        raise ValueError("not a CEQW1 file")
    if version != CEQW_VERSION:
        raise ValueError(f"unsupported CEQW version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_CEQW_HEADER.size)
    if body.size != 4 * n:
        raise ValueError("CEQW1 payload size mismatch")
    data = body.reshape(n, 4)
    return DualPolWaveform(
        data[:, 0] + 1j * data[:, 1],
        data[:, 2] + 1j * data[:, 3],
        symbol_rate,
        Fraction(int(num), int(den)),
    )
