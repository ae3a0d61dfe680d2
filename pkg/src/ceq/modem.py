"""Bit generation (MT19937), 16QAM mapping, and BER/Q/EVM metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcinv

EQUALIZER_IDS = ("CDC", "DBP", "CNN", "BILSTM")

# Gray-coded 16QAM amplitude levels indexed by the 2-bit pair value (b0 b1):
# 00 -> -3, 01 -> -1, 10 -> +3, 11 -> +1.
_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])
_SCALE = 1.0 / np.sqrt(10.0)

_U32 = np.uint32
_MT_N = 624
_MT_M = 397
_MATRIX_A = _U32(0x9908B0DF)
_UPPER = _U32(0x80000000)
_LOWER = _U32(0x7FFFFFFF)


class Mt19937:
    """Reference 32-bit Mersenne Twister (init_genrand seeding).

    Produces the canonical stream: seed 5489 yields 3499211612 first.
    The twist is vectorized in chunks so large draws stay cheap.
    """

    def __init__(self, seed: int):
        mt = np.empty(_MT_N, dtype=np.uint64)
        mt[0] = seed & 0xFFFFFFFF
        for i in range(1, _MT_N):
            mt[i] = (1812433253 * (mt[i - 1] ^ (mt[i - 1] >> np.uint64(30))) + i) & 0xFFFFFFFF
        self._mt = mt.astype(_U32)
        self._idx = _MT_N

    def _twist(self) -> None:
        mt = self._mt
        new = np.empty(_MT_N, dtype=_U32)
        y = np.empty(_MT_N, dtype=_U32)
        y[:-1] = (mt[:-1] & _UPPER) | (mt[1:] & _LOWER)

        def mix(ys):
            return (ys >> _U32(1)) ^ np.where(ys & _U32(1), _MATRIX_A, _U32(0))

        head = _MT_N - _MT_M  # 227: these still read the old state
        new[:head] = mt[_MT_M:] ^ mix(y[:head])
        start = head
        while start < _MT_N - 1:
            end = min(start + head, _MT_N - 1)
            new[start:end] = new[start - head:end - head] ^ mix(y[start:end])
            start = end
        y_last = (mt[-1] & _UPPER) | (new[0] & _LOWER)
        new[-1] = new[_MT_M - 1] ^ mix(y_last)
        self._mt = new
        self._idx = 0

    def next_uint32(self) -> int:
        return int(self.uint32_block(1)[0])

    def uint32_block(self, count: int) -> np.ndarray:
        """Next ``count`` tempered 32-bit outputs."""
        out = np.empty(count, dtype=_U32)
        filled = 0
        while filled < count:
            if self._idx >= _MT_N:
                self._twist()
            take = min(count - filled, _MT_N - self._idx)
            out[filled:filled + take] = self._mt[self._idx:self._idx + take]
            self._idx += take
            filled += take
        x = out
        x = x ^ (x >> _U32(11))
        x = x ^ ((x << _U32(7)) & _U32(0x9D2C5680))
        x = x ^ ((x << _U32(15)) & _U32(0xEFC60000))
        x = x ^ (x >> _U32(18))
        return x


def mt19937_bits(seed: int, n: int) -> np.ndarray:
    """First ``n`` bits of the MT19937 stream, each word expanded MSB-first."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.empty(0, dtype=np.uint8)
    words = Mt19937(seed).uint32_block((n + 31) // 32)
    bits = np.unpackbits(words.astype(">u4").view(np.uint8))
    return bits[:n]


def map_16qam(bits: np.ndarray) -> np.ndarray:
    """Gray-map bit quadruples b0 b1 b2 b3 to unit-mean-power 16QAM symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    if len(bits) % 4 != 0:
        raise ValueError("bit count must be divisible by 4")
    quads = bits.reshape(-1, 4)
    i = _LEVELS[2 * quads[:, 0] + quads[:, 1]]
    q = _LEVELS[2 * quads[:, 2] + quads[:, 3]]
    return (i + 1j * q) * _SCALE


def _decide_levels(u: np.ndarray) -> np.ndarray:
    """Slice one axis to the nearest level; boundary ties take the lower-
    amplitude level (u = 2 -> +1, u = -2 -> -1)."""
    return np.where(u < -2.0, -3.0, np.where(u <= 0.0, -1.0, np.where(u <= 2.0, 1.0, 3.0)))


def demap_16qam_hard(symbols: np.ndarray) -> np.ndarray:
    """Hard-decision demapping, exact inverse of :func:`map_16qam`."""
    symbols = np.asarray(symbols, dtype=np.complex128)
    li = _decide_levels(symbols.real / _SCALE)
    lq = _decide_levels(symbols.imag / _SCALE)
    bits = np.empty((len(symbols), 4), dtype=np.uint8)
    for col, lev in ((0, li), (2, lq)):
        bits[:, col] = lev > 0
        bits[:, col + 1] = np.abs(lev) == 1
    return bits.reshape(-1)


def ber(rx_bits: np.ndarray, tx_bits: np.ndarray) -> float:
    """Fraction of differing bits (raw, no 0.5 folding)."""
    rx_bits = np.asarray(rx_bits)
    tx_bits = np.asarray(tx_bits)
    if len(rx_bits) != len(tx_bits) or len(rx_bits) == 0:
        raise ValueError("bit sequences must be non-empty and equal length")
    return float(np.mean(rx_bits != tx_bits))


def q_factor_db(ber_value: float) -> float:
    """Q in dB from pre-FEC BER: 20*log10(sqrt(2)*erfcinv(2*BER))."""
    if not 0.0 < ber_value < 0.5:
        raise ValueError("BER must lie strictly inside (0, 0.5)")
    return float(20.0 * np.log10(np.sqrt(2.0) * erfcinv(2.0 * ber_value)))


def q_factor_db_safe(ber_value: float) -> float:
    """Q for report rows: +inf at BER 0, -inf at BER >= 0.5."""
    if ber_value <= 0.0:
        return float("inf")
    if ber_value >= 0.5:
        return float("-inf")
    return q_factor_db(ber_value)


def evm(rx: np.ndarray, ref: np.ndarray) -> float:
    """RMS error vector magnitude relative to the RMS reference power."""
    rx = np.asarray(rx, dtype=np.complex128)
    ref = np.asarray(ref, dtype=np.complex128)
    if len(rx) != len(ref):
        raise ValueError("sequences must have equal length")
    p_ref = np.mean(np.abs(ref) ** 2)
    if p_ref == 0.0:
        raise ValueError("reference is all-zero")
    return float(np.sqrt(np.mean(np.abs(rx - ref) ** 2) / p_ref))


@dataclass(frozen=True)
class SymbolFrame:
    """Transmitted bits and unit-mean-power 16QAM symbols for both pols."""

    bits_x: np.ndarray
    bits_y: np.ndarray
    tx_x: np.ndarray
    tx_y: np.ndarray
    seed: int
    n_symbols: int

    @classmethod
    def generate(cls, seed: int, n_symbols: int) -> "SymbolFrame":
        """One MT19937 stream per frame; first 4n bits map to X, next 4n to Y."""
        bits = mt19937_bits(seed, 8 * n_symbols)
        bits_x = bits[: 4 * n_symbols]
        bits_y = bits[4 * n_symbols:]
        return cls(bits_x, bits_y, map_16qam(bits_x), map_16qam(bits_y), seed, n_symbols)


@dataclass(frozen=True)
class QReport:
    """Per-(equalizer, launch power) performance record."""

    equalizer_id: str
    power_dbm: float
    ber: float
    q_db: float
    evm: float
    n_symbols_tested: int

    def __post_init__(self):
        if self.equalizer_id not in EQUALIZER_IDS:
            raise ValueError(f"unknown equalizer id {self.equalizer_id!r}")
        if not 0.0 <= self.ber <= 0.5:
            raise ValueError("ber out of [0, 0.5]")
        if self.n_symbols_tested <= 0:
            raise ValueError("n_symbols_tested must be positive")

    def csv_row(self) -> str:
        return (
            f"{self.equalizer_id},{self.power_dbm:g},{self.ber:.6e},"
            f"{self.q_db:.4f},{self.evm:.6e},{self.n_symbols_tested}"
        )


QREPORT_CSV_HEADER = "equalizer,power_dbm,ber,q_db,evm,n_symbols"


def qreports_to_csv(reports) -> str:
    """CSV text for a list of QReports, sorted by (equalizer, power)."""
    rows = sorted(reports, key=lambda r: (r.equalizer_id, r.power_dbm))
    return "\n".join([QREPORT_CSV_HEADER] + [r.csv_row() for r in rows]) + "\n"
