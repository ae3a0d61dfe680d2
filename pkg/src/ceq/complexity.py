"""Analytic complexity, throughput, and FPGA-count arithmetic.

Counting conventions: a complex multiply costs 4 real multiplications;
activations and exponentials are excluded (lookup tables in hardware).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor, log2

GBIT_TARGET = 400e9
SAFE_UTILIZATION = 0.8


@dataclass(frozen=True)
class ResourceReport:
    equalizer_id: str
    real_mults_per_symbol: float
    clock_hz: float
    throughput_bps: float
    max_util_fraction: float
    fpgas_for_400g: int

    def csv_row(self) -> str:
        return (
            f"{self.equalizer_id},{self.real_mults_per_symbol:.1f},{self.clock_hz:g},"
            f"{self.throughput_bps:.4e},{self.max_util_fraction:g},{self.fpgas_for_400g}"
        )


RESOURCE_CSV_HEADER = (
    "equalizer,real_mults_per_symbol,clock_hz,throughput_bps,max_util_fraction,fpgas_for_400g"
)


def rm_cdc(n_taps: int, sps: float) -> float:
    """Real multiplications per recovered symbol per polarization."""
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    return 4.0 * n_taps * sps


def rm_bilstm(n_h: int, c_in: int, t_steps: int, out_kernel: int, out_filters: int, n_out: int) -> float:
    """Gates + Hadamard products of both directions plus the output conv,
    amortized over the symbols recovered per inference."""
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    recurrent = 2.0 * t_steps * (4.0 * n_h * (c_in + n_h) + 3.0 * n_h)
    conv = n_out * out_filters * out_kernel * 2.0 * n_h
    return (recurrent + conv) / n_out


def rm_cnn(conv_layers, n_out: int) -> float:
    """Sum of T_out*C_out*K*C_in over layers, per recovered symbol.

    ``conv_layers`` is an iterable of (t_out, c_out, kernel, c_in).
    """
    if n_out < 1:
        raise ValueError("n_out must be >= 1")
    total = 0.0
    for t_out, c_out, kernel, c_in in conv_layers:
        total += t_out * c_out * kernel * c_in
    return total / n_out


def rm_dbp(n_spans: int, steps_per_span: int, sps: float, fft_size: int) -> float:
    """Two FFTs per step at 2*log2(N) real mults per sample, plus the linear
    phase multiply (4) and power/phase products (4)."""
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two")
    return n_spans * steps_per_span * sps * (4.0 * log2(fft_size) + 8.0)


def throughput_bps(n_out_symbols: int, bits_per_symbol: int, clock_hz: float) -> float:
    """One inference per clock cycle, single polarization."""
    if n_out_symbols <= 0 or bits_per_symbol <= 0 or clock_hz <= 0:
        raise ValueError("all throughput factors must be positive")
    return n_out_symbols * bits_per_symbol * clock_hz


def fpgas_for_400g(throughput: float, max_util_fraction: float, safe_util: float = SAFE_UTILIZATION) -> int:
    """Round-to-nearest count of chips to reach 400G at safe utilization."""
    if throughput <= 0:
        raise ValueError("throughput must be positive")
    if not 0.0 < max_util_fraction <= 1.0:
        raise ValueError("max_util_fraction must lie in (0, 1]")
    est = (GBIT_TARGET / throughput) * (max_util_fraction / safe_util)
    return max(1, int(floor(est + 0.5)))


def deep_cnn_layers(arch) -> list:
    """Per-layer (T_out, C_out, K, C_in) tuples of the deep-CNN equalizer."""
    f1, f2 = arch.hidden_filters
    t_in = arch.n_in_symbols
    return [
        (t_in, f1, arch.hidden_kernel, arch.in_channels),
        (t_in, f2, arch.hidden_kernel, f1),
        (arch.n_out_symbols, arch.out_filters, arch.out_kernel, f2),
    ]


def resource_report(
    equalizer_id: str,
    real_mults_per_symbol: float,
    clock_hz: float,
    max_util_fraction: float,
    n_out_symbols: int = 61,
    bits_per_symbol: int = 4,
) -> ResourceReport:
    thr = throughput_bps(n_out_symbols, bits_per_symbol, clock_hz)
    return ResourceReport(
        equalizer_id,
        real_mults_per_symbol,
        clock_hz,
        thr,
        max_util_fraction,
        fpgas_for_400g(thr, max_util_fraction),
    )


def reports_to_csv(reports) -> str:
    return "\n".join([RESOURCE_CSV_HEADER] + [r.csv_row() for r in reports]) + "\n"
