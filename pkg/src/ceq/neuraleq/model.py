"""Equalizer architectures, windowing, and symbol-stream inference.

Both equalizers read 81 consecutive received symbols as 4 real channels
(Re/Im of each polarization) and emit Re/Im of 61 central symbols of one
polarization; the second polarization uses an independently trained model
fed with the channel pairs swapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers

ARCH_BILSTM = "BILSTM"
ARCH_DEEP_CNN = "DEEP_CNN"
ARCH_IDS = {ARCH_BILSTM: 1, ARCH_DEEP_CNN: 2}
ARCH_NAMES = {v: k for k, v in ARCH_IDS.items()}


@dataclass(frozen=True)
class EqArch:
    """Shape descriptor shared by the biLSTM and deep-CNN equalizers."""

    kind: str = ARCH_BILSTM
    n_in_symbols: int = 81
    in_channels: int = 4
    n_hidden: int = 35                  # per LSTM direction
    hidden_filters: tuple = (35, 35)
    hidden_kernel: int = 21
    out_filters: int = 2
    out_kernel: int = 21

    def __post_init__(self):
        if self.kind not in ARCH_IDS:
            raise ValueError(f"unknown architecture {self.kind!r}")
        if self.out_kernel >= self.n_in_symbols:
            raise ValueError("output kernel must be shorter than the input window")

    @property
    def n_out_symbols(self) -> int:
        return self.n_in_symbols - self.out_kernel + 1

    @property
    def head_margin(self) -> int:
        return (self.n_in_symbols - self.n_out_symbols) // 2


class EqModel:
    """Architecture descriptor plus named weight tensors."""

    def __init__(self, arch: EqArch, params: dict):
        self.arch = arch
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        expected = param_template(arch)
        if list(self.params) != list(expected):
            raise ValueError("parameter names do not match the architecture")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {self.params[name].shape}")

    def copy(self) -> "EqModel":
        return EqModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def param_count(self) -> int:
        return sum(v.size for v in self.params.values())

    def forward(self, x: np.ndarray):
        """x: [B, n_in_symbols, in_channels] -> ([B, n_out_symbols, 2], ctx)."""
        p = self.params
        if self.arch.kind == ARCH_BILSTM:
            h, c_bi = layers.bilstm_forward(x, p)
            y, c_out = layers.conv1d_forward(h, p["out_w"], p["out_b"], "valid")
            return y, ("bilstm", c_bi, c_out)
        h1, c1 = layers.conv1d_forward(x, p["conv1_w"], p["conv1_b"], "same")
        a1, t1 = layers.tanh_forward(h1)
        h2, c2 = layers.conv1d_forward(a1, p["conv2_w"], p["conv2_b"], "same")
        a2, t2 = layers.tanh_forward(h2)
        y, c3 = layers.conv1d_forward(a2, p["out_w"], p["out_b"], "valid")
        return y, ("cnn", c1, t1, c2, t2, c3)

    def backward(self, dy: np.ndarray, ctx) -> dict:
        """Gradients w.r.t. every parameter, matching self.params keys."""
        if ctx[0] == "bilstm":
            _, c_bi, c_out = ctx
            dh, dow, dob = layers.conv1d_backward(dy, c_out)
            _, grads = layers.bilstm_backward(dh, c_bi)
            grads["out_w"] = dow
            grads["out_b"] = dob
            return grads
        _, c1, t1, c2, t2, c3 = ctx
        da2, dow, dob = layers.conv1d_backward(dy, c3)
        dh2 = layers.tanh_backward(da2, t2)
        da1, dw2, db2 = layers.conv1d_backward(dh2, c2)
        dh1 = layers.tanh_backward(da1, t1)
        _, dw1, db1 = layers.conv1d_backward(dh1, c1)
        return {
            "conv1_w": dw1, "conv1_b": db1,
            "conv2_w": dw2, "conv2_b": db2,
            "out_w": dow, "out_b": dob,
        }


def param_template(arch: EqArch) -> dict:
    """Canonical parameter names and shapes (also the CEQN1 tensor order)."""
    if arch.kind == ARCH_BILSTM:
        h, c = arch.n_hidden, arch.in_channels
        return {
            "w_fwd": (4 * h, c), "u_fwd": (4 * h, h), "b_fwd": (4 * h,),
            "w_bwd": (4 * h, c), "u_bwd": (4 * h, h), "b_bwd": (4 * h,),
            "out_w": (arch.out_filters, arch.out_kernel, 2 * h),
            "out_b": (arch.out_filters,),
        }
    f1, f2 = arch.hidden_filters
    k = arch.hidden_kernel
    return {
        "conv1_w": (f1, k, arch.in_channels), "conv1_b": (f1,),
        "conv2_w": (f2, k, f1), "conv2_b": (f2,),
        "out_w": (arch.out_filters, arch.out_kernel, f2),
        "out_b": (arch.out_filters,),
    }


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_model(arch: EqArch, init_seed: int) -> EqModel:
    """Uniform Glorot weights, zero biases, deterministic in the seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((init_seed, ARCH_IDS[arch.kind]))))
    params = {}
    for name, shape in param_template(arch).items():
        if name.startswith("b") or name.endswith("_b"):
            params[name] = np.zeros(shape)
        elif name.startswith("w_"):
            params[name] = _glorot(rng, shape, arch.in_channels, arch.n_hidden)
        elif name.startswith("u_"):
            params[name] = _glorot(rng, shape, arch.n_hidden, arch.n_hidden)
        else:  # conv kernels [Cout,K,Cin]
            c_out, k, c_in = shape
            params[name] = _glorot(rng, shape, c_in * k, c_out * k)
    return EqModel(arch, params)


def window_starts(n_symbols: int, arch: EqArch) -> np.ndarray:
    """Window start indices with stride n_out so each symbol is output once."""
    if n_symbols < arch.n_in_symbols:
        raise ValueError(f"need at least {arch.n_in_symbols} symbols")
    return np.arange(0, n_symbols - arch.n_in_symbols + 1, arch.n_out_symbols)


def stack_channels(rx_x: np.ndarray, rx_y: np.ndarray, swap: bool = False) -> np.ndarray:
    """[N,4] real feature matrix: (Re x, Im x, Re y, Im y), pols swapped for
    the second-polarization model."""
    a, b = (rx_y, rx_x) if swap else (rx_x, rx_y)
    return np.stack([a.real, a.imag, b.real, b.imag], axis=1)


def make_windows(
    rx_x: np.ndarray,
    rx_y: np.ndarray,
    tx_target: np.ndarray,
    arch: EqArch,
    swap: bool = False,
):
    """Sliding (input, target) pairs; trailing partial window dropped.

    Inputs are [N, 81, 4]; targets are Re/Im of the recovered polarization's
    symbols at offsets head_margin..head_margin+60 inside each window.
    """
    feats = stack_channels(np.asarray(rx_x), np.asarray(rx_y), swap)
    tx_target = np.asarray(tx_target, dtype=np.complex128)
    starts = window_starts(len(feats), arch)
    n_in, n_out, m = arch.n_in_symbols, arch.n_out_symbols, arch.head_margin
    x = np.stack([feats[s:s + n_in] for s in starts])
    tgt = np.stack([tx_target[s + m:s + m + n_out] for s in starts])
    y = np.stack([tgt.real, tgt.imag], axis=2)
    return x, y, starts


def equalize(model: EqModel, rx_x: np.ndarray, rx_y: np.ndarray, swap: bool = False,
             batch: int = 512) -> np.ndarray:
    """Recover one polarization's symbol stream.

    Output has the input length; the head/tail margins no window reaches
    pass the input soft symbols through unchanged.
    """
    rx_x = np.asarray(rx_x, dtype=np.complex128)
    rx_y = np.asarray(rx_y, dtype=np.complex128)
    arch = model.arch
    feats = stack_channels(rx_x, rx_y, swap)
    starts = window_starts(len(feats), arch)
    out = (rx_y if swap else rx_x).copy()
    n_in, n_out, m = arch.n_in_symbols, arch.n_out_symbols, arch.head_margin
    for lo in range(0, len(starts), batch):
        chunk = starts[lo:lo + batch]
        x = np.stack([feats[s:s + n_in] for s in chunk])
        y, _ = model.forward(x)
        rec = y[:, :, 0] + 1j * y[:, :, 1]
        for row, s in enumerate(chunk):
            out[s + m:s + m + n_out] = rec[row]
    return out
