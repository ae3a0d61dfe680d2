"""Fixed-point (int32) weight export/import and quantization-impact checks.

Blob container "CEQN1": magic CEQN, u32 version, u32 arch id, u32 tensor
count; per tensor: u32 rank, u32 dims[], u32 fraction_bits, then values as
little-endian i32. Tensors appear in the architecture's canonical order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .neuraleq.model import ARCH_IDS, ARCH_NAMES, EqArch, EqModel, param_template
from .neuraleq.train import EvalSet, evaluate_model_q

CEQN_MAGIC = b"CEQN"
CEQN_VERSION = 1
DEFAULT_FRACTION_BITS = 24


@dataclass(frozen=True)
class QuantizedTensor:
    shape: tuple
    fraction_bits: int
    values: np.ndarray  # int32, flattened C-order

    def dequantized(self) -> np.ndarray:
        return (self.values.astype(np.float64) / (1 << self.fraction_bits)).reshape(self.shape)


@dataclass(frozen=True)
class QuantizedModelBlob:
    arch: EqArch
    tensors: dict            # name -> QuantizedTensor, canonical order
    clip_warnings: list = field(default_factory=list)


def quantize_weights(model: EqModel, fraction_bits: int = DEFAULT_FRACTION_BITS) -> QuantizedModelBlob:
    """Round-half-to-even to int32 at the given Q-format.

    Out-of-range weights saturate and are reported in ``clip_warnings`` as
    (tensor name, clipped count) instead of failing silently.
    """
    if not 0 <= fraction_bits <= 31:
        raise ValueError("fraction_bits must lie in [0, 31]")
    scale = float(1 << fraction_bits)
    tensors = {}
    warnings = []
    for name in param_template(model.arch):
        w = model.params[name]
        if not np.all(np.isfinite(w)):
            raise ValueError(f"non-finite weight in {name}")
        raw = np.rint(w * scale)
        clipped = int(np.sum((raw < np.iinfo(np.int32).min) | (raw > np.iinfo(np.int32).max)))
        if clipped:
            warnings.append((name, clipped))
        vals = np.clip(raw, np.iinfo(np.int32).min, np.iinfo(np.int32).max).astype(np.int32)
        tensors[name] = QuantizedTensor(w.shape, fraction_bits, vals.reshape(-1))
    return QuantizedModelBlob(model.arch, tensors, warnings)


def dequantize(blob: QuantizedModelBlob) -> EqModel:
    """Rebuild a float64 model from a blob."""
    params = {name: qt.dequantized() for name, qt in blob.tensors.items()}
    return EqModel(blob.arch, params)


def quantization_penalty(model: EqModel, blob: QuantizedModelBlob, eval_set: EvalSet) -> float:
    """Q(model) - Q(dequantize(blob)) on the evaluation set, in dB."""
    if blob.arch != model.arch:
        raise ValueError("blob architecture does not match the model")
    return evaluate_model_q(model, eval_set) - evaluate_model_q(dequantize(blob), eval_set)


def write_blob(path, blob: QuantizedModelBlob) -> None:
    parts = [
        CEQN_MAGIC,
        struct.pack("<III", CEQN_VERSION, ARCH_IDS[blob.arch.kind], len(blob.tensors)),
    ]
    for qt in blob.tensors.values():
        parts.append(struct.pack("<I", len(qt.shape)))
        parts.append(struct.pack(f"<{len(qt.shape)}I", *qt.shape))
        parts.append(struct.pack("<I", qt.fraction_bits))
        parts.append(qt.values.astype("<i4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_blob(path) -> QuantizedModelBlob:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CEQN_MAGIC:
        raise ValueError("not a CEQN1 file")
    version, arch_id, n_tensors = struct.unpack_from("<III", raw, 4)
    if version != CEQN_VERSION:
        raise ValueError(f"unsupported CEQN version {version}")
    if arch_id not in ARCH_NAMES:
        raise ValueError(f"unknown architecture id {arch_id}")
    arch = EqArch(kind=ARCH_NAMES[arch_id])
    names = list(param_template(arch))
    if n_tensors != len(names):
        raise ValueError("tensor count does not match the architecture")
    tensors = {}
    off = 16
    for name in names:
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        (fraction_bits,) = struct.unpack_from("<I", raw, off)
        off += 4
        count = int(np.prod(dims)) if rank else 1
        vals = np.frombuffer(raw, dtype="<i4", count=count, offset=off).astype(np.int32)
        off += 4 * count
        tensors[name] = QuantizedTensor(tuple(int(d) for d in dims), fraction_bits, vals)
    if off != len(raw):
        raise ValueError("trailing bytes in CEQN1 file")
    return QuantizedModelBlob(arch, tensors)
