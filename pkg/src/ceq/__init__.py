"""Desk-scale coherent optical transmission testbench.

Simulates a 34 GBd dual-polarization 16QAM link over a multi-span LEAF
fiber, implements CDC/DBP receivers and biLSTM / deep-CNN neural
equalizers with from-scratch training, and reproduces the associated
fixed-point weight flow and complexity/throughput arithmetic.
"""

from . import bench, complexity, fiberlink, fixedpoint, modem, neuraleq, rxdsp, sigkit

__version__ = "0.1.0"

__all__ = [
    "bench",
    "complexity",
    "fiberlink",
    "fixedpoint",
    "modem",
    "neuraleq",
    "rxdsp",
    "sigkit",
]
