"""Neural equalizers: layer primitives, architectures, and training."""

from .layers import (
    bilstm_backward,
    bilstm_forward,
    conv1d_backward,
    conv1d_forward,
    lstm_backward,
    lstm_forward,
    mse_loss,
)
from .model import (
    ARCH_BILSTM,
    ARCH_DEEP_CNN,
    ARCH_IDS,
    ARCH_NAMES,
    EqArch,
    EqModel,
    build_model,
    equalize,
    make_windows,
    param_template,
    stack_channels,
    window_starts,
)
from .train import (
    EvalSet,
    TrainConfig,
    adam_init,
    adam_step,
    evaluate_model_q,
    history_to_csv,
    train,
    transfer_fit,
)

__all__ = [
    "ARCH_BILSTM",
    "ARCH_DEEP_CNN",
    "ARCH_IDS",
    "ARCH_NAMES",
    "EqArch",
    "EqModel",
    "EvalSet",
    "TrainConfig",
    "adam_init",
    "adam_step",
    "bilstm_backward",
    "bilstm_forward",
    "build_model",
    "conv1d_backward",
    "conv1d_forward",
    "equalize",
    "evaluate_model_q",
    "history_to_csv",
    "lstm_backward",
    "lstm_forward",
    "make_windows",
    "mse_loss",
    "param_template",
    "stack_channels",
    "train",
    "transfer_fit",
    "window_starts",
]
