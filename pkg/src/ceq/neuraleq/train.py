"""Adam training loop with per-epoch random window subsets, validation-Q
checkpointing, and few-epoch transfer to other launch powers."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import modem
from ..rxdsp import normalize_to_reference
from . import layers
from .model import EqModel, equalize, make_windows


@dataclass(frozen=True)
class TrainConfig:
    """Desk-scale defaults; the full-size recipe ships as a config preset.

    ``lr_final`` switches on cosine decay from ``lr`` down to that value
    across the epoch budget (None keeps the rate constant).
    """

    lr: float = 5e-4
    batch: int = 256
    epochs: int = 500
    pool_size: int = 1 << 16
    epoch_subset: int = 1 << 14
    seed: int = 0
    loss: str = "mse"
    lr_final: float | None = None

    def __post_init__(self):
        if self.epoch_subset > self.pool_size:
            raise ValueError("epoch_subset cannot exceed pool_size")
        if self.batch < 1 or self.lr <= 0 or self.epochs < 0:
            raise ValueError("invalid training hyperparameters")
        if self.lr_final is not None and not 0 < self.lr_final <= self.lr:
            raise ValueError("lr_final must lie in (0, lr]")
        if self.loss != "mse":
            raise ValueError("only MSE loss is supported")

    def lr_at(self, epoch: int) -> float:
        if self.lr_final is None or self.epochs <= 1:
            return self.lr
        phase = np.pi * epoch / (self.epochs - 1)
        return self.lr_final + 0.5 * (self.lr - self.lr_final) * (1.0 + np.cos(phase))


def adam_init(params: dict) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8, t=1):
    """Bias-corrected Adam update, in place on ``params``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {key}")
        m = state["m"][key]
        v = state["v"][key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        params[key] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


@dataclass(frozen=True)
class EvalSet:
    """Everything needed to score one polarization's equalizer output."""

    rx_x: np.ndarray
    rx_y: np.ndarray
    tx_ref: np.ndarray       # transmitted symbols of the recovered pol
    bits_ref: np.ndarray
    swap: bool = False


def evaluate_model_q(model: EqModel, ev: EvalSet) -> float:
    """Single-polarization Q in dB of the equalized stream."""
    rec = equalize(model, ev.rx_x, ev.rx_y, ev.swap)
    rec = normalize_to_reference(rec, ev.tx_ref)
    b = modem.ber(modem.demap_16qam_hard(rec), ev.bits_ref)
    return modem.q_factor_db_safe(b)


def train(
    model: EqModel,
    pool_windows,
    val_set: EvalSet,
    cfg: TrainConfig,
):
    """Adam-train on windows drawn afresh each epoch from the pool.

    ``pool_windows`` is the (inputs, targets) pair from make_windows over the
    training pool. Each epoch draws windows covering ``epoch_subset`` symbols
    (without replacement), then runs shuffled mini-batches. Keeps the weights
    with the best validation Q, which for a pre-trained model can be the
    starting weights. Returns (model, history) with history rows
    (epoch, loss, val_q_db).
    """
    x_pool, y_pool = pool_windows
    n_windows = len(x_pool)
    if n_windows == 0:
        raise ValueError("training pool is empty")
    n_out = model.arch.n_out_symbols
    per_epoch = min(n_windows, max(1, cfg.epoch_subset // n_out))

    best = {k: v.copy() for k, v in model.params.items()}
    best_q = evaluate_model_q(model, val_set)
    if cfg.epochs == 0:
        return model, []

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 0xAD))))
    state = adam_init(model.params)
    t = 0
    history = []
    for epoch in range(cfg.epochs):
        idx = rng.choice(n_windows, size=per_epoch, replace=False)
        lr_epoch = cfg.lr_at(epoch)
        losses = []
        for lo in range(0, per_epoch, cfg.batch):
            sel = idx[lo:lo + cfg.batch]
            pred, ctx = model.forward(x_pool[sel])
            loss, dpred = layers.mse_loss(pred, y_pool[sel])
            grads = model.backward(dpred, ctx)
            t += 1
            adam_step(model.params, grads, state, lr_epoch, t=t)
            losses.append((loss, len(sel)))
        epoch_loss = sum(l * n for l, n in losses) / sum(n for _, n in losses)
        val_q = evaluate_model_q(model, val_set)
        history.append((epoch, epoch_loss, val_q))
        if val_q > best_q:
            best_q = val_q
            best = {k: v.copy() for k, v in model.params.items()}
    return EqModel(model.arch, best), history


def transfer_fit(
    model: EqModel,
    pool_windows,
    val_set: EvalSet,
    cfg: TrainConfig,
    max_epochs: int = 5,
):
    """Adapt a trained model to another launch power in at most 5 epochs.

    Validation checkpointing starts from the incoming weights, so the
    returned model never scores below the starting Q.
    """
    short = replace(cfg, epochs=min(max_epochs, 5))
    return train(model.copy(), pool_windows, val_set, short)


def history_to_csv(history) -> str:
    lines = ["epoch,loss,val_q_db"]
    lines += [f"{e},{loss:.8e},{q:.4f}" for e, loss, q in history]
    return "\n".join(lines) + "\n"
