"""Batched 1-D conv, LSTM/biLSTM, and MSE primitives with hand-written
backward passes. Arrays are float64, shaped [batch, time, channels].

The convolutions run as one GEMM per kernel tap and the LSTM hoists every
weight GEMM out of the time loop, which keeps single-core training usable.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    # tanh form is stable for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def conv1d_forward(x, w, b, padding):
    """Cross-correlation out[b,t,o] = b[o] + sum_{k,c} w[o,k,c] x[b,t+k-pad,c].

    padding 'same' zero-pads to keep T (odd K only); 'valid' gives T-K+1.
    Returns (out, cache).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x.ndim != 3 or w.ndim != 3:
        raise ValueError("x must be [B,T,C], w must be [Cout,K,Cin]")
    c_out, k, c_in = w.shape
    if x.shape[2] != c_in or b.shape != (c_out,):
        raise ValueError("channel/bias shape mismatch")
    if padding == "same":
        if k % 2 == 0:
            raise ValueError("'same' padding requires an odd kernel")
        pad = (k - 1) // 2
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    elif padding == "valid":
        if k > x.shape[1]:
            raise ValueError("kernel longer than the input")
        xp = x
    else:
        raise ValueError(f"unknown padding {padding!r}")
    t_out = xp.shape[1] - k + 1
    out = np.broadcast_to(b, (x.shape[0], t_out, c_out)).copy()
    for tap in range(k):
        out += xp[:, tap:tap + t_out, :] @ w[:, tap, :].T
    return out, (xp, w, padding, x.shape)


def conv1d_backward(dout, cache):
    """Gradients (dx, dw, db) for conv1d_forward."""
    xp, w, padding, x_shape = cache
    c_out, k, c_in = w.shape
    dout = np.asarray(dout, dtype=np.float64)
    n_b, t_out, _ = dout.shape
    dw = np.empty_like(w)
    d2 = dout.reshape(-1, c_out)
    dxp = np.zeros_like(xp)
    for tap in range(k):
        seg = xp[:, tap:tap + t_out, :]
        dw[:, tap, :] = d2.T @ seg.reshape(-1, c_in)
        dxp[:, tap:tap + t_out, :] += dout @ w[:, tap, :]
    db = d2.sum(axis=0)
    if padding == "same":
        pad = (k - 1) // 2
        dx = dxp[:, pad:pad + x_shape[1], :]
    else:
        dx = dxp
    return dx, dw, db


def tanh_forward(x):
    out = np.tanh(x)
    return out, out


def tanh_backward(dout, cache):
    return dout * (1.0 - cache * cache)


def lstm_forward(x, w, u, b):
    """Unidirectional LSTM over [B,T,Cin]; gates packed [i, f, o, g].

    i, f, o are logistic, g is tanh; c_t = f*c + i*g, h_t = o*tanh(c_t);
    initial states are zero. Returns ([B,T,H], cache).
    """
    x = np.asarray(x, dtype=np.float64)
    n_b, n_t, _ = x.shape
    h_dim = u.shape[1]
    if w.shape[0] != 4 * h_dim or u.shape[0] != 4 * h_dim or b.shape != (4 * h_dim,):
        raise ValueError("LSTM parameter shapes inconsistent")
    xw = x @ w.T + b                                     # [B,T,4H]
    hs = np.empty((n_b, n_t, h_dim))
    gates = np.empty((n_b, n_t, 4 * h_dim))
    cells = np.empty((n_b, n_t, h_dim))
    tanhc = np.empty((n_b, n_t, h_dim))
    h = np.zeros((n_b, h_dim))
    c = np.zeros((n_b, h_dim))
    ut = u.T
    s3 = 3 * h_dim
    for t in range(n_t):
        z = xw[:, t] + h @ ut
        sig = _sigmoid(z[:, :s3])          # i, f, o in one shot
        gi = sig[:, :h_dim]
        gf = sig[:, h_dim:2 * h_dim]
        go = sig[:, 2 * h_dim:]
        gg = np.tanh(z[:, s3:])
        c = gf * c + gi * gg
        tc = np.tanh(c)
        h = go * tc
        hs[:, t] = h
        cells[:, t] = c
        tanhc[:, t] = tc
        gates[:, t, :s3] = sig
        gates[:, t, s3:] = gg
    return hs, (x, w, u, hs, gates, cells, tanhc)


def lstm_backward(dhs, cache):
    """BPTT through lstm_forward. Returns (dx, dw, du, db)."""
    x, w, u, hs, gates, cells, tanhc = cache
    n_b, n_t, h_dim = hs.shape
    dz_all = np.empty((n_b, n_t, 4 * h_dim))
    dh_next = np.zeros((n_b, h_dim))
    dc_next = np.zeros((n_b, h_dim))
    s3 = 3 * h_dim
    for t in range(n_t - 1, -1, -1):
        gi = gates[:, t, :h_dim]
        gf = gates[:, t, h_dim:2 * h_dim]
        go = gates[:, t, 2 * h_dim:s3]
        gg = gates[:, t, s3:]
        tc = tanhc[:, t]

        dh = dhs[:, t] + dh_next
        dc = dc_next + dh * go * (1.0 - tc * tc)
        dz = dz_all[:, t]
        dz[:, :h_dim] = dc * gg * gi * (1.0 - gi)
        if t > 0:
            dz[:, h_dim:2 * h_dim] = dc * cells[:, t - 1] * gf * (1.0 - gf)
        else:
            dz[:, h_dim:2 * h_dim] = 0.0      # c_{-1} = 0
        dz[:, 2 * h_dim:s3] = dh * tc * go * (1.0 - go)
        dz[:, s3:] = dc * gi * (1.0 - gg * gg)
        dh_next = dz @ u
        dc_next = dc * gf
    h_prev = np.concatenate([np.zeros((n_b, 1, h_dim)), hs[:, :-1]], axis=1)
    flat = dz_all.reshape(-1, 4 * h_dim)
    dw = flat.T @ x.reshape(-1, x.shape[2])
    du = flat.T @ h_prev.reshape(-1, h_dim)
    db = flat.sum(axis=0)
    dx = dz_all @ w
    return dx, dw, du, db


def bilstm_forward(x, params):
    """Bidirectional LSTM; per-time-step concat of [forward h, backward h].

    ``params`` maps w_fwd/u_fwd/b_fwd and w_bwd/u_bwd/b_bwd.
    """
    hf, cache_f = lstm_forward(x, params["w_fwd"], params["u_fwd"], params["b_fwd"])
    hb_rev, cache_b = lstm_forward(x[:, ::-1], params["w_bwd"], params["u_bwd"], params["b_bwd"])
    out = np.concatenate([hf, hb_rev[:, ::-1]], axis=2)
    return out, (cache_f, cache_b, hf.shape[2])


def bilstm_backward(dout, cache):
    """Returns (dx, grads dict matching the params dict keys)."""
    cache_f, cache_b, h_dim = cache
    dxf, dwf, duf, dbf = lstm_backward(dout[:, :, :h_dim], cache_f)
    dxb, dwb, dub, dbb = lstm_backward(np.ascontiguousarray(dout[:, ::-1, h_dim:]), cache_b)
    grads = {
        "w_fwd": dwf, "u_fwd": duf, "b_fwd": dbf,
        "w_bwd": dwb, "u_bwd": dub, "b_bwd": dbb,
    }
    return dxf + dxb[:, ::-1], grads


def mse_loss(pred, target):
    """Mean squared error over all elements. Returns (loss, dpred)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("prediction/target shape mismatch")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size
