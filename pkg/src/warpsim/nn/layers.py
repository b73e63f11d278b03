"""Differentiable building blocks with hand-written backward passes.

Each ``*_forward`` returns the output plus an opaque cache; the matching
``*_backward`` consumes the upstream gradient and the cache and returns
exact analytic gradients. Everything runs in float64.

Sequence layers (conv1d, bilstm, batchnorm over sequences) take either a
single ``[T, F]`` matrix or a batch ``[B, T, F]``; a 2-D input produces a
2-D output.
"""

from __future__ import annotations

import math

import numpy as np

ACTIVATIONS = ("identity", "relu", "sigmoid", "tanh")


def sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {kind!r}")


def activate_backward(grad_y: np.ndarray, z: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return grad_y
    if kind == "relu":
        return grad_y * (z > 0.0)
    if kind == "sigmoid":
        return grad_y * y * (1.0 - y)
    if kind == "tanh":
        return grad_y * (1.0 - y * y)
    raise ValueError(f"unknown activation {kind!r}")


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------- dense


def dense_forward(x, w, b, activation: str = "identity"):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} does not match weight rows {w.shape[0]}")
    z = x @ w + b
    y = activate(z, activation)
    return y, (x, w, z, y, activation)


def dense_backward(grad_y, cache):
    x, w, z, y, activation = cache
    dz = activate_backward(grad_y, z, y, activation)
    grad_w = x.reshape(-1, x.shape[-1]).T @ dz.reshape(-1, dz.shape[-1])
    grad_b = dz.reshape(-1, dz.shape[-1]).sum(axis=0)
    grad_x = dz @ w.T
    return grad_x, grad_w, grad_b


# --------------------------------------------------------------- conv1d


def conv1d_out_length(t: int, stride: int) -> int:
    return -(-t // stride)


def _promote(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ValueError(f"expected [T, F] or [B, T, F], got shape {x.shape}")


def conv1d_forward(x, w, stride: int = 1):
    """Same-padded cross-correlation; output length is ceil(T / stride).

    ``w`` has shape [filters, width, in_channels]. There is no bias: a
    batch normalization directly after the filter bank owns the shift.
    """
    x, squeeze = _promote(x)
    n_batch, t, f_in = x.shape
    f_out, width, f_in_w = w.shape
    if f_in != f_in_w:
        raise ValueError(f"input has {f_in} channels, filters expect {f_in_w}")
    t_out = conv1d_out_length(t, stride)
    pad_total = max((t_out - 1) * stride + width - t, 0)
    pad_left = pad_total // 2
    xp = np.pad(x, ((0, 0), (pad_left, pad_total - pad_left), (0, 0)))
    idx = np.arange(t_out)[:, None] * stride + np.arange(width)[None, :]
    patches = xp[:, idx, :]  # [B, T_out, width, F_in]
    y = np.einsum("btwf,owf->bto", patches, w)
    cache = (patches, w, idx, xp.shape, pad_left, t, squeeze)
    return (y[0] if squeeze else y), cache


def conv1d_backward(grad_y, cache):
    patches, w, idx, xp_shape, pad_left, t, squeeze = cache
    if squeeze:
        grad_y = grad_y[None]
    grad_w = np.einsum("btwf,bto->owf", patches, grad_y)
    grad_patches = np.einsum("bto,owf->btwf", grad_y, w)
    grad_xp = np.zeros(xp_shape)
    np.add.at(grad_xp, (slice(None), idx), grad_patches)
    grad_x = grad_xp[:, pad_left : pad_left + t, :]
    return (grad_x[0] if squeeze else grad_x), grad_w


# --------------------------------------------------------------- bilstm


def bilstm_init(f_in: int, cells: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot-uniform weights for both directions; forget-gate bias 1."""
    params = {}
    for direction in ("fwd", "bwd"):
        params[f"{direction}_wx"] = glorot_uniform((f_in, 4 * cells), f_in, 4 * cells, rng)
        params[f"{direction}_wh"] = glorot_uniform((cells, 4 * cells), cells, 4 * cells, rng)
        bias = np.zeros(4 * cells)
        bias[cells : 2 * cells] = 1.0
        params[f"{direction}_b"] = bias
    return params


def _lstm_dir_forward(x, wx, wh, b):
    # Gate packing along the last axis: input, forget, output, candidate,
    # so the three sigmoid gates form one contiguous block.
    n_batch, t, _ = x.shape
    cells = wh.shape[0]
    c3 = 3 * cells
    h = np.zeros((n_batch, cells))
    c = np.zeros((n_batch, cells))
    gates = np.empty((t, n_batch, 4 * cells))
    c_prev = np.empty((t, n_batch, cells))
    tanh_c = np.empty((t, n_batch, cells))
    h_prev = np.empty((t, n_batch, cells))
    hs = np.empty((n_batch, t, cells))
    for step in range(t):
        z = x[:, step, :] @ wx + h @ wh + b
        g = gates[step]
        g[:, :c3] = sigmoid(z[:, :c3])
        g[:, c3:] = np.tanh(z[:, c3:])
        h_prev[step] = h
        c_prev[step] = c
        c = g[:, cells : 2 * cells] * c + g[:, :cells] * g[:, c3:]
        tc = np.tanh(c)
        h = g[:, 2 * cells : c3] * tc
        tanh_c[step] = tc
        hs[:, step, :] = h
    return hs, (x, wx, wh, gates, c_prev, tanh_c, h_prev)


def _lstm_dir_backward(grad_hs, cache):
    x, wx, wh, gates, c_prev, tanh_c, h_prev = cache
    n_batch, t, _ = x.shape
    cells = wh.shape[0]
    c3 = 3 * cells
    grad_wx = np.zeros_like(wx)
    grad_wh = np.zeros_like(wh)
    grad_b = np.zeros(4 * cells)
    grad_x = np.zeros_like(x)
    dh_next = np.zeros((n_batch, cells))
    dc_next = np.zeros((n_batch, cells))
    da = np.empty((n_batch, 4 * cells))
    for step in reversed(range(t)):
        gi = gates[step][:, :cells]
        gf = gates[step][:, cells : 2 * cells]
        go = gates[step][:, 2 * cells : c3]
        gg = gates[step][:, c3:]
        tc = tanh_c[step]
        dh = grad_hs[:, step, :] + dh_next
        do = dh * tc
        dc = dh * go * (1.0 - tc * tc) + dc_next
        da[:, :cells] = dc * gg * gi * (1.0 - gi)
        da[:, cells : 2 * cells] = dc * c_prev[step] * gf * (1.0 - gf)
        da[:, 2 * cells : c3] = do * go * (1.0 - go)
        da[:, c3:] = dc * gi * (1.0 - gg * gg)
        grad_wx += x[:, step, :].T @ da
        grad_wh += h_prev[step].T @ da
        grad_b += da.sum(axis=0)
        grad_x[:, step, :] = da @ wx.T
        dh_next = da @ wh.T
        dc_next = dc * gf
    return grad_x, grad_wx, grad_wh, grad_b


def bilstm_forward(x, params: dict[str, np.ndarray]):
    """Run an LSTM over both time directions; outputs are concatenated
    per index, so the result width is twice the per-direction cell count.
    """
    x, squeeze = _promote(x)
    fwd_hs, fwd_cache = _lstm_dir_forward(x, params["fwd_wx"], params["fwd_wh"], params["fwd_b"])
    bwd_hs_rev, bwd_cache = _lstm_dir_forward(
        x[:, ::-1, :], params["bwd_wx"], params["bwd_wh"], params["bwd_b"]
    )
    y = np.concatenate([fwd_hs, bwd_hs_rev[:, ::-1, :]], axis=2)
    return (y[0] if squeeze else y), (fwd_cache, bwd_cache, squeeze)


def bilstm_backward(grad_y, cache):
    fwd_cache, bwd_cache, squeeze = cache
    if squeeze:
        grad_y = grad_y[None]
    cells = grad_y.shape[2] // 2
    grad_x_fwd, dwx_f, dwh_f, db_f = _lstm_dir_backward(grad_y[:, :, :cells], fwd_cache)
    grad_x_bwd_rev, dwx_b, dwh_b, db_b = _lstm_dir_backward(
        grad_y[:, ::-1, cells:], bwd_cache
    )
    grad_x = grad_x_fwd + grad_x_bwd_rev[:, ::-1, :]
    grads = {
        "fwd_wx": dwx_f,
        "fwd_wh": dwh_f,
        "fwd_b": db_f,
        "bwd_wx": dwx_b,
        "bwd_wh": dwh_b,
        "bwd_b": db_b,
    }
    return (grad_x[0] if squeeze else grad_x), grads


# ------------------------------------------------------------ batchnorm


def batchnorm_forward(
    x,
    gamma,
    beta,
    running_mean,
    running_var,
    mode: str,
    momentum: float = 0.9,
    eps: float = 1e-5,
):
    """Normalize per feature over all leading axes.

    Train mode uses batch statistics and returns updated running
    statistics; eval mode normalizes with the running ones.
    """
    x = np.asarray(x, dtype=np.float64)
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    elif mode == "eval":
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    else:
        raise ValueError(f"unknown mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    y = gamma * x_hat + beta
    cache = (x_hat, inv_std, gamma, mode, axes)
    return y, cache, new_mean, new_var


def batchnorm_backward(grad_y, cache):
    x_hat, inv_std, gamma, mode, axes = cache
    grad_gamma = (grad_y * x_hat).sum(axis=axes)
    grad_beta = grad_y.sum(axis=axes)
    dx_hat = grad_y * gamma
    if mode == "eval":
        return dx_hat * inv_std, grad_gamma, grad_beta
    grad_x = (
        dx_hat - dx_hat.mean(axis=axes) - x_hat * (dx_hat * x_hat).mean(axis=axes)
    ) * inv_std
    return grad_x, grad_gamma, grad_beta


# -------------------------------------------------------------- dropout


def dropout_forward(x, rate: float, mode: str, rng: np.random.Generator | None = None):
    """Inverted dropout: train mode zeroes units with probability ``rate``
    and scales survivors by 1/(1-rate); eval mode is the identity.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("drop rate must be in [0, 1)")
    x = np.asarray(x, dtype=np.float64)
    if mode == "eval" or rate == 0.0:
        return x, None
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad_y, cache):
    if cache is None:
        return grad_y
    return grad_y * cache
