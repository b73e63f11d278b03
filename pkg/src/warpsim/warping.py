"""Learned elastic similarity between time series.

An encoder network (convolutional or recurrent) turns a T x D series
into a T_E x K matrix of per-index context vectors. A small warper
network maps a concatenated context pair (2K inputs) to an alignment
probability in (0, 1). The similarity of two series is::

    s = exp( -(1 / (T_A * T_B)) * sum_ij  L1(E(A)_i - E(B)_j) * phi_ij )

i.e. the exponential of the negative probability-weighted all-pairs L1
context distance. Scores are carried in the log domain (``log_s``) so
long sequences cannot underflow intermediate arithmetic.

The un-warped variant compares identically-indexed contexts only:
``s = exp(-(1/T) * sum_i L1(E(A)_i - E(B)_i))``.

Both are trained on labeled pairs with a logistic loss that pushes
same-class scores toward 1 and different-class scores toward 0.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PairBatch, TimeSeries, sample_pair_batch
from .nn.gradcheck import finite_diff_check
from .nn.layers import (
    activate,
    activate_backward,
    batchnorm_backward,
    batchnorm_forward,
    bilstm_backward,
    bilstm_forward,
    bilstm_init,
    conv1d_backward,
    conv1d_forward,
    conv1d_out_length,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    glorot_uniform,
    sigmoid,
)
from .nn.optim import DivergenceError, adam_step, clip_gradients
from .nn.store import ParamStore, load_checkpoint, save_checkpoint
from .seeding import substream

logger = logging.getLogger(__name__)

LOG_ONE_MINUS_FLOOR = 1e-12
SMOOTHING_WINDOW = 100

_BILSTM_KEYS = ("fwd_wx", "fwd_wh", "fwd_b", "bwd_wx", "bwd_wh", "bwd_b")


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv1d | bilstm | batchnorm | dropout
    size: int = 0  # filters, or cells per direction
    width: int = 1
    stride: int = 1
    rate: float = 0.0
    activation: str = "identity"


@dataclass(frozen=True)
class EncoderConfig:
    kind: str  # cnn | rnn
    layers: tuple[LayerSpec, ...]
    context_width: int


@dataclass(frozen=True)
class WarperConfig:
    """Fully-connected alignment network: 2K inputs, relu hidden layers,
    one sigmoid output unit."""

    hidden: tuple[int, ...] = (64, 16)


def cnn_encoder_config(
    filters=(1024, 128, 64), widths=(5, 5, 3), strides=(2, 1, 1), drop_rate=0.05
) -> EncoderConfig:
    layers = []
    for f, w, s in zip(filters, widths, strides):
        layers.append(LayerSpec("conv1d", size=f, width=w, stride=s))
        layers.append(LayerSpec("batchnorm", size=f, activation="relu"))
    layers.append(LayerSpec("dropout", rate=drop_rate))
    return EncoderConfig("cnn", tuple(layers), filters[-1])


def rnn_encoder_config(cells=(128, 64, 32), drop_rate=0.05) -> EncoderConfig:
    layers = [LayerSpec("bilstm", size=c) for c in cells]
    layers.append(LayerSpec("batchnorm", size=2 * cells[-1]))
    layers.append(LayerSpec("dropout", rate=drop_rate))
    return EncoderConfig("rnn", tuple(layers), 2 * cells[-1])


def encoder_config(kind: str, scale: str = "desk") -> EncoderConfig:
    """Named architectures: full-size ``paper`` and a small ``desk`` scale
    that exercises every mechanism at laptop speed (K=16)."""
    if scale == "paper":
        return cnn_encoder_config() if kind == "cnn" else rnn_encoder_config()
    if scale == "desk":
        if kind == "cnn":
            return cnn_encoder_config(filters=(16, 16), widths=(5, 3), strides=(2, 1))
        return rnn_encoder_config(cells=(8,))
    raise ValueError(f"unknown scale {scale!r}")


def warper_config(scale: str = "desk") -> WarperConfig:
    return WarperConfig(hidden=(64, 16)) if scale == "paper" else WarperConfig(hidden=(16, 8, 4))


def encoded_length(cfg: EncoderConfig, t: int) -> int:
    for spec in cfg.layers:
        if spec.kind == "conv1d":
            t = conv1d_out_length(t, spec.stride)
    return t


# ------------------------------------------------------- initialization


def init_params(
    enc_cfg: EncoderConfig,
    warper_cfg: WarperConfig | None,
    channels: int,
    rng: np.random.Generator,
    head_classes: int | None = None,
) -> ParamStore:
    store = ParamStore()
    width = channels
    for i, spec in enumerate(enc_cfg.layers):
        name = f"enc/{i}"
        if spec.kind == "conv1d":
            fan_in = spec.width * width
            fan_out = spec.width * spec.size
            store.add_param(f"{name}/w", glorot_uniform((spec.size, spec.width, width), fan_in, fan_out, rng))
            width = spec.size
        elif spec.kind == "bilstm":
            for key, value in bilstm_init(width, spec.size, rng).items():
                store.add_param(f"{name}/{key}", value)
            width = 2 * spec.size
        elif spec.kind == "batchnorm":
            store.add_param(f"{name}/gamma", np.ones(width))
            store.add_param(f"{name}/beta", np.zeros(width))
            store.add_buffer(f"{name}/mean", np.zeros(width))
            store.add_buffer(f"{name}/var", np.ones(width))
        elif spec.kind == "dropout":
            pass
        else:
            raise ValueError(f"unknown encoder layer kind {spec.kind!r}")
    if width != enc_cfg.context_width:
        raise ValueError(
            f"encoder layers produce width {width}, config declares {enc_cfg.context_width}"
        )
    if warper_cfg is not None:
        prev = 2 * enc_cfg.context_width
        for i, units in enumerate((*warper_cfg.hidden, 1)):
            store.add_param(f"warp/{i}/w", glorot_uniform((prev, units), prev, units, rng))
            store.add_param(f"warp/{i}/b", np.zeros(units))
            prev = units
    if head_classes is not None:
        k = enc_cfg.context_width
        store.add_param("head/w", glorot_uniform((k, head_classes), k, head_classes, rng))
        store.add_param("head/b", np.zeros(head_classes))
    return store


# --------------------------------------------------------- encoder pass


def encoder_forward(x, store: ParamStore, cfg: EncoderConfig, mode: str, rng=None):
    h = np.asarray(x, dtype=np.float64)
    caches = []
    for i, spec in enumerate(cfg.layers):
        name = f"enc/{i}"
        if spec.kind == "conv1d":
            if h.shape[-2] < 1:
                raise ValueError("conv input has no time indices")
            h, cache = conv1d_forward(h, store.params[f"{name}/w"], spec.stride)
        elif spec.kind == "bilstm":
            params = {key: store.params[f"{name}/{key}"] for key in _BILSTM_KEYS}
            h, cache = bilstm_forward(h, params)
        elif spec.kind == "batchnorm":
            h, cache, new_mean, new_var = batchnorm_forward(
                h,
                store.params[f"{name}/gamma"],
                store.params[f"{name}/beta"],
                store.buffers[f"{name}/mean"],
                store.buffers[f"{name}/var"],
                mode,
            )
            if mode == "train":
                store.buffers[f"{name}/mean"][...] = new_mean
                store.buffers[f"{name}/var"][...] = new_var
        elif spec.kind == "dropout":
            h, cache = dropout_forward(h, spec.rate, mode, rng)
        z = h
        h = activate(z, spec.activation)
        caches.append((spec, cache, z, h))
    return h, caches


def encoder_backward(grad, caches, cfg: EncoderConfig):
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(len(cfg.layers))):
        spec, cache, z, h = caches[i]
        name = f"enc/{i}"
        grad = activate_backward(grad, z, h, spec.activation)
        if spec.kind == "conv1d":
            grad, dw = conv1d_backward(grad, cache)
            grads[f"{name}/w"] = dw
        elif spec.kind == "bilstm":
            grad, layer_grads = bilstm_backward(grad, cache)
            for key, value in layer_grads.items():
                grads[f"{name}/{key}"] = value
        elif spec.kind == "batchnorm":
            grad, dgamma, dbeta = batchnorm_backward(grad, cache)
            grads[f"{name}/gamma"] = dgamma
            grads[f"{name}/beta"] = dbeta
        elif spec.kind == "dropout":
            grad = dropout_backward(grad, cache)
    return grads, grad


def encode(series, store: ParamStore, cfg: EncoderConfig, mode: str = "eval", rng=None) -> np.ndarray:
    """Context matrix (T_E x K) for one series."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    ctx, _ = encoder_forward(values[None], store, cfg, mode, rng)
    return ctx[0]


# ---------------------------------------------------------- warper pass


def _warper_layer_count(cfg: WarperConfig) -> int:
    return len(cfg.hidden) + 1


def warper_forward(pairs, store: ParamStore, cfg: WarperConfig):
    """Alignment probabilities for rows of concatenated context pairs."""
    h = pairs
    caches = []
    last = _warper_layer_count(cfg) - 1
    for i in range(last + 1):
        act = "sigmoid" if i == last else "relu"
        h, cache = dense_forward(h, store.params[f"warp/{i}/w"], store.params[f"warp/{i}/b"], act)
        caches.append(cache)
    return h[:, 0], caches


def warper_backward(grad_probs, caches, cfg: WarperConfig):
    grads: dict[str, np.ndarray] = {}
    grad = grad_probs[:, None]
    for i in reversed(range(_warper_layer_count(cfg))):
        grad, dw, db = dense_backward(grad, caches[i])
        grads[f"warp/{i}/w"] = dw
        grads[f"warp/{i}/b"] = db
    return grads, grad


def warper_prob(ctx_a, ctx_b, store: ParamStore, cfg: WarperConfig) -> float:
    """Probability of aligning two K-wide context vectors (first argument
    occupies the first K warper inputs)."""
    ctx_a = np.asarray(ctx_a, dtype=np.float64).ravel()
    ctx_b = np.asarray(ctx_b, dtype=np.float64).ravel()
    expected = store.params["warp/0/w"].shape[0]
    if ctx_a.size + ctx_b.size != expected:
        raise ValueError(f"context widths {ctx_a.size}+{ctx_b.size} do not match warper input {expected}")
    probs, _ = warper_forward(np.concatenate([ctx_a, ctx_b])[None], store, cfg)
    return float(probs[0])


# ------------------------------------------------------------- scoring


@dataclass(frozen=True)
class SimilarityScore:
    """Similarity in (0, 1] with its exact log carried alongside."""

    s: float
    log_s: float


_scratch_store = threading.local()


def _scratch(key: str, shape: tuple[int, ...]) -> np.ndarray:
    """Reusable per-thread buffer; fresh multi-megabyte temporaries every
    iteration would page-fault the allocator in the training loop."""
    pool = getattr(_scratch_store, "pool", None)
    if pool is None:
        pool = _scratch_store.pool = {}
    buf = pool.get(key)
    if buf is None or buf.shape != shape:
        buf = pool[key] = np.empty(shape)
    return buf


def _allpairs_forward(ea, eb, store, cfg: WarperConfig, probs_override=None):
    # ea: [P, Ta, K], eb: [P, Tb, K]. The returned cache aliases scratch
    # buffers: consume it (backward) before the next call on this thread.
    p, ta, k = ea.shape
    tb = eb.shape[1]
    diff = np.subtract(ea[:, :, None, :], eb[:, None, :, :], out=_scratch("diff", (p, ta, tb, k)))
    l1 = np.abs(diff, out=_scratch("absdiff", (p, ta, tb, k))).sum(axis=3)
    if probs_override is None:
        # The first warper layer is linear in the concatenated pair, so
        # feed both halves separately and add broadcast-wise: this avoids
        # materializing all Ta*Tb concatenated rows.
        w0 = store.params["warp/0/w"]
        widths = (*cfg.hidden, 1)
        zb = eb @ w0[k:] + store.params["warp/0/b"]
        z0 = np.add(
            (ea @ w0[:k])[:, :, None, :],
            zb[:, None, :, :],
            out=_scratch("z/0", (p, ta, tb, widths[0])),
        )
        zs = [z0.reshape(p * ta * tb, widths[0])]
        hs = []
        h = z0
        for i in range(1, len(widths)):
            h = np.maximum(h, 0.0, out=_scratch(f"h/{i - 1}", h.shape)).reshape(p * ta * tb, -1)
            hs.append(h)
            z = np.matmul(h, store.params[f"warp/{i}/w"], out=_scratch(f"z/{i}", (h.shape[0], widths[i])))
            z += store.params[f"warp/{i}/b"]
            zs.append(z)
            h = z
        probs = sigmoid(h.reshape(p, ta, tb, -1)[..., 0])
        wcache = (ea, eb, zs, hs, probs)
    else:
        probs = np.full((p, ta, tb), float(probs_override))
        wcache = None
    log_s = -(l1 * probs).mean(axis=(1, 2))
    return log_s, (diff, l1, probs, wcache)


def _allpairs_backward(dlog_s, cache, store, cfg: WarperConfig):
    diff, l1, probs, wcache = cache
    ea, eb, zs, hs, _ = wcache
    p, ta, tb = l1.shape
    k = diff.shape[3]
    dprod = -(dlog_s / (ta * tb))[:, None, None]
    dl1 = dprod * probs
    dprobs = dprod * l1
    grads: dict[str, np.ndarray] = {}
    grad = (dprobs * probs * (1.0 - probs)).reshape(-1, 1)
    for i in reversed(range(1, len(cfg.hidden) + 1)):
        grads[f"warp/{i}/w"] = hs[i - 1].T @ grad
        grads[f"warp/{i}/b"] = grad.sum(axis=0)
        upstream = np.matmul(grad, store.params[f"warp/{i}/w"].T, out=_scratch(f"g/{i - 1}", hs[i - 1].shape))
        grad = np.multiply(upstream, zs[i - 1] > 0.0, out=upstream)
    grads["warp/0/b"] = grad.sum(axis=0)
    h0 = grad.shape[1]
    dz0 = grad.reshape(p, ta, tb, h0)
    su = dz0.sum(axis=2)  # gradient reaching each ea index
    sv = dz0.sum(axis=1)
    w0 = store.params["warp/0/w"]
    grads["warp/0/w"] = np.concatenate(
        [
            ea.reshape(-1, k).T @ su.reshape(-1, h0),
            eb.reshape(-1, k).T @ sv.reshape(-1, h0),
        ],
        axis=0,
    )
    dea = su @ w0[:k].T
    deb = sv @ w0[k:].T
    sign = np.sign(diff, out=diff)  # diff buffer is dead after this
    dea += np.einsum("ptu,ptuk->ptk", dl1, sign)
    deb -= np.einsum("ptu,ptuk->puk", dl1, sign)
    return grads, dea, deb


def _diag_forward(ea, eb):
    if ea.shape != eb.shape:
        raise ValueError(f"un-warped similarity needs equal encoded shapes, got {ea.shape} vs {eb.shape}")
    diff = ea - eb
    l1 = np.abs(diff).sum(axis=2)
    log_s = -l1.mean(axis=1)
    return log_s, diff


def _diag_backward(dlog_s, diff):
    t = diff.shape[1]
    dl1 = -(dlog_s / t)[:, None, None]
    dea = dl1 * np.sign(diff)
    return dea, -dea


def warped_similarity(
    a,
    b,
    store: ParamStore,
    enc_cfg: EncoderConfig,
    warper_cfg: WarperConfig,
    mode: str = "eval",
    rng=None,
    probs_override=None,
) -> SimilarityScore:
    """Probability-weighted all-pairs context similarity of two series.

    ``probs_override`` replaces every alignment probability with a
    constant, which reduces the measure to known special cases (0 gives
    s = 1; 1 gives the plain all-pairs L1 measure).
    """
    ea = encode(a, store, enc_cfg, mode, rng)[None]
    eb = encode(b, store, enc_cfg, mode, rng)[None]
    log_s, _ = _allpairs_forward(ea, eb, store, warper_cfg, probs_override)
    return SimilarityScore(float(np.exp(log_s[0])), float(log_s[0]))


def siamese_similarity(
    a, b, store: ParamStore, enc_cfg: EncoderConfig, mode: str = "eval", rng=None
) -> SimilarityScore:
    """Un-warped variant: L1 distance of identically-indexed contexts."""
    ea = encode(a, store, enc_cfg, mode, rng)[None]
    eb = encode(b, store, enc_cfg, mode, rng)[None]
    log_s, _ = _diag_forward(ea, eb)
    return SimilarityScore(float(np.exp(log_s[0])), float(log_s[0]))


# ---------------------------------------------------------------- loss


def logistic_pair_loss(log_s, targets):
    """Loss and its gradient with respect to each pair's log-score.

    Same-class pairs contribute ``-log s`` and different-class pairs
    ``-log(1 - s)``, each averaged over its own count; ``1 - s`` is
    evaluated as ``-expm1(log_s)`` and floored at 1e-12.
    """
    log_s = np.asarray(log_s, dtype=np.float64)
    pos = np.asarray(targets) == 1
    n_pos = int(pos.sum())
    n_neg = log_s.size - n_pos
    log_one_minus = np.log(np.maximum(-np.expm1(log_s), LOG_ONE_MINUS_FLOOR))
    loss = 0.0
    dlog_s = np.zeros(log_s.size)
    if n_pos:
        loss -= log_s[pos].sum() / n_pos
        dlog_s[pos] = -1.0 / n_pos
    if n_neg:
        loss -= log_one_minus[~pos].sum() / n_neg
        dlog_s[~pos] = np.exp(log_s[~pos] - log_one_minus[~pos]) / n_neg
    return float(loss), dlog_s


def _pair_loss_arrays(a_stack, b_stack, targets, store, enc_cfg, warper_cfg, mode, rng):
    n_pairs = a_stack.shape[0]
    combined = np.concatenate([a_stack, b_stack], axis=0)
    ctx, enc_caches = encoder_forward(combined, store, enc_cfg, mode, rng)
    ea, eb = ctx[:n_pairs], ctx[n_pairs:]
    if warper_cfg is not None:
        log_s, score_cache = _allpairs_forward(ea, eb, store, warper_cfg)
    else:
        log_s, score_cache = _diag_forward(ea, eb)

    loss, dlog_s = logistic_pair_loss(log_s, targets)

    if warper_cfg is not None:
        grads, dea, deb = _allpairs_backward(dlog_s, score_cache, store, warper_cfg)
    else:
        grads = {}
        dea, deb = _diag_backward(dlog_s, score_cache)
    dctx = np.concatenate([dea, deb], axis=0)
    enc_grads, dinput = encoder_backward(dctx, enc_caches, enc_cfg)
    grads.update(enc_grads)
    return loss, grads, (dinput[:n_pairs], dinput[n_pairs:]), log_s


def pair_loss(
    batch: PairBatch,
    store: ParamStore,
    enc_cfg: EncoderConfig,
    warper_cfg: WarperConfig | None,
    mode: str = "train",
    rng=None,
):
    """Logistic pair loss and its gradients for every parameter group.

    Same-class pairs contribute ``-log s`` and different-class pairs
    ``-log(1 - s)``, each averaged over its own count; ``1 - s`` is
    computed as ``-expm1(log_s)`` and floored at 1e-12.
    """
    if not batch.pairs:
        raise ValueError("empty pair batch")
    a_stack = np.stack([pair[0].values for pair in batch.pairs])
    b_stack = np.stack([pair[1].values for pair in batch.pairs])
    targets = np.array([pair[2] for pair in batch.pairs], dtype=np.int64)
    loss, grads, _, _ = _pair_loss_arrays(a_stack, b_stack, targets, store, enc_cfg, warper_cfg, mode, rng)
    return loss, grads


# ------------------------------------------------------------- training


@dataclass
class TrainResult:
    store: ParamStore
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    learning_rate: float = 0.0
    restarted: bool = False


def train_similarity(
    train_set: Dataset,
    enc_cfg: EncoderConfig,
    warper_cfg: WarperConfig | None,
    iterations: int,
    pairs_per_side: int,
    lr: float = 1e-3,
    seed: int = 0,
    log_every: int = 0,
    max_grad: float = 10.0,
) -> TrainResult:
    """Pair-loss training: sample a balanced pair batch, clip gradients
    element-wise, apply Adam jointly to encoder and warper.

    A non-finite loss or gradient restarts the optimization once from
    scratch at a tenth of the learning rate; a second divergence aborts.
    """
    rates = (lr, lr / 10.0)
    for attempt, rate in enumerate(rates):
        rng_init = substream(seed, "init")
        rng_sample = substream(seed, "sampling")
        rng_drop = substream(seed, "dropout")
        store = init_params(enc_cfg, warper_cfg, train_set.channels, rng_init)
        trace: list[tuple[int, float, float]] = []
        recent: deque[float] = deque(maxlen=SMOOTHING_WINDOW)
        try:
            for it in range(iterations):
                batch = sample_pair_batch(train_set, pairs_per_side, rng_sample)
                loss, grads = pair_loss(batch, store, enc_cfg, warper_cfg, "train", rng_drop)
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at iteration {it}")
                adam_step(store, clip_gradients(grads, max_grad), rate)
                recent.append(loss)
                trace.append((it, loss, sum(recent) / len(recent)))
                if log_every and (it + 1) % log_every == 0:
                    logger.info("iter %d loss %.6f smoothed %.6f", it + 1, loss, trace[-1][2])
            return TrainResult(store, trace, rate, restarted=attempt > 0)
        except DivergenceError as exc:
            if attempt == len(rates) - 1:
                raise DivergenceError(
                    f"training diverged at rate {rates[0]} and again after restarting "
                    f"at rate {rate}: {exc}"
                ) from exc
            logger.warning("divergence at rate %g (%s); restarting at %g", rate, exc, rates[attempt + 1])
    raise AssertionError("unreachable")


# ------------------------------------------------------ classification


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def classifier_train(
    train_set: Dataset,
    enc_cfg: EncoderConfig,
    iterations: int,
    batch_size: int = 100,
    lr: float = 1e-3,
    seed: int = 0,
    max_grad: float = 10.0,
) -> TrainResult:
    """Cross-entropy training of the same encoder with mean pooling over
    encoded indices and a dense softmax head."""
    rng_init = substream(seed, "init")
    rng_sample = substream(seed, "sampling")
    rng_drop = substream(seed, "dropout")
    store = init_params(enc_cfg, None, train_set.channels, rng_init, head_classes=train_set.num_classes)
    values = np.stack([inst.values for inst in train_set.instances])
    labels = train_set.labels
    trace: list[tuple[int, float, float]] = []
    recent: deque[float] = deque(maxlen=SMOOTHING_WINDOW)
    for it in range(iterations):
        idx = rng_sample.integers(0, len(train_set), size=batch_size)
        x = values[idx]
        y = labels[idx]
        ctx, enc_caches = encoder_forward(x, store, enc_cfg, "train", rng_drop)
        pooled = ctx.mean(axis=1)
        logits, head_cache = dense_forward(pooled, store.params["head/w"], store.params["head/b"])
        probs = _softmax(logits)
        loss = float(-np.log(np.maximum(probs[np.arange(batch_size), y], 1e-300)).mean())
        dlogits = probs.copy()
        dlogits[np.arange(batch_size), y] -= 1.0
        dlogits /= batch_size
        dpooled, dw, db = dense_backward(dlogits, head_cache)
        dctx = np.broadcast_to(dpooled[:, None, :] / ctx.shape[1], ctx.shape)
        grads, _ = encoder_backward(dctx, enc_caches, enc_cfg)
        grads["head/w"] = dw
        grads["head/b"] = db
        adam_step(store, clip_gradients(grads, max_grad), lr)
        recent.append(loss)
        trace.append((it, loss, sum(recent) / len(recent)))
    return TrainResult(store, trace, lr)


def classifier_predict(series, store: ParamStore, enc_cfg: EncoderConfig) -> np.ndarray:
    """Class-probability vector for one series."""
    ctx = encode(series, store, enc_cfg, "eval")
    logits, _ = dense_forward(ctx.mean(axis=0)[None], store.params["head/w"], store.params["head/b"])
    return _softmax(logits)[0]


# ------------------------------------------------------- checkpointing


def _layer_to_dict(spec: LayerSpec) -> dict:
    return {
        "kind": spec.kind,
        "size": spec.size,
        "width": spec.width,
        "stride": spec.stride,
        "rate": spec.rate,
        "activation": spec.activation,
    }


def encoder_config_to_dict(cfg: EncoderConfig) -> dict:
    return {
        "kind": cfg.kind,
        "layers": [_layer_to_dict(spec) for spec in cfg.layers],
        "context_width": cfg.context_width,
    }


def encoder_config_from_dict(blob: dict) -> EncoderConfig:
    layers = tuple(LayerSpec(**layer) for layer in blob["layers"])
    return EncoderConfig(blob["kind"], layers, blob["context_width"])


def save_model(store: ParamStore, enc_cfg: EncoderConfig, warper_cfg: WarperConfig | None, path, extra: dict | None = None) -> None:
    config = {
        "encoder": encoder_config_to_dict(enc_cfg),
        "warper": {"hidden": list(warper_cfg.hidden)} if warper_cfg is not None else None,
        "extra": extra or {},
    }
    save_checkpoint(store, path, config)


def load_model(path) -> tuple[ParamStore, EncoderConfig, WarperConfig | None, dict]:
    store, config = load_checkpoint(path)
    if config is None or "encoder" not in config:
        raise ValueError(f"{path} does not contain a model config block")
    enc_cfg = encoder_config_from_dict(config["encoder"])
    warper_cfg = WarperConfig(tuple(config["warper"]["hidden"])) if config["warper"] else None
    return store, enc_cfg, warper_cfg, config.get("extra", {})


# ------------------------------------------------------ gradient check


def pair_loss_gradient_check(
    enc_cfg: EncoderConfig,
    warper_cfg: WarperConfig | None,
    t: int = 8,
    channels: int = 1,
    seed: int = 0,
    eps=(1e-4, 1e-5, 1e-6),
) -> float:
    """Max relative error between the analytic pair-loss gradients
    (parameters and inputs) and central finite differences.

    Runs in train mode with the dropout stream re-seeded per evaluation
    so the objective is deterministic. The loss surface has relu and
    |.| kinks; a fixture can land exactly on one (zero-initialized
    biases make an all-clamped row reach a relu boundary exactly),
    where a one-sided subgradient and the central difference disagree
    by construction. Seeds are pinned in callers to generic points.
    """
    rng = substream(seed, "gradcheck")
    store = init_params(enc_cfg, warper_cfg, channels, rng)
    a_stack = rng.standard_normal((2, t, channels))
    b_stack = rng.standard_normal((2, t, channels))
    targets = np.array([1, 0])

    def fresh_rng():
        return substream(seed, "gradcheck-dropout")

    def run():
        # Running batchnorm stats must not drift between evaluations.
        frozen = {name: buf.copy() for name, buf in store.buffers.items()}
        loss, grads, dinputs, _ = _pair_loss_arrays(
            a_stack, b_stack, targets, store, enc_cfg, warper_cfg, "train", fresh_rng()
        )
        for name, buf in store.buffers.items():
            buf[...] = frozen[name]
        return loss, grads, dinputs

    _, analytic, (da, db) = run()
    arrays = dict(store.params)
    analytic_all = dict(analytic)
    arrays["input/a"] = a_stack
    arrays["input/b"] = b_stack
    analytic_all["input/a"] = da
    analytic_all["input/b"] = db
    return finite_diff_check(lambda: run()[0], arrays, analytic_all, eps)
