"""Adam updates and element-wise gradient clipping."""

from __future__ import annotations

import numpy as np

from .store import ParamStore


class DivergenceError(RuntimeError):
    """Raised when training produces non-finite losses or gradients."""


def clip_gradients(grads: dict[str, np.ndarray], max_mag: float = 10.0) -> dict[str, np.ndarray]:
    """Clamp every gradient component to [-max_mag, +max_mag]."""
    return {name: np.clip(g, -max_mag, max_mag) for name, g in grads.items()}


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update over every parameter group, in place.

    Rejects non-finite gradients by raising :class:`DivergenceError`
    before touching any parameter.
    """
    for name in store.params:
        if not np.all(np.isfinite(grads[name])):
            raise DivergenceError(f"non-finite gradient in group {name!r}")
    store.step += 1
    bc1 = 1.0 - beta1**store.step
    bc2 = 1.0 - beta2**store.step
    for name, p in store.params.items():
        g = grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
