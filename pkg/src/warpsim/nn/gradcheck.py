"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


def finite_diff_check(
    fn: Callable[[], float],
    arrays: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    eps: float | Iterable[float] = 1e-5,
) -> float:
    """Return the worst relative error between analytic gradients and
    central differences.

    ``fn`` re-evaluates the scalar objective and must read the arrays in
    ``arrays``, which are perturbed in place entry by entry. The relative
    error of a component is ``|a - n| / max(1e-8, |a| + |n|)``.

    ``eps`` may be a sequence of step sizes; each component then scores
    its best step. A kink (relu, |.|) straddled by a large step is
    rescued by a smaller one, and rounding noise on a near-zero gradient
    is rescued by a larger one, while a wrong analytic gradient disagrees
    at every step.
    """
    steps = (eps,) if isinstance(eps, float) else tuple(eps)
    worst = 0.0
    for name, arr in arrays.items():
        ana = np.asarray(analytic[name]).ravel()
        flat = arr.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            best = np.inf
            for step in steps:
                flat[k] = orig + step
                f_plus = fn()
                flat[k] = orig - step
                f_minus = fn()
                flat[k] = orig
                numeric = (f_plus - f_minus) / (2.0 * step)
                err = abs(ana[k] - numeric) / max(1e-8, abs(ana[k]) + abs(numeric))
                best = min(best, err)
                if best < 1e-7:
                    break
            worst = max(worst, best)
    return float(worst)
