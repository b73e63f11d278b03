"""Named random sub-streams derived from one master seed.

Every run takes a single integer seed; components (initialization, pair
sampling, dropout, ...) each pull an independent stream so that changing
how one component consumes randomness never perturbs the others.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a generator for the named sub-stream of ``seed``.

    Deterministic across processes and platforms: the stream key is a
    SHA-256 digest of the name, not Python's salted ``hash``.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
