"""Exact non-parametric elastic measures.

Dynamic time warping with optimal-path extraction (and the equivalent
all-pairs indicator form of the optimal alignment), time warp edit
distance, and a plain Euclidean baseline. All costs are computed in
double precision with no approximation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeSeries


@dataclass(frozen=True)
class WarpingPath:
    """Ordered 1-based index pairs aligning two series.

    Starts at (1, 1), ends at (T_A, T_B), and each step advances by
    (0,1), (1,0) or (1,1).
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))
        if not self.pairs:
            raise ValueError("path must be nonempty")
        if self.pairs[0] != (1, 1):
            raise ValueError(f"path must start at (1, 1), got {self.pairs[0]}")
        for (pi, pj), (ci, cj) in zip(self.pairs, self.pairs[1:]):
            if (ci - pi, cj - pj) not in ((0, 1), (1, 0), (1, 1)):
                raise ValueError(f"invalid step from {(pi, pj)} to {(ci, cj)}")

    def validate_endpoints(self, t_a: int, t_b: int) -> None:
        if self.pairs[-1] != (t_a, t_b):
            raise ValueError(f"path must end at ({t_a}, {t_b}), got {self.pairs[-1]}")


def _local_cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Squared Euclidean over channels for every index pair.
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _as_matrix(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    v = np.asarray(series, dtype=np.float64)
    return v[:, None] if v.ndim == 1 else v


def dtw(a, b, band: int | None = None) -> tuple[float, np.ndarray]:
    """Dynamic time warping distance and the cumulative cost matrix.

    The local cost is the squared Euclidean distance between the two
    values; the distance is the bottom-right cumulative cost (no square
    root). ``band`` optionally restricts the alignment to |i - j| <= band.
    """
    av, bv = _as_matrix(a), _as_matrix(b)
    if av.shape[1] != bv.shape[1]:
        raise ValueError(f"channel mismatch: {av.shape[1]} vs {bv.shape[1]}")
    ta, tb = av.shape[0], bv.shape[0]
    if band is not None and band < abs(ta - tb):
        raise ValueError(f"band {band} cannot reach the corner of a {ta}x{tb} alignment")
    cost = _local_cost_matrix(av, bv)
    c = np.full((ta, tb), np.inf)
    for i in range(ta):
        lo, hi = (0, tb) if band is None else (max(0, i - band), min(tb, i + band + 1))
        for j in range(lo, hi):
            if i == 0 and j == 0:
                best = 0.0
            elif i == 0:
                best = c[0, j - 1]
            elif j == 0:
                best = c[i - 1, 0]
            else:
                best = min(c[i - 1, j], c[i, j - 1], c[i - 1, j - 1])
            c[i, j] = cost[i, j] + best
    return float(c[ta - 1, tb - 1]), c


def dtw_path(c: np.ndarray) -> WarpingPath:
    """Extract the optimal warping path by backtracing the cost matrix.

    Ties prefer the diagonal, then the left, then the upper predecessor,
    so the output is deterministic.
    """
    ta, tb = c.shape
    i, j = ta - 1, tb - 1
    rev = [(i + 1, j + 1)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, left, up = c[i - 1, j - 1], c[i, j - 1], c[i - 1, j]
            if diag <= left and diag <= up:
                i, j = i - 1, j - 1
            elif left <= up:
                j -= 1
            else:
                i -= 1
        rev.append((i + 1, j + 1))
    return WarpingPath(tuple(reversed(rev)))


def dtw_via_indicator(a, b, path: WarpingPath) -> float:
    """All-pairs form of the aligned distance: sum over every index pair
    of the local cost times an indicator of path membership.

    Equals the DP distance when ``path`` is optimal.
    """
    av, bv = _as_matrix(a), _as_matrix(b)
    if av.shape[1] != bv.shape[1]:
        raise ValueError(f"channel mismatch: {av.shape[1]} vs {bv.shape[1]}")
    path.validate_endpoints(av.shape[0], bv.shape[0])
    member = set(path.pairs)
    cost = _local_cost_matrix(av, bv)
    total = 0.0
    for i in range(av.shape[0]):
        for j in range(bv.shape[0]):
            if (i + 1, j + 1) in member:
                total += cost[i, j]
    return float(total)


def twed(a, b, stiffness: float = 0.001, penalty: float = 1.0) -> float:
    """Time warp edit distance with unit timestamps.

    Local cost is the L1 norm over channels; both series are prefixed
    with a zero vector. ``stiffness`` multiplies timestamp gaps and
    ``penalty`` is the per-deletion cost.
    """
    if stiffness < 0 or penalty < 0:
        raise ValueError("stiffness and penalty must be non-negative")
    av, bv = _as_matrix(a), _as_matrix(b)
    if av.shape[1] != bv.shape[1]:
        raise ValueError(f"channel mismatch: {av.shape[1]} vs {bv.shape[1]}")
    ta, tb = av.shape[0], bv.shape[0]
    ap = np.vstack([np.zeros((1, av.shape[1])), av])
    bp = np.vstack([np.zeros((1, bv.shape[1])), bv])

    def d(x: np.ndarray, y: np.ndarray) -> float:
        return float(np.abs(x - y).sum())

    dp = np.full((ta + 1, tb + 1), np.inf)
    dp[0, 0] = 0.0
    for i in range(1, ta + 1):
        for j in range(1, tb + 1):
            del_a = dp[i - 1, j] + d(ap[i], ap[i - 1]) + stiffness + penalty
            del_b = dp[i, j - 1] + d(bp[j], bp[j - 1]) + stiffness + penalty
            match = (
                dp[i - 1, j - 1]
                + d(ap[i], bp[j])
                + d(ap[i - 1], bp[j - 1])
                + stiffness * 2.0 * abs(i - j)
            )
            dp[i, j] = min(del_a, del_b, match)
    return float(dp[ta, tb])


def euclidean(a, b) -> float:
    """Sum of squared per-index differences; requires equal lengths."""
    av, bv = _as_matrix(a), _as_matrix(b)
    if av.shape != bv.shape:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}")
    diff = av - bv
    return float(np.einsum("ij,ij->", diff, diff))
