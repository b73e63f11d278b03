import numpy as np
import pytest

from warpsim import dtw, dtw_path, dtw_via_indicator, euclidean, substream, twed
from warpsim.elastic import WarpingPath

from oracles import brute_force_dtw, path_cost


def test_dtw_identity_is_zero():
    rng = substream(0, "dtw")
    for _ in range(10):
        a = rng.standard_normal((int(rng.integers(1, 12)), int(rng.integers(1, 3))))
        assert dtw(a, a)[0] == 0.0


def test_dtw_known_values():
    assert dtw([1.0], [3.0])[0] == 4.0
    dist, _ = dtw([0.0, 1.0, 2.0], [0.0, 2.0])
    assert dist == brute_force_dtw(np.array([[0.0], [1.0], [2.0]]), np.array([[0.0], [2.0]]))
    assert dist == 1.0


def test_dtw_matches_brute_force_small():
    rng = substream(1, "dtw-oracle")
    for _ in range(25):
        d = int(rng.choice([1, 3]))
        a = rng.standard_normal((int(rng.integers(1, 7)), d))
        b = rng.standard_normal((int(rng.integers(1, 7)), d))
        dist, _ = dtw(a, b)
        assert dist == brute_force_dtw(a, b)


def test_dtw_channel_mismatch():
    with pytest.raises(ValueError, match="channel"):
        dtw(np.ones((3, 1)), np.ones((3, 2)))


def test_dtw_symmetry_nonnegative():
    rng = substream(2, "dtw-sym")
    for _ in range(20):
        a = rng.standard_normal((int(rng.integers(1, 10)), 2))
        b = rng.standard_normal((int(rng.integers(1, 10)), 2))
        dab, dba = dtw(a, b)[0], dtw(b, a)[0]
        assert dab >= 0.0
        assert abs(dab - dba) <= 1e-9


def test_dtw_path_identity_diagonal():
    a = np.arange(5.0)
    _, c = dtw(a, a)
    assert dtw_path(c).pairs == tuple((i, i) for i in range(1, 6))


def test_dtw_path_cost_matches_distance():
    rng = substream(3, "dtw-path")
    for _ in range(25):
        a = rng.standard_normal((int(rng.integers(1, 20)), 1))
        b = rng.standard_normal((int(rng.integers(1, 20)), 1))
        dist, c = dtw(a, b)
        path = dtw_path(c)
        path.validate_endpoints(a.shape[0], b.shape[0])
        assert abs(path_cost(a, b, path.pairs) - dist) <= 1e-9


def test_dtw_path_deterministic():
    rng = substream(4, "dtw-tie")
    a = rng.standard_normal((9, 1))
    b = rng.standard_normal((7, 1))
    _, c = dtw(a, b)
    assert dtw_path(c).pairs == dtw_path(c).pairs


def test_warping_path_step_validation():
    with pytest.raises(ValueError):
        WarpingPath(((1, 1), (3, 1)))
    with pytest.raises(ValueError):
        WarpingPath(((2, 1),))
    path = WarpingPath(((1, 1), (2, 2)))
    with pytest.raises(ValueError):
        path.validate_endpoints(3, 3)


def test_indicator_equals_dp_on_optimal_path():
    rng = substream(5, "indicator")
    for _ in range(25):
        a = rng.standard_normal((int(rng.integers(1, 33)), 1))
        b = rng.standard_normal((int(rng.integers(1, 33)), 1))
        dist, c = dtw(a, b)
        assert abs(dtw_via_indicator(a, b, dtw_path(c)) - dist) <= 1e-9


def test_indicator_includes_first_cell():
    a, b = np.array([[1.0], [2.0]]), np.array([[4.0], [2.0]])
    dist, c = dtw(a, b)
    value = dtw_via_indicator(a, b, dtw_path(c))
    assert value >= (1.0 - 4.0) ** 2


def test_indicator_suboptimal_path_dominates():
    rng = substream(6, "suboptimal")
    for _ in range(10):
        ta, tb = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        a = rng.standard_normal((ta, 1))
        b = rng.standard_normal((tb, 1))
        # L-shaped path: across the first row, then down the last column
        pairs = [(1, j) for j in range(1, tb + 1)] + [(i, tb) for i in range(2, ta + 1)]
        value = dtw_via_indicator(a, b, WarpingPath(tuple(pairs)))
        assert value >= dtw(a, b)[0] - 1e-12


def test_dtw_band():
    rng = substream(7, "band")
    a = rng.standard_normal((12, 1))
    b = rng.standard_normal((12, 1))
    assert dtw(a, b, band=12)[0] == dtw(a, b)[0]
    banded = dtw(a, b, band=1)[0]
    assert banded >= dtw(a, b)[0]
    with pytest.raises(ValueError, match="band"):
        dtw(np.ones((10, 1)), np.ones((3, 1)), band=2)


# ----------------------------------------------------------------- twed


def test_twed_identity_zero():
    rng = substream(8, "twed")
    for _ in range(10):
        a = rng.standard_normal((int(rng.integers(1, 15)), int(rng.integers(1, 3))))
        assert twed(a, a, 0.001, 1.0) == 0.0
        assert twed(a, a, 2.0, 5.0) == 0.0


def test_twed_symmetry():
    rng = substream(9, "twed-sym")
    for _ in range(40):
        a = rng.standard_normal((int(rng.integers(1, 16)), 1))
        b = rng.standard_normal((int(rng.integers(1, 16)), 1))
        assert abs(twed(a, b, 0.001, 1.0) - twed(b, a, 0.001, 1.0)) <= 1e-9
        assert twed(a, b, 0.001, 1.0) >= 0.0


def test_twed_triangle_inequality():
    rng = substream(10, "twed-tri")
    for _ in range(60):
        t = int(rng.integers(1, 12))
        a, b, c = (rng.standard_normal((t, 1)) for _ in range(3))
        ab = twed(a, b, 0.001, 1.0)
        bc = twed(b, c, 0.001, 1.0)
        ac = twed(a, c, 0.001, 1.0)
        assert ac <= ab + bc + 1e-9


def test_twed_parameter_validation():
    with pytest.raises(ValueError):
        twed([1.0], [2.0], -0.1, 1.0)
    with pytest.raises(ValueError):
        twed([1.0], [2.0], 0.1, -1.0)


def test_euclidean():
    assert euclidean([1.0, 2.0], [1.0, 4.0]) == 4.0
    with pytest.raises(ValueError):
        euclidean([1.0, 2.0], [1.0, 2.0, 3.0])
