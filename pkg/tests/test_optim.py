import numpy as np
import pytest

from warpsim import DivergenceError, substream
from warpsim.nn import ParamStore, adam_step, clip_gradients, load_checkpoint, save_checkpoint


def _store(**arrays):
    store = ParamStore()
    for name, value in arrays.items():
        store.add_param(name, value)
    return store


def test_adam_zero_gradient_no_change():
    store = _store(w=np.array([1.0, -2.0, 3.0]))
    before = store.params["w"].copy()
    adam_step(store, {"w": np.zeros(3)}, lr=1e-3)
    np.testing.assert_array_equal(store.params["w"], before)
    assert store.step == 1


def test_adam_constant_gradient_step_magnitude():
    # With an unchanging gradient the update magnitude approaches lr.
    store = _store(w=np.array([0.0]))
    g = {"w": np.array([0.37])}
    lr = 1e-3
    for _ in range(1000):
        prev = store.params["w"].copy()
        adam_step(store, g, lr)
    delta = abs(store.params["w"][0] - prev[0])
    assert abs(delta - lr) / lr < 0.05


def test_adam_minimizes_quadratic():
    store = _store(theta=np.array([1.0]))
    for _ in range(2000):
        grad = {"theta": 2.0 * store.params["theta"]}
        adam_step(store, grad, lr=1e-2)
    assert abs(store.params["theta"][0]) < 1e-2


def test_adam_rejects_nonfinite_gradient():
    store = _store(w=np.array([1.0]))
    before = store.params["w"].copy()
    with pytest.raises(DivergenceError):
        adam_step(store, {"w": np.array([np.inf])}, lr=1e-3)
    np.testing.assert_array_equal(store.params["w"], before)
    assert store.step == 0


def test_adam_state_stays_finite():
    rng = substream(0, "adam")
    store = _store(w=rng.standard_normal((4, 4)))
    for _ in range(200):
        adam_step(store, {"w": rng.standard_normal((4, 4)) * 100}, lr=0.1)
    assert np.all(np.isfinite(store.params["w"]))
    assert np.all(np.isfinite(store.m["w"]))
    assert np.all(np.isfinite(store.v["w"]))


def test_clip_gradients_examples():
    clipped = clip_gradients({"g": np.array([25.0, -25.0, 3.0])})
    np.testing.assert_array_equal(clipped["g"], [10.0, -10.0, 3.0])
    inside = np.array([1.5, -9.99, 0.0])
    out = clip_gradients({"g": inside})
    assert out["g"].tobytes() == inside.tobytes()


# ------------------------------------------------------------ checkpoint


def test_checkpoint_round_trip_bitwise(tmp_path):
    rng = substream(1, "ckpt")
    store = ParamStore()
    store.add_param("enc/w", rng.standard_normal((3, 5)))
    store.add_param("enc/b", rng.standard_normal(5))
    store.add_buffer("enc/mean", rng.standard_normal(5))
    adam_step(store, {"enc/w": rng.standard_normal((3, 5)), "enc/b": rng.standard_normal(5)}, 1e-3)
    path = tmp_path / "model.ckpt"
    save_checkpoint(store, path, config={"kind": "test"})
    loaded, config = load_checkpoint(path)
    assert config == {"kind": "test"}
    assert loaded.step == store.step
    for name in store.params:
        assert loaded.params[name].tobytes() == store.params[name].tobytes()
        assert loaded.m[name].tobytes() == store.m[name].tobytes()
        assert loaded.v[name].tobytes() == store.v[name].tobytes()
    assert loaded.buffers["enc/mean"].tobytes() == store.buffers["enc/mean"].tobytes()
    # identical stores serialize to identical bytes
    path2 = tmp_path / "again.ckpt"
    save_checkpoint(loaded, path2, config={"kind": "test"})
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_other_files(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValueError):
        load_checkpoint(path)
