import numpy as np
import pytest

import warpsim.warping as warping
from warpsim import (
    DivergenceError,
    EncoderConfig,
    LayerSpec,
    SyntheticSpec,
    TimeSeries,
    WarperConfig,
    classifier_predict,
    classifier_train,
    encode,
    encoder_config,
    gen_synthetic,
    load_model,
    nn_classify,
    pair_loss,
    pair_loss_gradient_check,
    save_model,
    siamese_similarity,
    substream,
    train_similarity,
    warped_similarity,
    warper_config,
    warper_prob,
)
from warpsim.nn.store import ParamStore
from warpsim.nn.layers import glorot_uniform
from warpsim.warping import (
    _allpairs_forward,
    encoded_length,
    init_params,
    logistic_pair_loss,
    warper_forward,
)


def tiny_rnn(cells=1):
    return EncoderConfig("rnn", (LayerSpec("bilstm", size=cells),), 2 * cells)


def tiny_cnn(filters=3, width=3, stride=1):
    return EncoderConfig(
        "cnn",
        (LayerSpec("conv1d", size=filters, width=width, stride=stride),),
        filters,
    )


def build(enc_cfg, warper_cfg, channels=1, seed=0):
    return init_params(enc_cfg, warper_cfg, channels, substream(seed, "init"))


def random_series(rng, t=6, d=1):
    return TimeSeries(rng.standard_normal((t, d)))


def make_dataset(seed=7, classes=2, per_class=6, t=16):
    spec = SyntheticSpec(classes, per_class, t, 1, shift_range=3, warp_strength=0.2, noise_sigma=0.1)
    return gen_synthetic(spec, substream(seed, "gen"))


# ------------------------------------------------------------- encoding


def test_encode_shapes_paper_scale():
    rnn = encoder_config("rnn", "paper")
    cnn = encoder_config("cnn", "paper")
    series = random_series(substream(0, "x"), t=30)
    rnn_store = build(rnn, None)
    cnn_store = build(cnn, None)
    assert encode(series, rnn_store, rnn).shape == (30, 64)
    assert encode(series, cnn_store, cnn).shape == (15, 64)
    assert encoded_length(rnn, 30) == 30
    assert encoded_length(cnn, 30) == 15


def test_encode_desk_scale_context_width():
    for kind in ("rnn", "cnn"):
        cfg = encoder_config(kind, "desk")
        assert cfg.context_width == 16
        store = build(cfg, None)
        assert encode(random_series(substream(1, "x"), t=8), store, cfg).shape[1] == 16


def test_encode_deterministic_in_eval_mode():
    cfg = encoder_config("rnn", "desk")
    store = build(cfg, None)
    series = random_series(substream(2, "x"), t=10)
    np.testing.assert_array_equal(encode(series, store, cfg), encode(series, store, cfg))


# --------------------------------------------------------------- warper


def test_warper_zero_weights_emit_half():
    cfg = WarperConfig(hidden=(4,))
    store = ParamStore()
    store.add_param("warp/0/w", np.zeros((4, 4)))
    store.add_param("warp/0/b", np.zeros(4))
    store.add_param("warp/1/w", np.zeros((4, 1)))
    store.add_param("warp/1/b", np.zeros(1))
    rng = substream(3, "w")
    for _ in range(5):
        assert warper_prob(rng.standard_normal(2), rng.standard_normal(2), store, cfg) == 0.5


def test_warper_outputs_inside_unit_interval():
    rng = substream(4, "bounds")
    cfg = WarperConfig(hidden=(8, 4))
    store = ParamStore()
    prev = 6
    for i, units in enumerate((8, 4, 1)):
        store.add_param(f"warp/{i}/w", glorot_uniform((prev, units), prev, units, rng))
        store.add_param(f"warp/{i}/b", rng.standard_normal(units))
        prev = units
    probs, _ = warper_forward(rng.standard_normal((10_000, 6)), store, cfg)
    assert np.all(probs > 0.0) and np.all(probs < 1.0)


def test_warper_width_mismatch():
    cfg = WarperConfig(hidden=(4,))
    store = ParamStore()
    store.add_param("warp/0/w", np.zeros((4, 4)))
    store.add_param("warp/0/b", np.zeros(4))
    store.add_param("warp/1/w", np.zeros((4, 1)))
    store.add_param("warp/1/b", np.zeros(1))
    with pytest.raises(ValueError, match="width"):
        warper_prob(np.ones(3), np.ones(2), store, cfg)


def test_batched_warper_matches_loop():
    rng = substream(5, "loop")
    for _ in range(10):
        k = int(rng.integers(1, 4))
        hidden = tuple(int(h) for h in rng.integers(1, 5, size=int(rng.integers(1, 3))))
        cfg = WarperConfig(hidden)
        store = ParamStore()
        prev = 2 * k
        for i, units in enumerate((*hidden, 1)):
            store.add_param(f"warp/{i}/w", glorot_uniform((prev, units), prev, units, rng))
            store.add_param(f"warp/{i}/b", rng.standard_normal(units) * 0.1)
            prev = units
        ta, tb = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        ea = rng.standard_normal((1, ta, k))
        eb = rng.standard_normal((1, tb, k))
        _, (_, _, probs, _) = _allpairs_forward(ea, eb, store, cfg)
        for i in range(ta):
            for j in range(tb):
                assert abs(probs[0, i, j] - warper_prob(ea[0, i], eb[0, j], store, cfg)) <= 1e-12


# -------------------------------------------------------------- scoring


def test_single_index_self_similarity_is_one():
    cfg = tiny_rnn()
    store = build(cfg, WarperConfig((3,)))
    series = TimeSeries([[0.7]])
    score = warped_similarity(series, series, store, cfg, WarperConfig((3,)))
    assert score.s == 1.0 and score.log_s == 0.0


def test_probs_override_reductions():
    cfg = tiny_rnn(2)
    wcfg = WarperConfig((4,))
    store = build(cfg, wcfg, seed=5)
    rng = substream(6, "pair")
    a, b = random_series(rng, 5), random_series(rng, 5)
    off = warped_similarity(a, b, store, cfg, wcfg, probs_override=0.0)
    assert off.s == 1.0 and off.log_s == 0.0
    on = warped_similarity(a, b, store, cfg, wcfg, probs_override=1.0)
    ea, eb = encode(a, store, cfg), encode(b, store, cfg)
    manual = -np.mean([np.abs(ea[i] - eb[j]).sum() for i in range(5) for j in range(5)])
    assert abs(on.log_s - manual) <= 1e-12


def test_warped_similarity_loop_oracle():
    rng = substream(7, "oracle")
    for trial in range(20):
        k = int(rng.integers(1, 4))
        enc_cfg = tiny_cnn(filters=k, width=int(rng.integers(1, 4)))
        wcfg = WarperConfig(tuple(int(h) for h in rng.integers(1, 5, size=2)))
        store = build(enc_cfg, wcfg, seed=trial)
        t = int(rng.integers(1, 5))
        a, b = random_series(rng, t), random_series(rng, t)
        score = warped_similarity(a, b, store, enc_cfg, wcfg)
        ea, eb = encode(a, store, enc_cfg), encode(b, store, enc_cfg)
        total = 0.0
        for i in range(ea.shape[0]):
            for j in range(eb.shape[0]):
                total += np.abs(ea[i] - eb[j]).sum() * warper_prob(ea[i], eb[j], store, wcfg)
        oracle = -total / (ea.shape[0] * eb.shape[0])
        assert abs(score.log_s - oracle) <= 1e-12
        assert abs(score.s - np.exp(oracle)) <= 1e-12


def test_siamese_self_similarity_exact_one():
    cfg = tiny_rnn(2)
    store = build(cfg, None)
    series = random_series(substream(8, "x"), 7)
    score = siamese_similarity(series, series, store, cfg)
    assert score.s == 1.0 and score.log_s == 0.0


def test_siamese_equals_warped_single_index_full_alignment():
    cfg = tiny_rnn()
    wcfg = WarperConfig((3,))
    store = build(cfg, wcfg)
    rng = substream(9, "x")
    a, b = random_series(rng, 1), random_series(rng, 1)
    warped = warped_similarity(a, b, store, cfg, wcfg, probs_override=1.0)
    plain = siamese_similarity(a, b, store, cfg)
    assert abs(warped.log_s - plain.log_s) <= 1e-12


def test_siamese_loop_oracle():
    rng = substream(10, "siam")
    cfg = tiny_rnn(2)
    store = build(cfg, None, seed=2)
    a, b = random_series(rng, 6), random_series(rng, 6)
    ea, eb = encode(a, store, cfg), encode(b, store, cfg)
    oracle = -np.mean([np.abs(ea[i] - eb[i]).sum() for i in range(6)])
    assert abs(siamese_similarity(a, b, store, cfg).log_s - oracle) <= 1e-12


def test_siamese_rejects_unequal_lengths():
    cfg = tiny_rnn()
    store = build(cfg, None)
    rng = substream(11, "x")
    with pytest.raises(ValueError, match="equal encoded shapes"):
        siamese_similarity(random_series(rng, 4), random_series(rng, 6), store, cfg)


def test_score_range_random_parameters():
    rng = substream(12, "range")
    wcfg = WarperConfig((2,))
    for trial in range(200):
        kind = ("rnn", "cnn")[trial % 2]
        enc_cfg = tiny_rnn() if kind == "rnn" else tiny_cnn(filters=2, width=2)
        store = build(enc_cfg, wcfg, seed=trial)
        t = int(rng.integers(1, 5))
        score = warped_similarity(random_series(rng, t), random_series(rng, t), store, enc_cfg, wcfg)
        assert 0.0 < score.s <= 1.0
        assert score.log_s <= 0.0 and np.isfinite(score.log_s)


# ----------------------------------------------------------------- loss


def test_logistic_loss_half_scores():
    log_s = np.log([0.5, 0.5, 0.5, 0.5])
    loss, _ = logistic_pair_loss(log_s, [1, 1, 0, 0])
    assert abs(loss - 2.0 * np.log(2.0)) <= 1e-12


def test_logistic_loss_perfect_scores():
    loss, _ = logistic_pair_loss([-1e-12, -1e-12, -60.0], [1, 1, 0])
    assert loss < 1e-11


def test_logistic_loss_floors_negative_log1m():
    loss, grad = logistic_pair_loss([0.0], [0])
    assert np.isfinite(loss) and loss == -np.log(1e-12)
    assert np.isfinite(grad).all()


def test_pair_loss_full_model_gradients():
    wcfg = warper_config("desk")
    for kind in ("rnn", "cnn"):
        err = pair_loss_gradient_check(encoder_config(kind, "desk"), wcfg, t=8, channels=1, seed=0)
        assert err < 1e-3, f"{kind} gradient error {err}"


def test_pair_loss_siamese_gradients():
    err = pair_loss_gradient_check(encoder_config("rnn", "desk"), None, t=8, channels=1, seed=3)
    assert err < 1e-3


# ------------------------------------------------------------- training


def test_train_zero_iterations():
    ds = make_dataset()
    result = train_similarity(ds, tiny_rnn(), WarperConfig((3,)), 0, 2, seed=0)
    assert result.trace == []
    assert not result.restarted
    assert result.store.params


def test_train_deterministic_traces():
    ds = make_dataset()
    cfg, wcfg = tiny_rnn(2), WarperConfig((4,))
    r1 = train_similarity(ds, cfg, wcfg, 25, 3, seed=13)
    r2 = train_similarity(ds, cfg, wcfg, 25, 3, seed=13)
    assert r1.trace == r2.trace
    for name in r1.store.params:
        assert r1.store.params[name].tobytes() == r2.store.params[name].tobytes()


def test_train_restarts_once_then_succeeds(monkeypatch):
    ds = make_dataset()
    real = warping.pair_loss
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            loss, grads = real(*args, **kwargs)
            return float("inf"), grads
        return real(*args, **kwargs)

    monkeypatch.setattr(warping, "pair_loss", flaky)
    result = train_similarity(ds, tiny_rnn(), WarperConfig((3,)), 5, 2, lr=1e-3, seed=1)
    assert result.restarted
    assert result.learning_rate == pytest.approx(1e-4)
    assert len(result.trace) == 5


def test_train_aborts_after_second_divergence(monkeypatch):
    ds = make_dataset()

    def broken(*args, **kwargs):
        return float("nan"), {}

    monkeypatch.setattr(warping, "pair_loss", broken)
    with pytest.raises(DivergenceError, match="again after restarting"):
        train_similarity(ds, tiny_rnn(), WarperConfig((3,)), 5, 2, lr=10.0, seed=1)


def test_train_loss_decreases_on_easy_data():
    ds = make_dataset(per_class=8, t=12)
    result = train_similarity(ds, tiny_rnn(2), WarperConfig((4,)), 400, 5, seed=3)
    first = np.mean([x[1] for x in result.trace[:50]])
    assert result.trace[-1][2] < first


# --------------------------------------------------------- checkpointing


def test_model_checkpoint_reproduces_scores_bitwise(tmp_path):
    cfg = encoder_config("rnn", "desk")
    wcfg = warper_config("desk")
    store = build(cfg, wcfg, seed=4)
    rng = substream(13, "x")
    a, b = random_series(rng, 9), random_series(rng, 9)
    before = warped_similarity(a, b, store, cfg, wcfg)
    path = tmp_path / "model.ckpt"
    save_model(store, cfg, wcfg, path, extra={"measure": "neuralwarp-rnn"})
    loaded_store, loaded_cfg, loaded_wcfg, extra = load_model(path)
    assert extra["measure"] == "neuralwarp-rnn"
    assert loaded_cfg == cfg and loaded_wcfg == wcfg
    after = warped_similarity(a, b, loaded_store, loaded_cfg, loaded_wcfg)
    assert before.log_s == after.log_s and before.s == after.s


# ------------------------------------------------------- classification


def test_classifier_probabilities_normalize():
    cfg = tiny_rnn(2)
    store = init_params(cfg, None, 1, substream(14, "init"), head_classes=3)
    rng = substream(14, "x")
    for _ in range(10):
        probs = classifier_predict(random_series(rng, 7), store, cfg)
        assert probs.shape == (3,)
        assert abs(probs.sum() - 1.0) <= 1e-12
        assert np.all(probs >= 0.0)


def test_classifier_uniform_logits_uniform_simplex():
    cfg = tiny_rnn()
    store = init_params(cfg, None, 1, substream(15, "init"), head_classes=4)
    store.params["head/w"][...] = 0.0
    store.params["head/b"][...] = 0.0
    probs = classifier_predict(random_series(substream(15, "x"), 5), store, cfg)
    np.testing.assert_allclose(probs, 0.25, atol=1e-15)


def test_classifier_and_similarity_report_side_by_side():
    ds = make_dataset(per_class=8, t=12)
    from warpsim import split

    train_set, test_set = split(ds, 0.25, seed=7)
    clf = classifier_train(train_set, tiny_rnn(2), iterations=300, batch_size=12, lr=1e-3, seed=7)
    correct = sum(
        1
        for inst in test_set.instances
        if int(np.argmax(classifier_predict(inst, clf.store, tiny_rnn(2)))) == inst.label
    )
    clf_acc = correct / len(test_set)

    sim = train_similarity(train_set, tiny_rnn(2), WarperConfig((4,)), 300, 5, seed=7)
    wcfg = WarperConfig((4,))

    def measure(a, b):
        return warped_similarity(a, b, sim.store, tiny_rnn(2), wcfg).log_s

    sim_acc, _ = nn_classify(train_set, test_set, measure, "similarity")
    print(f"classifier accuracy {clf_acc:.3f} vs warped 1-NN accuracy {sim_acc:.3f}")
    assert 0.0 <= clf_acc <= 1.0 and 0.0 <= sim_acc <= 1.0
