import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mse_loop
from raresub import autoencoder as ae
from raresub.errors import InvalidDims, ShapeMismatch, TooFewSamples


def tiny(seed=0, d=6, hidden=(5, 4), latent=3, **kw):
    cfg = ae.AeConfig(input_dim=d, latent_dim=latent, hidden_override=hidden, seed=seed, **kw)
    return ae.build(cfg)


def check_instance(seed, n=5, d=6, hidden=(5, 4), latent=3):
    """Tiny network with jittered biases.

    Zero biases plus a dead ReLU row put later pre-activations exactly on the
    kink at 0, where central differences are meaningless.
    """
    m = tiny(seed=seed, d=d, hidden=hidden, latent=latent)
    r = np.random.default_rng([seed, 7])
    for b in m.biases:
        b[...] = r.uniform(-0.1, 0.1, size=b.shape)
    return m, r.normal(size=(n, d))


@pytest.mark.parametrize("d, h1, h2", [(2000, 1000, 500), (500, 256, 128), (4000, 1024, 512), (2001, 1000, 500)])
def test_hidden_sizes(d, h1, h2):
    assert ae.hidden_sizes(d) == (h1, h2)


def test_layer_dims_are_symmetric():
    dims = ae.AeConfig(input_dim=2000).layer_dims
    assert dims == [(2000, 1000), (1000, 500), (500, 128), (128, 500), (500, 1000), (1000, 2000)]


def test_build_is_deterministic():
    a, b = tiny(seed=3), tiny(seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.params(), b.params()))
    c = tiny(seed=4)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_glorot_bounds():
    m = tiny(seed=1, d=40, hidden=(30, 20), latent=10)
    for w in m.weights:
        limit = np.sqrt(6.0 / sum(w.shape))
        assert np.abs(w).max() <= limit
    assert all(np.all(b == 0) for b in m.biases)


def test_invalid_dims():
    with pytest.raises(InvalidDims):
        ae.build(ae.AeConfig(input_dim=10, latent_dim=8, hidden_override=(6, 4)))
    with pytest.raises(InvalidDims):
        ae.build(ae.AeConfig(input_dim=10, latent_dim=2, hidden_override=(6, 4), dropout_p=1.0))


def test_mse_hand_values(rng):
    assert ae.mse([[1.0, 0.0]], [[0.0, 0.0]]) == 1.0
    x = rng.normal(size=(5, 4))
    assert ae.mse(x, x) == 0.0
    y = rng.normal(size=(5, 4))
    assert ae.mse(x, y) == pytest.approx(mse_loop(x.tolist(), y.tolist()), rel=1e-13)
    assert ae.mse_per_entry(x, y) == pytest.approx(mse_loop(x.tolist(), y.tolist()) / 4, rel=1e-13)


def test_encode_shape_and_batch_independence(rng):
    m = tiny(seed=2)
    x = rng.normal(size=(7, 6))
    z = ae.encode(m, x)
    assert z.shape == (7, 3)
    assert np.array_equal(z, ae.encode(m, x))
    assert np.allclose(ae.encode(m, x[3:4]), z[3:4], atol=1e-12, rtol=0)


def test_encode_shape_mismatch(rng):
    with pytest.raises(ShapeMismatch):
        ae.encode(tiny(), rng.normal(size=(3, 5)))


def test_zero_model_zero_input_has_zero_data_gradient():
    m = tiny(seed=0)
    for p in m.params():
        p[...] = 0.0
    _, mse, gw, gb = ae.objective_and_grads(m, np.zeros((4, 6)), weight_decay=0.0)
    assert mse == 0.0
    assert all(np.all(g == 0) for g in [*gw, *gb])


def test_weight_decay_gradient_is_lambda_theta():
    # zero input and zero output weights: the data term vanishes
    m = tiny(seed=5)
    m.weights[-1][...] = 0.0
    lam = 0.3
    _, _, gw0, gb0 = ae.objective_and_grads(m, np.zeros((3, 6)), weight_decay=0.0)
    _, _, gw, gb = ae.objective_and_grads(m, np.zeros((3, 6)), weight_decay=lam)
    for g, g0, p in zip([*gw, *gb], [*gw0, *gb0], m.params()):
        assert np.allclose(g - g0, lam * p, atol=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_check_tiny_networks(seed):
    m, x = check_instance(seed)
    assert ae.gradient_check(m, x, weight_decay=1e-5) < 1e-5


def test_gradient_check_formula_sized_network_sampled():
    # the sizing rule clamps H1=256, H2=128; latent kept small so the check is quick
    cfg = ae.AeConfig(input_dim=20, latent_dim=8, seed=0)
    m = ae.build(cfg)
    x = np.random.default_rng(1).normal(size=(6, 20))
    assert ae.gradient_check(m, x, max_entries=400, seed=2) < 1e-5


def test_dropout_zero_train_equals_eval(rng):
    m = tiny(seed=1)
    x = rng.normal(size=(4, 6))
    out_train, _ = ae._forward(m, x, masks=ae._dropout_masks(rng, 4, 5, 0.0))
    assert np.allclose(out_train, ae.reconstruct(m, x), atol=1e-12)


def test_split_indices():
    tr, va = ae.split_indices(100, 0.15, 0)
    assert len(va) == 15 and len(tr) == 85
    assert sorted([*tr, *va]) == list(range(100))
    tr2, va2 = ae.split_indices(100, 0.15, 0)
    assert np.array_equal(va, va2)
    with pytest.raises(TooFewSamples):
        ae.split_indices(5, 0.15, 0)


def _train_tiny(x, seed=0, **kw):
    cfg = ae.AeConfig(input_dim=x.shape[1], latent_dim=3, hidden_override=(8, 6), seed=seed, **kw)
    return ae.train(ae.build(cfg), x, cfg)


def test_zero_input_learns_zero_map():
    model, hist = _train_tiny(np.zeros((40, 6)), max_epochs=50, learning_rate=1e-2, patience=50)
    assert min(hist.train_mse) < 1e-4


def test_training_improves_and_stops_early(rng):
    x = rng.normal(size=(60, 6))
    model, hist = _train_tiny(x, max_epochs=300, patience=5)
    assert hist.val_mse[0] > hist.best_val_mse
    assert hist.stopped_epoch <= hist.best_epoch + 5
    assert hist.stopped_epoch == len(hist.val_mse)
    # returned model is the best-validation one
    xv = x[hist.val_indices]
    assert ae.mse_per_entry(xv, ae.reconstruct(model, xv)) == pytest.approx(hist.best_val_mse, rel=1e-12)


def test_training_is_deterministic(rng):
    x = rng.normal(size=(40, 6))
    m1, h1 = _train_tiny(x, seed=7, max_epochs=30)
    m2, h2 = _train_tiny(x, seed=7, max_epochs=30)
    assert h1.val_mse == h2.val_mse and h1.train_mse == h2.train_mse
    assert all(np.array_equal(a, b) for a, b in zip(m1.params(), m2.params()))


def test_history_conventions(rng, tmp_path):
    x = rng.normal(size=(40, 6))
    _, h = _train_tiny(x, max_epochs=5)
    assert h.val_mse_per_sample == [v * 6 for v in h.val_mse]
    h.to_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0].startswith("epoch,train_mse,val_mse") and len(lines) == 1 + len(h.val_mse)


def test_checkpoint_round_trip(tmp_path):
    m = tiny(seed=9)
    m.save(tmp_path / "m.json")
    back = ae.AutoencoderModel.load(tmp_path / "m.json")
    assert back.config == m.config
    assert all(np.array_equal(a, b) for a, b in zip(m.params(), back.params()))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_gradient_check_property(seed, n):
    m, x = check_instance(seed, n=n)
    assert ae.gradient_check(m, x, weight_decay=1e-5) < 1e-5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_objective_is_mse_plus_penalty(seed):
    m = tiny(seed=seed)
    x = np.random.default_rng(seed).normal(size=(3, 6))
    obj, mse, _, _ = ae.objective_and_grads(m, x, weight_decay=1e-3)
    pen = 0.5e-3 * sum(float((p * p).sum()) for p in m.params())
    assert obj == pytest.approx(mse + pen, rel=1e-12)
    assert ae.objective(m, x, 1e-3) == pytest.approx(obj, rel=1e-12)
