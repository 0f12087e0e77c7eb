import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mdforge.nn import (
    BatchNorm,
    CheckpointError,
    Conv,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    ModelSpec,
    Network,
    ReLU,
    Softmax,
    TrainConfig,
    gradient_check,
    load_checkpoint,
    predict,
    reference_spec,
    save_checkpoint,
    train,
)
from mdforge.nn import layers as L
from mdforge.nn.train import TrainHistory, images_to_batch

LINEAR = ModelSpec(4, (Flatten(), Dense(3), Softmax()))
TWO_DENSE = ModelSpec(4, (Flatten(), Dense(5), Dense(3), Softmax()))
SMALL_CONV = ModelSpec(6, (Conv(2, 3), ReLU(), Flatten(), Dense(3), Softmax()))


def toy_batch(n=6, size=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, 1, size, size)), rng.integers(0, 3, n)


def test_softmax_uniform():
    np.testing.assert_allclose(L.softmax(np.zeros((1, 3))), [[1 / 3] * 3])
    p = L.softmax(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.isfinite(p).all() and p[0, 0] == pytest.approx(1.0)


def test_conv_identity_kernel():
    x = np.random.default_rng(0).standard_normal((2, 1, 5, 5))
    out, _ = L.conv_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1), 1, 0)
    np.testing.assert_array_equal(out, x)


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((1, 2, 5, 5))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    out, _ = L.conv_forward(x, w, b, 2, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    for f in range(3):
        for i in range(out.shape[2]):
            for j in range(out.shape[3]):
                ref = np.sum(xp[0, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3] * w[f]) + b[f]
                assert out[0, f, i, j] == pytest.approx(ref)


def test_maxpool_example_and_routing():
    x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    out, cache = L.maxpool_forward(x, 2, 2)
    assert out.tolist() == [[[[4.0]]]]
    dx = L.maxpool_backward(np.ones_like(out), cache, 2, 2)
    assert dx.tolist() == [[[[0.0, 0.0], [0.0, 1.0]]]]


@given(st.integers(1, 16), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2))
def test_conv_output_size_matches_enumeration(size, k, s, p):
    if size + 2 * p < k:
        return
    starts = range(0, size + 2 * p - k + 1, s)
    assert L.conv_output_size(size, k, s, p) == len(starts)


def test_cross_entropy_gradient_example():
    net = Network(LINEAR, dtype=np.float64)
    net.params[1]["w"][...] = 0.0
    _, cache = net.forward(np.zeros((1, 1, 4, 4)), training=True)
    grads = net.backward(cache, np.array([0]))
    np.testing.assert_allclose(grads[1]["b"], [-2 / 3, 1 / 3, 1 / 3])
    assert net.loss(cache.probabilities, [0]) == pytest.approx(np.log(3))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 5))
def test_output_bias_gradient_sums_to_zero(seed, n):
    x, y = toy_batch(n, seed=seed)
    net = Network(TWO_DENSE, seed=seed, dtype=np.float64)
    _, cache = net.forward(x, training=True)
    assert abs(net.backward(cache, y)[2]["b"].sum()) < 1e-12


def test_finite_differences_two_dense():
    x, y = toy_batch()
    assert gradient_check(TWO_DENSE, x, y, step=1e-3) < 1e-3


def test_gradient_check_linear():
    x, y = toy_batch()
    assert gradient_check(LINEAR, x, y) < 1e-6


def test_gradient_check_conv_relu_dense():
    x, y = toy_batch(size=6, seed=2)
    assert gradient_check(SMALL_CONV, x, y) < 1e-3


def test_gradient_check_with_batchnorm_and_pool():
    spec = ModelSpec(6, (Conv(2, 3, 1, 1), BatchNorm(), MaxPool(2, 2), Flatten(), Dense(3), Softmax()))
    x, y = toy_batch(n=4, size=6, seed=3)
    assert gradient_check(spec, x, y) < 1e-3


def test_gradient_check_treats_dropout_as_identity():
    x, y = toy_batch()
    with_drop = ModelSpec(4, (Flatten(), Dropout(0.5), Dense(5), Dropout(0.3), Dense(3), Softmax()))
    assert gradient_check(with_drop, x, y) == pytest.approx(gradient_check(TWO_DENSE, x, y), abs=1e-12)


def test_batchnorm_training_statistics():
    rng = np.random.default_rng(0)
    x = 3.0 * rng.standard_normal((8, 4, 5, 5)) + 7.0
    layer = BatchNorm()
    out, _ = L.batchnorm_forward(x, np.ones(4), np.zeros(4), np.zeros(4), np.ones(4), layer, True)
    assert np.abs(out.mean(axis=(0, 2, 3))).max() < 1e-5
    assert np.abs(out.var(axis=(0, 2, 3)) - 1).max() < 1e-4


def test_batchnorm_running_average():
    x = np.full((4, 2), 10.0)
    rm, rv = np.zeros(2), np.ones(2)
    L.batchnorm_forward(x, np.ones(2), np.zeros(2), rm, rv, BatchNorm(), True)
    np.testing.assert_allclose(rm, [1.0, 1.0])
    np.testing.assert_allclose(rv, [0.9, 0.9])


def test_dropout_inference_identity_and_expectation():
    drop = ModelSpec(4, (Flatten(), Dropout(0.5), Dense(3), Softmax()))
    plain = ModelSpec(4, (Flatten(), Dense(3), Softmax()))
    x, _ = toy_batch()
    a, _ = Network(drop, seed=5).forward(x)
    b, _ = Network(plain, seed=5).forward(x)
    np.testing.assert_array_equal(a, b)
    net = Network(ModelSpec(64, (Flatten(), Dropout(0.5), Dense(2), Softmax())), dtype=np.float64)
    _, cache = net.forward(np.ones((50, 1, 64, 64)), training=True, rng=np.random.default_rng(0))
    mask = cache.entries[1]
    assert set(np.unique(mask)) == {0.0, 2.0}
    assert mask.mean() == pytest.approx(1.0, rel=0.02)


@settings(max_examples=30)
@given(arrays(np.float64, (4, 5), elements=st.floats(-50, 50)), st.floats(0.01, 100))
def test_softmax_properties(logits, alpha):
    p = L.softmax(logits)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    scaled = L.softmax(alpha * logits)
    # ties make argmax ambiguous; compare only rows with a clear winner
    top2 = np.sort(logits, axis=1)[:, -2:]
    clear = top2[:, 1] - top2[:, 0] > 1e-6
    np.testing.assert_array_equal(p.argmax(1)[clear], scaled.argmax(1)[clear])


def halves_dataset(n_per_class=8, size=8):
    rng = np.random.default_rng(0)
    x = np.zeros((2 * n_per_class, 1, size, size))
    x[:n_per_class, 0, :, : size // 2] = 1.0
    x[n_per_class:, 0, :, size // 2 :] = 1.0
    x += 0.05 * rng.standard_normal(x.shape)
    return x, np.repeat([0, 1], n_per_class)


def test_full_batch_sgd_loss_decreases():
    x, y = halves_dataset()
    spec = ModelSpec(8, (Flatten(), Dense(2), Softmax()))
    cfg = TrainConfig(epochs=10, batch_size=len(y), learning_rate=0.05, optimizer="sgd")
    _, history = train(spec, (x, y), cfg)
    losses = history.column("train_loss")
    assert len(losses) == 10
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_memorizes_small_set():
    rng = np.random.default_rng(4)
    x = rng.random((8, 1, 12, 12))
    y = np.array([0, 1, 2, 0, 1, 2, 0, 1])
    spec = ModelSpec(12, (Conv(4, 3), ReLU(), MaxPool(2, 2), Flatten(), Dense(3), Softmax()))
    net, history = train(spec, (x, y), TrainConfig(epochs=200, batch_size=8, learning_rate=1e-2))
    assert history.records[-1].train_acc == 1.0
    assert np.array_equal(net.predict_proba(x).argmax(1), y)


def test_training_is_deterministic(tmp_path):
    x, y = halves_dataset(4)
    spec = ModelSpec(8, (Flatten(), Dense(6), ReLU(), Dropout(0.5), Dense(2), Softmax()))
    cfg = TrainConfig(epochs=3, batch_size=3, seed=9)
    _, h1 = train(spec, (x, y), cfg, val_data=(x, y))
    _, h2 = train(spec, (x, y), cfg, val_data=(x, y))
    h1.to_csv(tmp_path / "a.csv")
    h2.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    _, h3 = train(spec, (x, y), TrainConfig(epochs=3, batch_size=3, seed=10), val_data=(x, y))
    assert h3.column("train_loss") != h1.column("train_loss")


def test_history_csv_roundtrip(tmp_path):
    x, y = halves_dataset(3)
    spec = ModelSpec(8, (Flatten(), Dense(2), Softmax()))
    _, h = train(spec, (x, y), TrainConfig(epochs=2))
    path = tmp_path / "h.csv"
    h.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    assert len(lines) == 3
    back = TrainHistory.from_csv(path)
    assert back.column("epoch") == [1, 2]
    assert back.column("train_loss") == pytest.approx(h.column("train_loss"), abs=1e-6)


def test_train_argument_errors():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        train(LINEAR, (np.zeros((0, 1, 4, 4)), np.zeros(0, int)))


def test_reference_model_shapes():
    spec = reference_spec()
    assert spec.shapes()[-1] == (3,)
    net = Network(spec)
    x = np.random.default_rng(0).random((2, 1, 64, 64))
    probs = net.predict_proba(x)
    assert probs.shape == (2, 3)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-5)
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 1, 32, 32)))


def test_bad_architectures():
    with pytest.raises(ValueError):
        ModelSpec(4, (Dense(3), Softmax()))
    with pytest.raises(ValueError):
        ModelSpec(4, (Flatten(), Dense(3)))
    with pytest.raises(ValueError):
        ModelSpec(2, (Conv(2, 5), Flatten(), Dense(3), Softmax()))
    with pytest.raises(ValueError):
        Dropout(1.0)


def test_descriptor_roundtrip():
    spec = reference_spec()
    assert ModelSpec.parse(spec.describe()) == spec
    assert spec.describe().splitlines()[0] == "input 64 1"


def test_predict_resizes_any_image():
    net = Network(reference_spec())
    img = np.random.default_rng(0).integers(0, 256, (96, 96), dtype=np.uint8)
    cls, probs = predict(net, img)
    assert cls == int(np.argmax(probs))
    assert probs.sum() == pytest.approx(1.0, abs=1e-5)
    batch = images_to_batch([img], 64)
    assert batch.shape == (1, 1, 64, 64) and batch.max() <= 1.0


def test_checkpoint_roundtrip_and_errors(tmp_path):
    spec = reference_spec()
    net = Network(spec, seed=3)
    net.params[1]["running_mean"][...] = 0.25
    path = tmp_path / "m.mdnn"
    save_checkpoint(path, net)
    blob = path.read_bytes()
    assert blob[:8] == b"MDNN0001"
    back = load_checkpoint(path, expected_spec=spec)
    x = np.random.default_rng(1).random((3, 1, 64, 64))
    np.testing.assert_array_equal(back.predict_proba(x), net.predict_proba(x))
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_spec=reference_spec(n_classes=4))
    for name, data in (("magic", b"XXXX" + blob[4:]), ("short", blob[:-4]), ("long", blob + b"\0")):
        (tmp_path / name).write_bytes(data)
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / name)
