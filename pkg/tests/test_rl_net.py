import numpy as np
import pytest

from microplan.errors import ModelFormatError
from microplan.rl.model_io import load_model, save_model
from microplan.rl.net import (
    Adam,
    LAYER_SIZES,
    QNet,
    huber_loss_and_grad,
    td_targets,
)


def test_default_architecture():
    net = QNet.create(seed=0)
    assert net.sizes == LAYER_SIZES == (16, 512, 256, 9)
    out = net.forward(np.zeros((3, 16)))
    assert out.shape == (3, 9)
    assert out.dtype == np.float64


def test_forward_matches_manual_small_net():
    net = QNet.create(seed=1, sizes=(2, 3, 2))
    x = np.array([[0.5, -1.0]])
    h = np.maximum(x @ net.weights[0] + net.biases[0], 0.0)
    expect = h @ net.weights[1] + net.biases[1]
    np.testing.assert_allclose(net.forward(x), expect)


def test_huber_values_and_grads():
    loss, grad = huber_loss_and_grad(np.array([0.0]), np.array([3.0]))
    # e = 3 beyond kappa=1: loss = 1*(3 - 0.5) = 2.5, |grad| saturates at 1
    assert loss[0] == pytest.approx(2.5)
    assert grad[0] == pytest.approx(-1.0)
    loss, grad = huber_loss_and_grad(np.array([0.0]), np.array([0.4]))
    assert loss[0] == pytest.approx(0.08)
    assert grad[0] == pytest.approx(-0.4)
    # symmetric in the sign of the error
    loss_n, grad_n = huber_loss_and_grad(np.array([0.4]), np.array([0.0]))
    assert loss_n[0] == pytest.approx(0.08)
    assert grad_n[0] == pytest.approx(0.4)
    with pytest.raises(ValueError):
        huber_loss_and_grad(np.zeros(1), np.zeros(1), kappa=0.0)


def test_huber_continuity_at_kappa():
    eps = 1e-9
    inner, _ = huber_loss_and_grad(np.array([0.0]), np.array([1.0 - eps]))
    outer, _ = huber_loss_and_grad(np.array([0.0]), np.array([1.0 + eps]))
    assert inner[0] == pytest.approx(outer[0], abs=1e-8)


def test_gradient_check_central_differences():
    """Analytic backprop vs finite differences, norm-based relative error."""
    rng = np.random.default_rng(3)
    net = QNet.create(seed=3, sizes=(4, 8, 5, 3))
    x = rng.normal(size=(6, 4))
    target = rng.normal(size=(6, 3))

    def loss_of():
        out = net.forward(x)
        loss, _ = huber_loss_and_grad(out, target)
        return float(loss.sum())

    out, cache = net.forward_cached(x)
    _, dout = huber_loss_and_grad(out, target)
    gw, gb = net.backward(cache, dout)
    analytic = gw + gb

    eps = 1e-6
    for p, g in zip(net.params(), analytic):
        numeric = np.empty_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            hi = loss_of()
            p[idx] = old - eps
            lo = loss_of()
            p[idx] = old
            numeric[idx] = (hi - lo) / (2.0 * eps)
            it.iternext()
        rel = np.linalg.norm(numeric - g) / max(
            np.linalg.norm(numeric) + np.linalg.norm(g), 1e-12
        )
        assert rel <= 1e-4


def test_td_targets():
    q_next = np.array([[1.0, 3.0], [5.0, 2.0], [0.0, 0.0]])
    y = td_targets([1.0, -1.0, 2.0], [0, 1, 0], q_next, gamma=0.5)
    np.testing.assert_allclose(y, [1.0 + 1.5, -1.0, 2.0])


def test_adam_single_step_matches_formula():
    net = QNet.create(seed=0, sizes=(2, 2))
    w0 = net.weights[0].copy()
    g = np.ones_like(w0)
    gb = np.zeros_like(net.biases[0])
    opt = Adam(net)
    opt.step([g, gb], lr=0.1)
    # bias-corrected first step: p -= lr * g / (|g| + eps)
    np.testing.assert_allclose(
        net.weights[0], w0 - 0.1 * g / (np.abs(g) + 1e-8), rtol=1e-6
    )
    np.testing.assert_array_equal(net.biases[0], gb)


def test_adam_decreases_quadratic_loss():
    net = QNet.create(seed=5, sizes=(3, 4, 2))
    opt = Adam(net)
    x = np.random.default_rng(0).normal(size=(16, 3))
    target = np.zeros((16, 2))
    losses = []
    for _ in range(200):
        out, cache = net.forward_cached(x)
        loss, dout = huber_loss_and_grad(out, target)
        losses.append(float(loss.sum()))
        gw, gb = net.backward(cache, dout)
        opt.step(gw + gb, lr=1e-2)
    assert losses[-1] < 0.1 * losses[0]


def test_copy_and_load_from_are_independent():
    a = QNet.create(seed=1, sizes=(3, 4, 2))
    b = a.copy()
    b.weights[0][0, 0] += 1.0
    assert a.weights[0][0, 0] != b.weights[0][0, 0]
    a.load_from(b)
    np.testing.assert_array_equal(a.weights[0], b.weights[0])


# --- checkpoint container ----------------------------------------------------


def test_model_roundtrip(tmp_path):
    net = QNet.create(seed=7, sizes=(4, 6, 3))
    p = tmp_path / "m.qnet"
    save_model(net, p, seed=7)
    back = load_model(p)
    assert back.sizes == (4, 6, 3)
    # float32 container: roundtrip to within single precision
    for w, w2 in zip(net.params(), back.params()):
        np.testing.assert_allclose(w2, w, atol=1e-6)


def test_model_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.qnet"
    p.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(ModelFormatError, match="magic"):
        load_model(p)


def test_model_rejects_corruption(tmp_path):
    net = QNet.create(seed=0, sizes=(4, 6, 3))
    p = tmp_path / "m.qnet"
    save_model(net, p)
    data = bytearray(p.read_bytes())
    data[len(data) // 2] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(ModelFormatError, match="checksum"):
        load_model(p)


def test_model_rejects_truncation(tmp_path):
    net = QNet.create(seed=0, sizes=(4, 6, 3))
    p = tmp_path / "m.qnet"
    save_model(net, p)
    p.write_bytes(p.read_bytes()[:-20])
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_model_rejects_future_version(tmp_path):
    import struct
    import zlib

    net = QNet.create(seed=0, sizes=(4, 6, 3))
    p = tmp_path / "m.qnet"
    save_model(net, p)
    data = bytearray(p.read_bytes())[:-4]
    struct.pack_into("<I", data, 4, 99)
    data += struct.pack("<I", zlib.crc32(bytes(data)) & 0xFFFFFFFF)
    p.write_bytes(bytes(data))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(p)
