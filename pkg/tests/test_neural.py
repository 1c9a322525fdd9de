import numpy as np
import pytest

from smle.neural import Adam, LstmLayer, Network, scaled_softmax


# ---------------------------------------------------------------------------
# LSTM forward behaviour
# ---------------------------------------------------------------------------


def zeroed(layer):
    layer.Wx[...] = 0.0
    layer.Wh[...] = 0.0
    layer.b[...] = 0.0
    return layer


def test_zero_params_zero_input_gives_zero_hidden():
    layer = zeroed(LstmLayer(3, 4))
    h, (h_f, c_f), _ = layer.forward(np.zeros((2, 5, 3), dtype=np.float32))
    assert np.all(h == 0) and np.all(h_f == 0) and np.all(c_f == 0)


def test_single_timestep_matches_scalar_recurrence():
    # hand-rolled oracle: evaluate the gate equations one scalar at a time
    layer = LstmLayer(1, 2, rng=np.random.default_rng(42), dtype=np.float64)
    x = np.array([[[0.7]]])
    h, (h_f, c_f), _ = layer.forward(x)

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    for unit in range(2):
        z = layer.Wx[:, 0] * 0.7 + layer.b  # h_prev = 0
        i = sig(z[unit])
        f = sig(z[2 + unit])
        g = np.tanh(z[4 + unit])
        o = sig(z[6 + unit])
        c = i * g  # c_prev = 0
        expect = o * np.tanh(c)
        assert h[0, 0, unit] == pytest.approx(expect, abs=1e-12)
        assert c_f[0, unit] == pytest.approx(c, abs=1e-12)


def test_stateful_split_equals_full_forward():
    layer = LstmLayer(3, 4, rng=np.random.default_rng(7))
    x = np.random.default_rng(8).standard_normal((2, 10, 3)).astype(np.float32)
    h_full, fin_full, _ = layer.forward(x)
    h_a, state, _ = layer.forward(x[:, :4])
    h_b, fin_b, _ = layer.forward(x[:, 4:], state=state)
    assert np.array_equal(np.concatenate([h_a, h_b], axis=1), h_full)
    assert np.array_equal(fin_b[0], fin_full[0])
    assert np.array_equal(fin_b[1], fin_full[1])


def test_input_dim_mismatch_raises():
    layer = LstmLayer(3, 4)
    with pytest.raises(ValueError, match="input dim"):
        layer.forward(np.zeros((1, 5, 2), dtype=np.float32))


def test_lstm_param_count_closed_form():
    layer = LstmLayer(513, 128)
    assert layer.param_count() == 4 * 128 * (513 + 128 + 1)


# ---------------------------------------------------------------------------
# scaled softmax
# ---------------------------------------------------------------------------


def test_symmetric_logits_split_evenly():
    assert np.allclose(scaled_softmax(np.array([0.0, 0.0]), 10.0), [0.5, 0.5])


def test_lambda_ten_saturates():
    p = scaled_softmax(np.array([1.0, 0.0]), 10.0)
    assert p[0] == pytest.approx(0.9999546021, abs=1e-9)
    assert p[1] == pytest.approx(4.5397868702e-05, abs=1e-12)


def test_lambda_one_is_plain_softmax():
    p = scaled_softmax(np.array([1.0, 0.0]), 1.0)
    assert p[0] == pytest.approx(0.7310585786, abs=1e-9)
    assert p[1] == pytest.approx(0.2689414214, abs=1e-9)


def test_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(9)
    logits = rng.standard_normal((64, 4))
    p = scaled_softmax(logits, 3.5)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
    shifted = scaled_softmax(logits + 123.4, 3.5)
    assert np.allclose(p, shifted, atol=1e-9)


def test_argmax_invariant_to_lambda():
    rng = np.random.default_rng(10)
    logits = rng.standard_normal((500, 5))
    base = np.argmax(logits, axis=1)
    for lam in (0.01, 1.0, 10.0, 250.0):
        assert np.array_equal(np.argmax(scaled_softmax(logits, lam), axis=1), base)


def test_two_way_gap_of_one_reaches_9999():
    rng = np.random.default_rng(11)
    for _ in range(200):
        lo = rng.uniform(-5, 5)
        p = scaled_softmax(np.array([lo + rng.uniform(1.0, 4.0), lo]), 10.0)
        assert p.max() >= 0.9999


def test_nonpositive_lambda_rejected():
    with pytest.raises(ValueError, match="lam"):
        scaled_softmax(np.array([1.0, 0.0]), 0.0)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


def test_zero_gradient_leaves_params_unchanged():
    net = Network(4, [3], 2, "sigmoid", rng=np.random.default_rng(1))
    before = net.snapshot()
    adam = Adam(net.param_items())
    adam.step(net.param_items(), {k: np.zeros_like(v) for k, v in net.param_items()})
    assert adam.t == 1
    for name, arr in net.param_items():
        assert np.array_equal(arr, before[name])


def test_first_step_moves_by_lr_times_sign():
    # closed form: mhat/(sqrt(vhat)+eps) == g/(|g|+eps) on step one
    w = np.array([1.0, -2.0], dtype=np.float64)
    params = [("w", w)]
    adam = Adam(params, lr=0.001)
    adam.step(params, {"w": np.array([0.3, -0.7])})
    assert w[0] == pytest.approx(1.0 - 0.001, abs=1e-9)
    assert w[1] == pytest.approx(-2.0 + 0.001, abs=1e-9)


def test_adam_updates_are_bit_reproducible():
    def run():
        net = Network(4, [3], 2, "sigmoid", rng=np.random.default_rng(3))
        adam = Adam(net.param_items())
        grng = np.random.default_rng(4)
        for _ in range(5):
            grads = {k: grng.standard_normal(v.shape).astype(v.dtype)
                     for k, v in net.param_items()}
            adam.step(net.param_items(), grads)
        return net.snapshot()

    a, b = run(), run()
    for name in a:
        assert np.array_equal(a[name], b[name])


def test_adam_shape_mismatch_raises():
    net = Network(4, [3], 2, "sigmoid")
    adam = Adam(net.param_items())
    grads = {k: np.zeros_like(v) for k, v in net.param_items()}
    grads["head.W"] = np.zeros((1, 1), dtype=np.float32)
    with pytest.raises(ValueError, match="shape"):
        adam.step(net.param_items(), grads)


# ---------------------------------------------------------------------------
# parameter and MAC accounting
# ---------------------------------------------------------------------------


def test_gating_network_param_count():
    net = Network(513, [128, 128], 4, "scaled_softmax", lam=10.0)
    assert net.param_count() == 460804


def test_dense_only_network_param_count():
    net = Network(2, [], 3, "sigmoid")
    assert net.param_count() == 9


def test_specialist_512x2_param_count():
    net = Network(513, [512, 512], 513, "sigmoid")
    expect = 4 * 512 * (513 + 512 + 1) + 4 * 512 * (512 + 512 + 1) + (512 * 513 + 513)
    assert net.param_count() == expect == 4463617


def test_macs_count_weight_multiplies():
    net = Network(513, [16, 16], 513, "sigmoid")
    expect = 4 * 16 * (513 + 16) + 4 * 16 * (16 + 16) + 16 * 513
    assert net.macs_per_frame() == expect


def test_network_rejects_unknown_activation():
    with pytest.raises(ValueError, match="activation"):
        Network(4, [3], 2, "relu")


def test_scaled_softmax_head_requires_lambda():
    with pytest.raises(ValueError, match="lam"):
        Network(4, [3], 2, "scaled_softmax")
