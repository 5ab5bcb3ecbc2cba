import numpy as np
import pytest

from cdcit import nn
from cdcit.errors import NumericError, ShapeError


def small_net(dims, seed, activation="identity"):
    return nn.init_network(dims, activation, seed=seed)


def test_zero_network_maps_to_zero():
    net = nn.DenseNetwork(
        (3, 2, 2),
        [np.zeros((2, 3)), np.zeros((2, 2))],
        [np.zeros(2), np.zeros(2)],
    )
    out = nn.forward(net, np.array([1.0, -2.0, 3.0]))
    assert np.array_equal(out, np.zeros(2))


def test_identity_single_layer():
    net = nn.DenseNetwork((3, 3), [np.eye(3)], [np.zeros(3)])
    v = np.array([0.5, -1.5, 2.0])
    assert np.array_equal(nn.forward(net, v), v)


def test_hand_evaluated_221_net():
    # affine+ReLU stage: pre = (2*1 + 1*(-1) + 0, 1*1 - 1*(-1) + 0.5) = (1, 2.5)
    # both positive, so ReLU passes them; output = 0.5*1 - 1*2.5 + 0.1 = -1.9
    net = nn.DenseNetwork(
        (2, 2, 1),
        [np.array([[2.0, 1.0], [1.0, -1.0]]), np.array([[0.5, -1.0]])],
        [np.array([0.0, 0.5]), np.array([0.1])],
    )
    out = nn.forward(net, np.array([1.0, -1.0]))
    assert out.shape == (1,)
    assert out[0] == pytest.approx(-1.9, abs=1e-12)


def test_relu_clamps_negative_preactivations():
    net = nn.DenseNetwork(
        (1, 1, 1), [np.array([[1.0]]), np.array([[1.0]])], [np.zeros(1), np.zeros(1)]
    )
    assert nn.forward(net, np.array([-3.0]))[0] == 0.0


def test_forward_shape_error():
    net = small_net((3, 4, 2), seed=0)
    with pytest.raises(ShapeError):
        nn.forward(net, np.zeros(5))


def test_forward_batch_matches_rows():
    # BLAS may reorder sums between batch and single-row calls, so this is
    # an allclose check; bitwise determinism is same-call-shape only.
    net = small_net((4, 8, 3), seed=1)
    batch = np.random.default_rng(2).standard_normal((6, 4))
    out = nn.forward(net, batch)
    for i in range(6):
        assert np.allclose(out[i], nn.forward(net, batch[i]), rtol=1e-12, atol=1e-14)


def test_forward_deterministic_bitwise():
    net = small_net((5, 16, 16, 2), seed=3)
    x = np.random.default_rng(4).standard_normal(5)
    a = nn.forward(net, x)
    b = nn.forward(net, x)
    assert np.array_equal(a, b)


def test_backward_zero_upstream():
    net = small_net((3, 6, 2), seed=5)
    gw, gb = nn.backward(net, np.ones(3), np.zeros(2))
    assert all(np.all(g == 0) for g in gw)
    assert all(np.all(g == 0) for g in gb)


def test_backward_linear_net_gradient_is_input():
    net = nn.DenseNetwork((4, 1), [np.zeros((1, 4))], [np.zeros(1)])
    x = np.array([0.3, -1.2, 2.5, 0.0])
    gw, gb = nn.backward(net, x, np.ones(1))
    assert np.array_equal(gw[0][0], x)
    assert gb[0][0] == 1.0


def finite_difference_grads(net, x, upstream, h=1e-5):
    def objective():
        out = nn.forward(net, x)
        return float(np.sum(out * upstream))

    fd_w = [np.zeros_like(w) for w in net.weights]
    fd_b = [np.zeros_like(b) for b in net.biases]
    for arrs, outs in ((net.weights, fd_w), (net.biases, fd_b)):
        for layer, arr in enumerate(arrs):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                f_plus = objective()
                arr[idx] = orig - h
                f_minus = objective()
                arr[idx] = orig
                outs[layer][idx] = (f_plus - f_minus) / (2.0 * h)
    return fd_w, fd_b


@pytest.mark.parametrize("case", range(20))
def test_gradients_match_finite_differences(case):
    rng = np.random.default_rng(1000 + case)
    n_hidden = rng.integers(0, 4)
    dims = (int(rng.integers(1, 6)),
            *(int(rng.integers(2, 17)) for _ in range(n_hidden)),
            int(rng.integers(1, 4)))
    activation = "sigmoid" if case % 3 == 0 and dims[-1] >= 1 else "identity"
    net = small_net(dims, seed=2000 + case, activation=activation)
    x = rng.standard_normal(dims[0])
    upstream = rng.standard_normal(dims[-1])
    gw, gb = nn.backward(net, x, upstream)
    fd_w, fd_b = finite_difference_grads(net, x, upstream)
    for analytic, numeric in zip(gw + gb, fd_w + fd_b):
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        assert np.max(np.abs(analytic - numeric) / denom) <= 1e-4


def test_backward_batch_sums_rows():
    net = small_net((3, 5, 2), seed=6)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((4, 3))
    up = rng.standard_normal((4, 2))
    gw, gb = nn.backward(net, x, up)
    acc_w = [np.zeros_like(w) for w in net.weights]
    acc_b = [np.zeros_like(b) for b in net.biases]
    for i in range(4):
        gwi, gbi = nn.backward(net, x[i], up[i])
        for j in range(net.n_layers):
            acc_w[j] += gwi[j]
            acc_b[j] += gbi[j]
    for j in range(net.n_layers):
        assert np.allclose(gw[j], acc_w[j], atol=1e-12)
        assert np.allclose(gb[j], acc_b[j], atol=1e-12)


def test_adam_zero_gradient_keeps_parameters():
    net = small_net((2, 4, 1), seed=8)
    before = [w.copy() for w in net.weights]
    state = nn.init_adam(net, 0.05)
    nn.adam_step(net, state, ([np.zeros_like(w) for w in net.weights],
                              [np.zeros_like(b) for b in net.biases]))
    assert state.step_count == 1
    for w, old in zip(net.weights, before):
        assert np.array_equal(w, old)


def test_adam_descends_on_positive_gradient():
    net = nn.DenseNetwork((1, 1), [np.array([[2.0]])], [np.zeros(1)])
    state = nn.init_adam(net, 0.01)
    nn.adam_step(net, state, ([np.array([[1.5]])], [np.array([0.0])]))
    assert net.weights[0][0, 0] < 2.0


def adam_scalar_oracle(lr, steps, start=0.0, target=3.0,
                       beta1=0.9, beta2=0.999, eps=1e-8):
    """Independent scalar recursion for f(w) = (w - target)^2."""
    w, m, v = start, 0.0, 0.0
    for t in range(1, steps + 1):
        g = 2.0 * (w - target)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        w -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return w


def run_adam_on_scalar(lr, steps):
    net = nn.DenseNetwork((1, 1), [np.array([[0.0]])], [np.array([0.0])])
    state = nn.init_adam(net, lr)
    for _ in range(steps):
        w = net.weights[0][0, 0]
        g = 2.0 * (w - 3.0)
        nn.adam_step(net, state, ([np.array([[g]])], [np.array([0.0])]))
    return net.weights[0][0, 0]


def test_adam_matches_scalar_recursion_at_lr_001():
    # Adam's per-step movement is bounded by ~lr, so 200 steps at lr 0.01
    # cannot cross the distance 3; assert exact agreement with the oracle
    # recursion instead of an unreachable convergence radius.
    w = run_adam_on_scalar(0.01, 200)
    w_oracle = adam_scalar_oracle(0.01, 200)
    assert w == pytest.approx(w_oracle, abs=1e-12)
    assert abs(w - 3.0) < abs(0.0 - 3.0)


def test_adam_converges_at_lr_01():
    w = run_adam_on_scalar(0.1, 200)
    w_oracle = adam_scalar_oracle(0.1, 200)
    assert w == pytest.approx(w_oracle, abs=1e-12)
    assert abs(w_oracle - 3.0) < 0.1  # frozen from the oracle run
    assert abs(w - 3.0) < 0.1


def test_adam_rejects_non_finite_gradient():
    net = small_net((2, 2, 1), seed=9)
    state = nn.init_adam(net, 0.01)
    bad_w = [np.zeros_like(w) for w in net.weights]
    bad_w[1][0, 0] = np.nan
    with pytest.raises(NumericError, match="layer 1"):
        nn.adam_step(net, state, (bad_w, [np.zeros_like(b) for b in net.biases]))


def test_adam_rejects_wrong_shapes():
    net = small_net((2, 2, 1), seed=10)
    state = nn.init_adam(net, 0.01)
    with pytest.raises(ShapeError):
        nn.adam_step(net, state, ([np.zeros((3, 3)), np.zeros((1, 2))],
                                  [np.zeros(2), np.zeros(1)]))


def quadratic_loss_and_grads(net, anchor_w, anchor_b):
    loss = 0.0
    gw, gb = [], []
    for w, a in zip(net.weights, anchor_w):
        loss += float(np.sum((w - a) ** 2))
        gw.append(2.0 * (w - a))
    for b, a in zip(net.biases, anchor_b):
        loss += float(np.sum((b - a) ** 2))
        gb.append(2.0 * (b - a))
    return loss, (gw, gb)


def test_adam_loss_descent_on_quadratic():
    net = small_net((3, 8, 2), seed=11)
    rng = np.random.default_rng(12)
    anchor_w = [rng.standard_normal(w.shape) for w in net.weights]
    anchor_b = [rng.standard_normal(b.shape) for b in net.biases]
    state = nn.init_adam(net, 0.05)
    losses = [quadratic_loss_and_grads(net, anchor_w, anchor_b)[0]]
    for _ in range(50):
        _, grads = quadratic_loss_and_grads(net, anchor_w, anchor_b)
        nn.adam_step(net, state, grads)
        losses.append(quadratic_loss_and_grads(net, anchor_w, anchor_b)[0])
    for prev, cur in zip(losses, losses[1:]):
        assert cur <= prev * 1.10
    assert losses[-1] < losses[0]


def test_step_count_strictly_increases():
    net = small_net((2, 3, 1), seed=13)
    state = nn.init_adam(net, 0.01)
    zeros = ([np.zeros_like(w) for w in net.weights],
             [np.zeros_like(b) for b in net.biases])
    for expected in range(1, 6):
        nn.adam_step(net, state, zeros)
        assert state.step_count == expected


def test_parameters_stay_finite_during_training():
    rng = np.random.default_rng(14)
    net = small_net((4, 16, 16, 1), seed=15)
    state = nn.init_adam(net, 0.01)
    x = rng.standard_normal((32, 4))
    target = rng.standard_normal((32, 1))
    for _ in range(100):
        out, pres, acts = nn._forward_cached(net, x)
        grads = nn._backward_cached(net, pres, acts, 2.0 * (out - target))
        nn.adam_step(net, state, grads)
    for w in net.weights + net.biases:
        assert np.isfinite(w).all()


def test_serialization_round_trip():
    net = small_net((3, 7, 2), seed=16, activation="sigmoid")
    doc = nn.network_to_doc(net)
    assert set(doc) == {"layer_dims", "output_activation", "weights", "biases"}
    back = nn.network_from_doc(doc)
    assert back.layer_dims == net.layer_dims
    assert back.output_activation == "sigmoid"
    for a, b in zip(back.weights + back.biases, net.weights + net.biases):
        assert np.array_equal(a, b)
    x = np.random.default_rng(17).standard_normal(3)
    assert np.array_equal(nn.forward(back, x), nn.forward(net, x))


def test_init_network_bounds_and_zero_biases():
    net = small_net((10, 20, 5), seed=18)
    for w, fan_in, fan_out in zip(net.weights, (10, 20), (20, 5)):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.all(np.abs(w) <= limit)
    for b in net.biases:
        assert np.all(b == 0.0)
