import numpy as np
import pytest
from hypothesis import given, strategies as st

from furnacephase import nncore
from tests.conftest import rel_error


def naive_conv(x, k, b):
    w, c = x.shape
    ks, _, f = k.shape
    out = np.zeros((w - ks + 1, f))
    for t in range(w - ks + 1):
        for ff in range(f):
            acc = b[ff]
            for j in range(ks):
                for ch in range(c):
                    acc += x[t + j, ch] * k[j, ch, ff]
            out[t, ff] = acc
    return out


class TestConv:
    def test_difference_kernel(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        k = np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1)
        out = nncore.conv1d_forward(x, k, np.zeros(1))
        assert out[:, 0].tolist() == [-2.0, -2.0]
        np.testing.assert_array_equal(out, naive_conv(x, k, np.zeros(1)))

    def test_centre_tap(self):
        x = np.arange(6.0)[:, None]
        k = np.array([0.0, 1.0, 0.0]).reshape(3, 1, 1)
        out = nncore.conv1d_forward(x, k, np.zeros(1))
        assert out[:, 0].tolist() == x[1:-1, 0].tolist()

    def test_zero_input_gives_bias(self):
        b = np.array([0.5, -2.0])
        out = nncore.conv1d_forward(np.zeros((5, 3)), np.ones((3, 3, 2)), b)
        assert np.all(out == b)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_naive(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(9, 3))
        k = rng.normal(size=(4, 3, 5))
        b = rng.normal(size=5)
        np.testing.assert_allclose(nncore.conv1d_forward(x, k, b), naive_conv(x, k, b),
                                   rtol=1e-13, atol=1e-13)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 8, 2))
        k = rng.normal(size=(3, 2, 3))
        b = rng.normal(size=3)
        batch = nncore.conv1d_forward(x, k, b)
        for i in range(4):
            np.testing.assert_allclose(batch[i], nncore.conv1d_forward(x[i], k, b), rtol=1e-14)

    def test_linear_in_input(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(2, 10, 2))
        k = rng.normal(size=(3, 2, 4))
        z = np.zeros(4)
        a, c = 1.7, -0.4
        lhs = nncore.conv1d_forward(a * x + c * y, k, z)
        rhs = a * nncore.conv1d_forward(x, k, z) + c * nncore.conv1d_forward(y, k, z)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            nncore.conv1d_forward(np.zeros((5, 2)), np.zeros((3, 1, 1)), np.zeros(1))
        with pytest.raises(ValueError):
            nncore.conv1d_forward(np.zeros((2, 1)), np.zeros((3, 1, 1)), np.zeros(1))
        with pytest.raises(ValueError):
            nncore.conv1d_forward(np.zeros((5, 1)), np.zeros((3, 1, 2)), np.zeros(1))

    def test_backward_zero_upstream(self):
        rng = np.random.default_rng(0)
        x, k = rng.normal(size=(6, 2)), rng.normal(size=(3, 2, 4))
        gx, gk, gb = nncore.conv1d_backward(x, k, np.zeros((4, 4)))
        assert not gx.any() and not gk.any() and not gb.any()

    def test_backward_single_tap(self):
        x = np.arange(5.0)[:, None]
        k = np.full((1, 1, 1), 2.5)
        g = np.array([1.0, -1.0, 0.5, 3.0, 2.0])[:, None]
        gx, _, _ = nncore.conv1d_backward(x, k, g)
        np.testing.assert_array_equal(gx, 2.5 * g)

    @pytest.mark.parametrize("seed", range(20))
    def test_backward_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        b, w, c, ks, f = rng.integers(1, 4), rng.integers(3, 9), rng.integers(1, 4), \
            rng.integers(1, 4), rng.integers(1, 5)
        x = rng.normal(size=(b, w, c))
        k = rng.normal(size=(ks, c, f))
        bias = rng.normal(size=f)
        up = rng.normal(size=(b, w - ks + 1, f))
        gx, gk, gb = nncore.conv1d_backward(x, k, up)
        loss = lambda xx, kk, bb: float(np.sum(nncore.conv1d_forward(xx, kk, bb) * up))
        assert rel_error(gx, nncore.finite_diff_gradient(lambda v: loss(v, k, bias), x)) < 1e-5
        assert rel_error(gk, nncore.finite_diff_gradient(lambda v: loss(x, v, bias), k)) < 1e-5
        assert rel_error(gb, nncore.finite_diff_gradient(lambda v: loss(x, k, v), bias)) < 1e-5


class TestMaxPool:
    def test_basic(self):
        out, idx = nncore.maxpool1d_forward(np.array([1.0, 3, 2, 5])[:, None], 2)
        assert out[:, 0].tolist() == [3.0, 5.0]
        assert idx[:, 0].tolist() == [1, 3]

    def test_pool_one_is_identity(self):
        x = np.random.default_rng(0).normal(size=(7, 3))
        out, idx = nncore.maxpool1d_forward(x, 1)
        assert np.array_equal(out, x)

    def test_tie_takes_earliest(self):
        out, idx = nncore.maxpool1d_forward(np.array([[2.0], [2.0]]), 2)
        assert out[0, 0] == 2.0 and idx[0, 0] == 0

    def test_remainder_dropped(self):
        out, _ = nncore.maxpool1d_forward(np.arange(7.0)[:, None], 3)
        assert out[:, 0].tolist() == [2.0, 5.0]

    def test_too_short(self):
        with pytest.raises(ValueError):
            nncore.maxpool1d_forward(np.zeros((1, 1)), 2)

    @given(st.integers(0, 10_000))
    def test_backward_routes_to_argmax(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 11, 3))
        out, idx = nncore.maxpool1d_forward(x, 3)
        g = rng.normal(size=out.shape)
        gx = nncore.maxpool1d_backward(g, idx, 11)
        assert np.isclose(gx.sum(), g.sum(), rtol=1e-12, atol=1e-12)
        mask = np.zeros_like(x, dtype=bool)
        for b in range(2):
            for t in range(out.shape[1]):
                for f in range(3):
                    mask[b, idx[b, t, f], f] = True
        assert not gx[~mask].any()

    @pytest.mark.parametrize("seed", range(20))
    def test_backward_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        x = rng.normal(size=(2, 9, 3))
        pool = int(rng.integers(1, 4))
        out, idx = nncore.maxpool1d_forward(x, pool)
        up = rng.normal(size=out.shape)
        gx = nncore.maxpool1d_backward(up, idx, 9)
        num = nncore.finite_diff_gradient(
            lambda v: float(np.sum(nncore.maxpool1d_forward(v, pool)[0] * up)), x)
        assert rel_error(gx, num) < 1e-5


class TestDenseAndActivations:
    def test_identity_dense(self):
        x = np.array([1.0, -2.0, 3.0])
        assert nncore.dense_forward(x, np.eye(3), np.zeros(3)).tolist() == x.tolist()

    def test_relu(self):
        x = np.array([-1.0, 0.0, 2.0])
        assert nncore.relu(x).tolist() == [0.0, 0.0, 2.0]
        assert nncore.relu_backward(x, np.ones(3)).tolist() == [0.0, 0.0, 1.0]

    def test_tanh_gradient_at_zero(self):
        y = nncore.tanh(np.zeros(1))
        assert nncore.tanh_backward(y, np.ones(1))[0] == 1.0

    def test_dense_shape_error(self):
        with pytest.raises(ValueError):
            nncore.dense_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))

    @pytest.mark.parametrize("seed", range(20))
    def test_dense_finite_differences(self, seed):
        rng = np.random.default_rng(200 + seed)
        n_in, n_out = rng.integers(1, 7, size=2)
        x = rng.normal(size=(3, n_in))
        w = rng.normal(size=(n_out, n_in))
        b = rng.normal(size=n_out)
        up = rng.normal(size=(3, n_out))
        gx, gw, gb = nncore.dense_backward(x, w, up)
        loss = lambda xx, ww, bb: float(np.sum(nncore.dense_forward(xx, ww, bb) * up))
        assert rel_error(gx, nncore.finite_diff_gradient(lambda v: loss(v, w, b), x)) < 1e-5
        assert rel_error(gw, nncore.finite_diff_gradient(lambda v: loss(x, v, b), w)) < 1e-5
        assert rel_error(gb, nncore.finite_diff_gradient(lambda v: loss(x, w, v), b)) < 1e-5

    @pytest.mark.parametrize("seed", range(20))
    def test_activation_finite_differences(self, seed):
        rng = np.random.default_rng(300 + seed)
        x = rng.normal(size=12)
        x = x[np.abs(x) > 1e-3]  # keep away from the relu kink
        up = rng.normal(size=x.shape)
        y = nncore.tanh(x)
        num_t = nncore.finite_diff_gradient(lambda v: float(np.sum(np.tanh(v) * up)), x)
        num_r = nncore.finite_diff_gradient(lambda v: float(np.sum(nncore.relu(v) * up)), x)
        assert rel_error(nncore.tanh_backward(y, up), num_t) < 1e-5
        assert rel_error(nncore.relu_backward(x, up), num_r) < 1e-5


class TestLoss:
    def test_zero(self):
        loss, g = nncore.mse_loss(np.array([0.3, -0.2]), np.array([0.3, -0.2]))
        assert loss == 0.0 and not g.any()

    def test_unit(self):
        loss, g = nncore.mse_loss(np.array([1.0]), np.array([0.0]))
        assert loss == 1.0 and g.tolist() == [2.0]

    def test_errors(self):
        with pytest.raises(ValueError):
            nncore.mse_loss(np.zeros(2), np.zeros(3))
        with pytest.raises(ValueError):
            nncore.mse_loss(np.zeros(0), np.zeros(0))

    @pytest.mark.parametrize("seed", range(10))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        p, t = rng.normal(size=(2, 8))
        _, g = nncore.mse_loss(p, t)
        num = nncore.finite_diff_gradient(lambda v: nncore.mse_loss(v, t)[0], p)
        assert rel_error(g, num) < 1e-6


class TestAdam:
    def test_zero_gradient_first_step(self):
        p = {"w": np.array([1.0, -2.0])}
        nncore.adam_step(p, {"w": np.zeros(2)}, nncore.AdamState(), lr=0.1)
        assert p["w"].tolist() == [1.0, -2.0]

    def test_constant_gradient_scalar_oracle(self):
        lr, b1, b2, eps, g = 1e-2, 0.9, 0.999, 1e-8, -0.37
        # scalar re-derivation of the update rule
        m = v = 0.0
        x_ref = 0.5
        steps = []
        for t in range(1, 3001):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            step = lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
            x_ref -= step
            steps.append(step)
        p = {"x": np.array([0.5])}
        state = nncore.AdamState()
        for _ in range(3000):
            nncore.adam_step(p, {"x": np.array([g])}, state, lr, b1, b2, eps)
        assert p["x"][0] == pytest.approx(x_ref, rel=1e-12)
        assert steps[-1] == pytest.approx(lr * np.sign(g), rel=1e-4)

    def test_symmetry(self):
        p = {"a": np.array([0.0, 0.0])}
        st_ = nncore.AdamState()
        for g in (0.3, -1.2, 0.7):
            nncore.adam_step(p, {"a": np.array([g, g])}, st_)
        assert p["a"][0] == p["a"][1]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nncore.adam_step({"a": np.zeros(2)}, {"a": np.zeros(3)}, nncore.AdamState())
        with pytest.raises(ValueError):
            nncore.adam_step({"a": np.zeros(2)}, {"b": np.zeros(2)}, nncore.AdamState())


class TestFiniteDiff:
    def test_square(self):
        g = nncore.finite_diff_gradient(lambda v: float(v[0] ** 2), np.array([3.0]), 1e-6)
        assert abs(g[0] - 6.0) < 1e-6

    def test_constant(self):
        g = nncore.finite_diff_gradient(lambda v: 4.2, np.array([1.0, 2.0]))
        assert not g.any()

    def test_input_untouched(self):
        x = np.array([1.0, 2.0])
        nncore.finite_diff_gradient(lambda v: float(v.sum()), x)
        assert x.tolist() == [1.0, 2.0]


def test_kernels_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(16, 21, 1))
    k = rng.normal(size=(3, 1, 64))
    b = rng.normal(size=64)
    a1 = nncore.conv1d_forward(x, k, b)
    a2 = nncore.conv1d_forward(x.copy(), k.copy(), b.copy())
    assert a1.tobytes() == a2.tobytes()
