"""Finite-difference checks and closed-form oracles for every primitive."""
import numpy as np
import pytest
from conftest import assert_grads_close

from contextvad import autograd as ag
from contextvad.autograd import ParamStore, Var


def _scalarize(v):
    return ag.reduce_sum(ag.mul(v, np.arange(1.0, v.size + 1).reshape(v.shape)))


class TestElementwise:
    def test_add_broadcast(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.add(v["a"], v["b"])),
                           {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4,))})

    def test_mul_broadcast(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.mul(v["a"], v["b"])),
                           {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(1, 3))})

    def test_power(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.power(v["a"], 3.0)),
                           {"a": rng.normal(size=(5,)) + 3.0})

    def test_exp_log(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.log(ag.exp(v["a"]))),
                           {"a": rng.normal(size=(4,))})

    def test_tanh_sigmoid(self, rng):
        assert_grads_close(
            lambda v: _scalarize(ag.mul(ag.tanh(v["a"]), ag.sigmoid(v["a"]))),
            {"a": rng.normal(size=(6,))})

    def test_gelu_value(self):
        # gelu(1) = 1 * Phi(1) = 0.8413447460685429
        out = ag.gelu(Var(np.array([0.0, 1.0, -1.0])))
        assert out.data[0] == 0.0
        assert abs(out.data[1] - 0.8413447460685429) < 1e-15
        assert abs(out.data[2] - (-1.0 + 0.8413447460685429)) < 1e-15

    def test_gelu_grad(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.gelu(v["a"])),
                           {"a": rng.normal(size=(7,)) * 2.0})


class TestShapeOps:
    def test_reshape_swapaxes(self, rng):
        assert_grads_close(
            lambda v: _scalarize(ag.swapaxes(ag.reshape(v["a"], (2, 3, 4)), 0, 2)),
            {"a": rng.normal(size=(24,))})

    def test_concat(self, rng):
        assert_grads_close(
            lambda v: _scalarize(ag.concat([v["a"], v["b"]], axis=1)),
            {"a": rng.normal(size=(2, 3)), "b": rng.normal(size=(2, 2))})

    def test_take_with_repeats(self, rng):
        idx = np.array([0, 2, 2, 1])
        assert_grads_close(lambda v: _scalarize(ag.take(v["a"], idx)),
                           {"a": rng.normal(size=(3, 4))})

    def test_getitem_matches_numpy(self, rng):
        a = rng.normal(size=(4, 5))
        v = Var(a)
        np.testing.assert_array_equal(v[2].data, a[2])
        np.testing.assert_array_equal(v[1:3].data, a[1:3])


class TestReductionsLinalg:
    def test_reduce_sum_axis(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.reduce_sum(v["a"], axis=1)),
                           {"a": rng.normal(size=(3, 4, 2))})

    def test_reduce_mean_value(self):
        out = ag.reduce_mean(Var(np.arange(6.0).reshape(2, 3)), axis=0)
        np.testing.assert_allclose(out.data, [1.5, 2.5, 3.5])

    def test_matmul(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.matmul(v["a"], v["b"])),
                           {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4, 2))})

    def test_matmul_batched_broadcast(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.matmul(v["a"], v["b"])),
                           {"a": rng.normal(size=(5, 3, 4)), "b": rng.normal(size=(4, 2))})

    def test_matmul_rejects_vectors(self):
        with pytest.raises(ValueError):
            ag.matmul(Var(np.ones(3)), Var(np.ones((3, 2))))

    def test_softmax_rows_sum_to_one(self, rng):
        s = ag.softmax(Var(rng.normal(size=(4, 6)) * 10))
        np.testing.assert_allclose(s.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_grad(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.softmax(v["a"], axis=-1)),
                           {"a": rng.normal(size=(2, 5))})

    def test_logsumexp_matches_scipy(self, rng):
        from scipy.special import logsumexp as sp_lse
        a = rng.normal(size=(3, 7)) * 50
        np.testing.assert_allclose(ag.logsumexp(Var(a)).data, sp_lse(a, axis=-1),
                                   atol=1e-12)

    def test_logsumexp_grad(self, rng):
        assert_grads_close(
            lambda v: ag.reduce_sum(ag.logsumexp(v["a"], axis=-1)),
            {"a": rng.normal(size=(2, 4))})


class TestConv:
    def test_conv2d_oracle(self, rng):
        # brute-force correlation oracle
        x = rng.normal(size=(2, 5, 5, 3))
        w = rng.normal(size=(3, 3, 3, 4))
        b = rng.normal(size=(4,))
        out = ag.conv2d(Var(x), Var(w), Var(b), stride=2, pad=1).data
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        expect = np.zeros_like(out)
        for n in range(2):
            for oy in range(out.shape[1]):
                for ox in range(out.shape[2]):
                    patch = xp[n, 2 * oy:2 * oy + 3, 2 * ox:2 * ox + 3]
                    for co in range(4):
                        expect[n, oy, ox, co] = (patch * w[:, :, :, co]).sum() + b[co]
        np.testing.assert_allclose(out, expect, atol=1e-12)

    def test_conv2d_grad(self, rng):
        assert_grads_close(
            lambda v: _scalarize(ag.conv2d(v["x"], v["w"], v["b"], stride=2, pad=1)),
            {"x": rng.normal(size=(1, 6, 6, 2)),
             "w": rng.normal(size=(3, 3, 2, 3)),
             "b": rng.normal(size=(3,))})


class TestComposites:
    def test_layer_norm_example(self):
        # normalize [1, 3]: centered [-1, 1], std 1; gain 2, bias 1
        out = ag.layer_norm(Var(np.array([[1.0, 3.0]])),
                            Var(np.array([2.0, 2.0])), Var(np.array([1.0, 1.0])))
        np.testing.assert_allclose(out.data, [[-0.99999, 2.99999]], atol=1e-4)

    def test_layer_norm_grad(self, rng):
        assert_grads_close(
            lambda v: _scalarize(ag.layer_norm(v["x"], v["g"], v["b"])),
            {"x": rng.normal(size=(3, 5)), "g": rng.normal(size=(5,)) + 1.0,
             "b": rng.normal(size=(5,))})

    def test_layer_norm_shape_check(self):
        with pytest.raises(ValueError):
            ag.layer_norm(Var(np.ones((2, 3))), Var(np.ones(2)), Var(np.zeros(3)))

    def test_l2_normalize_unit(self, rng):
        out = ag.l2_normalize(Var(rng.normal(size=(4, 6))))
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=-1), 1.0,
                                   atol=1e-12)

    def test_l2_normalize_grad(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.l2_normalize(v["x"])),
                           {"x": rng.normal(size=(2, 4))})

    def test_l2_normalize_zero_row(self):
        out = ag.l2_normalize(Var(np.zeros((1, 3))))
        np.testing.assert_array_equal(out.data, 0.0)
        ag.set_checked(True)
        try:
            with pytest.raises(ValueError):
                ag.l2_normalize(Var(np.zeros((1, 3))))
        finally:
            ag.set_checked(False)

    def test_dropout_inverted_scaling(self, rng):
        x = Var(np.ones((200, 50)))
        out = ag.dropout(x, 0.3, rng)
        kept = out.data[out.data > 0]
        np.testing.assert_allclose(kept, 1.0 / 0.7)
        assert abs(out.data.mean() - 1.0) < 0.05

    def test_linear_grad(self, rng):
        assert_grads_close(lambda v: _scalarize(ag.linear(v["x"], v["w"], v["b"])),
                           {"x": rng.normal(size=(2, 3)),
                            "w": rng.normal(size=(3, 4)),
                            "b": rng.normal(size=(4,))})


class TestGraph:
    def test_no_tape_for_constants(self, rng):
        a = Var(rng.normal(size=(3,)))
        out = ag.mul(ag.add(a, 1.0), 2.0)
        assert not out.requires_grad and out._parents == ()

    def test_backward_requires_scalar(self):
        v = Var(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            ag.add(v, 1.0).backward()

    def test_grad_accumulates_over_reuse(self):
        x = Var(np.array(2.0), requires_grad=True)
        y = ag.add(ag.mul(x, x), x)  # x^2 + x -> 2x + 1 = 5
        y.backward()
        assert float(x.grad) == 5.0

    def test_checked_mode_rejects_nan(self):
        ag.set_checked(True)
        try:
            with pytest.raises(ValueError):
                Var(np.array([np.nan]))
        finally:
            ag.set_checked(False)


class TestParamStore:
    def test_duplicate_name_rejected(self):
        store = ParamStore()
        store.add("a/w", np.ones(2))
        with pytest.raises(ValueError):
            store.add("a/w", np.ones(2))

    def test_freeze_drops_gradients(self):
        store = ParamStore()
        v = store.add("a/w", np.ones(2))
        v.grad = np.ones(2)
        store.set_trainable("a/w", False)
        assert v.grad is None and not v.requires_grad
        assert "a/w" not in store.gradients()

    def test_save_load_round_trip(self, tmp_path, rng):
        store = ParamStore()
        store.add("enc/w", rng.normal(size=(3, 4)))
        store.add("head/b", rng.normal(size=(4,)), trainable=False)
        path = tmp_path / "ckpt.npz"
        store.save(path)
        loaded = ParamStore.load(path)
        assert loaded.names() == store.names()
        for n in store.names():
            np.testing.assert_array_equal(loaded[n].data, store[n].data)
            assert loaded[n].requires_grad == store[n].requires_grad
