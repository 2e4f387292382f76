"""Recurrent aggregator and prediction heads: stability and contracts."""
import numpy as np
import pytest
from conftest import assert_grads_close

from contextvad import autograd as ag
from contextvad.autograd import Var
from contextvad.config import Config
from contextvad.model import init_params
from contextvad.predictor import aggregate, gru_step, predict


@pytest.fixture(scope="module")
def cfg():
    return Config()


@pytest.fixture
def params(cfg):
    return init_params(cfg)


class TestGruStep:
    def test_zero_fixed_point(self, params, cfg):
        # zero input and zero state with zero biases stays at zero
        h = gru_step(Var(np.zeros((1, cfg.d_z))), Var(np.zeros((1, cfg.d_h))),
                     params)
        np.testing.assert_array_equal(h.data, 0.0)

    def test_saturated_update_gate_keeps_state(self, cfg, rng):
        # bz = -20 forces z ~ 0, so h' = h to within sigmoid(-20) ~ 2e-9
        params = init_params(cfg)
        params["pred/gru/bz"].data[:] = -20.0
        h0 = rng.normal(size=(2, cfg.d_h))
        x = rng.normal(size=(2, cfg.d_z))
        h1 = gru_step(Var(x), Var(h0), params)
        np.testing.assert_allclose(h1.data, h0, atol=1e-7)

    def test_gradients(self, rng):
        cfg = Config(d_z=3, d_h=4)
        params = init_params(cfg)

        def build(v):
            h = gru_step(v["x"], v["h"], params)
            return ag.reduce_sum(ag.mul(h, np.arange(1.0, 9.0).reshape(2, 4)))

        assert_grads_close(build, {"x": rng.normal(size=(2, 3)),
                                   "h": rng.normal(size=(2, 4))})


class TestAggregate:
    def test_shapes_single_and_batch(self, params, cfg, rng):
        z = rng.normal(size=(6, cfg.d_z))
        single = aggregate(Var(z), params, cfg)
        batch = aggregate(Var(z[None]), params, cfg)
        assert single.shape == (6, cfg.d_h)
        assert batch.shape == (1, 6, cfg.d_h)
        np.testing.assert_allclose(single.data, batch.data[0], atol=1e-12)

    def test_state_carry_equals_one_pass(self, params, cfg, rng):
        z = rng.normal(size=(1, 6, cfg.d_z))
        full = aggregate(Var(z), params, cfg).data
        first = aggregate(Var(z[:, :3]), params, cfg)
        h_mid = Var(first.data[:, -1, :])
        rest = aggregate(Var(z[:, 3:]), params, cfg, h0=h_mid).data
        np.testing.assert_array_equal(np.concatenate([first.data, rest], axis=1),
                                      full)

    def test_hidden_norm_bounded_on_long_streams(self, params, cfg, rng):
        # every coordinate lies in (-1, 1) => ||h|| <= sqrt(d_h), any length
        z = rng.normal(size=(1, 500, cfg.d_z)) * 5.0
        states = aggregate(Var(z), params, cfg).data
        norms = np.linalg.norm(states, axis=-1)
        assert norms.max() <= np.sqrt(cfg.d_h) + 1e-12

    def test_empty_sequence_rejected(self, params, cfg):
        with pytest.raises(ValueError):
            aggregate(Var(np.zeros((1, 0, cfg.d_z))), params, cfg)

    def test_bad_initial_state_rejected(self, params, cfg, rng):
        with pytest.raises(ValueError):
            aggregate(Var(rng.normal(size=(2, 3, cfg.d_z))), params, cfg,
                      h0=Var(np.zeros((1, cfg.d_h))))


class TestPredict:
    def test_unit_norm_rows(self, params, cfg, rng):
        out = predict(Var(rng.normal(size=cfg.d_h)), cfg.horizons, params, cfg)
        assert out.shape == (cfg.horizons, cfg.d_z)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=-1), 1.0,
                                   atol=1e-12)

    def test_batched(self, params, cfg, rng):
        c = rng.normal(size=(3, cfg.d_h))
        out = predict(Var(c), 2, params, cfg)
        assert out.shape == (3, 2, cfg.d_z)
        np.testing.assert_allclose(predict(Var(c[0]), 2, params, cfg).data,
                                   out.data[0], atol=1e-12)

    def test_horizon_heads_differ(self, params, cfg, rng):
        out = predict(Var(rng.normal(size=cfg.d_h)), cfg.horizons, params, cfg).data
        assert not np.allclose(out[0], out[1])

    def test_horizon_bounds_checked(self, params, cfg, rng):
        c = Var(rng.normal(size=cfg.d_h))
        with pytest.raises(ValueError):
            predict(c, 0, params, cfg)
        with pytest.raises(ValueError):
            predict(c, cfg.horizons + 1, params, cfg)

    def test_gradients_through_heads(self, rng):
        cfg = Config(d_z=3, d_h=4, horizons=2)
        params = init_params(cfg)

        def build(v):
            out = predict(v["c"], 2, params, cfg)
            return ag.reduce_sum(ag.mul(out, np.arange(1.0, 13.0).reshape(2, 2, 3)))

        assert_grads_close(build, {"c": rng.normal(size=(2, 4))})
