"""Context gate: exact identity at beta=0, bounded residual, gradient flow."""
import numpy as np
import pytest

from contextvad import autograd as ag
from contextvad.autograd import Var
from contextvad.config import Config
from contextvad.gate import context_vector, gate_fuse, gate_residual
from contextvad.model import init_params


@pytest.fixture(scope="module")
def cfg():
    return Config()


@pytest.fixture
def params(cfg):
    return init_params(cfg)


def _unit_rows(rng, shape):
    x = rng.normal(size=shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


class TestContextVector:
    def test_shape(self, params, cfg, rng):
        frames = rng.random((3, 32, 32, 3))
        assert context_vector(frames, params, cfg).shape == (3, cfg.d_c)

    def test_single_frame_promoted(self, params, cfg, rng):
        frame = rng.random((32, 32, 3))
        single = context_vector(frame, params, cfg).data
        batched = context_vector(frame[None], params, cfg).data
        np.testing.assert_array_equal(single, batched)

    def test_distinguishes_day_from_night(self, params, cfg):
        day = np.full((1, 32, 32, 3), 0.55)
        night = np.full((1, 32, 32, 3), 0.16)
        a = context_vector(day, params, cfg).data
        b = context_vector(night, params, cfg).data
        assert np.abs(a - b).max() > 1e-6


class TestGateFuse:
    def test_exact_identity_at_init(self, params, cfg, rng):
        t = Var(_unit_rows(rng, (4, cfg.d_text)))
        u = Var(rng.normal(size=(4, cfg.d_c)))
        out = gate_fuse(t, u, params)
        # bitwise, not merely close
        assert np.array_equal(out.data, t.data)

    def test_single_vector_identity(self, params, cfg, rng):
        t = Var(_unit_rows(rng, (cfg.d_text,)))
        out = gate_fuse(t, Var(rng.normal(size=cfg.d_c)), params)
        assert out.shape == (cfg.d_text,)
        assert np.array_equal(out.data, t.data)

    def test_unit_norm_after_training_moves_beta(self, params, cfg, rng):
        params["gate/beta"].data[...] = 0.7
        t = Var(_unit_rows(rng, (3, cfg.d_text)))
        out = gate_fuse(t, Var(rng.normal(size=(3, cfg.d_c))), params)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=-1), 1.0,
                                   atol=1e-12)
        assert not np.allclose(out.data, t.data)

    def test_residual_magnitude_scales_with_tanh_beta(self, params, cfg, rng):
        t = Var(_unit_rows(rng, (2, cfg.d_text)))
        u = Var(rng.normal(size=(2, cfg.d_c)))
        deltas = []
        for beta in (0.3, 0.6):
            params["gate/beta"].data[...] = beta
            y = t.data + np.tanh(beta) * gate_residual(t, u, params).data
            deltas.append(np.linalg.norm(y - t.data))
        ratio = deltas[0] / deltas[1]
        assert abs(ratio - np.tanh(0.3) / np.tanh(0.6)) < 1e-10

    def test_beta_gradient_nonzero_at_zero(self, cfg, rng):
        # beta must be able to leave its zero initialization even though the
        # forward pass short-circuits to the identity there
        params = init_params(cfg)
        t = Var(_unit_rows(rng, (3, cfg.d_text)))
        u = Var(rng.normal(size=(3, cfg.d_c)))
        out = gate_fuse(t, u, params)
        w = rng.normal(size=out.shape)
        ag.reduce_sum(ag.mul(out, w)).backward()
        g = params["gate/beta"].grad
        assert g is not None and abs(float(g)) > 0.0

    def test_beta_gradient_matches_finite_difference(self, cfg, rng):
        params = init_params(cfg)
        t_data = _unit_rows(rng, (3, cfg.d_text))
        u_data = rng.normal(size=(3, cfg.d_c))
        w = rng.normal(size=(3, cfg.d_text))

        def loss():
            out = gate_fuse(Var(t_data), Var(u_data), params)
            return ag.reduce_sum(ag.mul(out, w))

        loss().backward()
        an = float(params["gate/beta"].grad)
        eps = 1e-6
        params["gate/beta"].data[...] = eps
        hi = float(loss().data)
        params["gate/beta"].data[...] = -eps
        lo = float(loss().data)
        params["gate/beta"].data[...] = 0.0
        fd = (hi - lo) / (2 * eps)
        assert abs(an - fd) / max(abs(fd), 1e-8) < 1e-4

    def test_mlp_gradients_flow_when_beta_nonzero(self, cfg, rng):
        params = init_params(cfg)
        params["gate/beta"].data[...] = 0.5
        t = Var(_unit_rows(rng, (2, cfg.d_text)))
        u = context_vector(rng.random((2, 32, 32, 3)), params, cfg)
        out = gate_fuse(t, u, params)
        ag.reduce_sum(ag.mul(out, rng.normal(size=out.shape))).backward()
        for name in ("gate/mlp/W1", "gate/mlp/W2", "gate/conv0/W", "gate/fc/W"):
            assert params[name].grad is not None
            assert np.abs(params[name].grad).max() > 0.0
