"""Projection head: identity at init, stream weighting, gradients."""
import numpy as np
import pytest
from conftest import assert_grads_close

from contextvad import autograd as ag
from contextvad.autograd import Var
from contextvad.config import Config
from contextvad.model import init_params
from contextvad.projection import fuse_streams, project, residual_trunk


@pytest.fixture(scope="module")
def cfg():
    return Config()


@pytest.fixture
def params(cfg):
    return init_params(cfg)


class TestFuseStreams:
    def test_concat_weighting(self, rng):
        a = Var(rng.normal(size=(2, 3)))
        b = Var(rng.normal(size=(2, 4)))
        out = fuse_streams(a, b, 0.25).data
        np.testing.assert_allclose(out[:, :3], 0.25 * a.data)
        np.testing.assert_allclose(out[:, 3:], 0.75 * b.data)

    def test_gamma_one_silences_second_stream(self, rng):
        a = Var(rng.normal(size=(2, 3)))
        out1 = fuse_streams(a, Var(rng.normal(size=(2, 4))), 1.0).data
        out2 = fuse_streams(a, Var(rng.normal(size=(2, 4))), 1.0).data
        np.testing.assert_array_equal(out1, out2)
        np.testing.assert_array_equal(out1[:, 3:], 0.0)

    def test_gamma_range_checked(self, rng):
        a = Var(rng.normal(size=(1, 2)))
        with pytest.raises(ValueError):
            fuse_streams(a, a, 1.5)


class TestIdentityAtInit:
    def test_residual_blocks_are_identity(self, params, cfg, rng):
        # zero-initialized down projections: the trunk's block stack acts as
        # the identity on any input (pre final norm)
        h = rng.normal(size=(3, cfg.d_embed))
        cur = Var(h)
        for i in range(cfg.proj_blocks):
            pre = f"proj/block{i}/"
            y = ag.gelu(ag.linear(cur, params[pre + "up/W"], params[pre + "up/b"]))
            y = ag.layer_norm(y, params[pre + "ln_g"], params[pre + "ln_b"])
            y = ag.linear(y, params[pre + "down/W"], params[pre + "down/b"])
            cur = ag.add(cur, y)
        np.testing.assert_allclose(cur.data, h, atol=1e-12)

    def test_trunk_reduces_to_input_projection(self, params, cfg, rng):
        # whole trunk at init = LN(gelu(LN(W_in x + b))) with no block effect
        x = rng.normal(size=(2, cfg.d_v + cfg.d_z))
        full = residual_trunk(Var(x), params, cfg).data
        h = ag.gelu(ag.layer_norm(ag.linear(Var(x), params["proj/in/W"],
                                            params["proj/in/b"]),
                                  params["proj/in/ln_g"], params["proj/in/ln_b"]))
        expect = ag.layer_norm(h, params["proj/final/ln_g"],
                               params["proj/final/ln_b"]).data
        np.testing.assert_allclose(full, expect, atol=1e-12)


class TestProject:
    def test_unit_norm_output(self, params, cfg, rng):
        v = project(Var(rng.normal(size=(4, cfg.d_v))),
                    Var(rng.normal(size=(4, cfg.d_z))), 0.5, params, cfg)
        assert v.shape == (4, cfg.d_embed)
        np.testing.assert_allclose(np.linalg.norm(v.data, axis=-1), 1.0,
                                   atol=1e-12)

    def test_single_vector_input(self, params, cfg, rng):
        a = rng.normal(size=cfg.d_v)
        b = rng.normal(size=cfg.d_z)
        single = project(Var(a), Var(b), 0.5, params, cfg)
        batched = project(Var(a[None]), Var(b[None]), 0.5, params, cfg)
        assert single.shape == (cfg.d_embed,)
        np.testing.assert_allclose(single.data, batched.data[0], atol=1e-12)

    def test_plain_variant_is_single_linear(self, params, rng):
        cfg = Config(use_residual_mlp=False)
        a = rng.normal(size=(2, cfg.d_v))
        b = rng.normal(size=(2, cfg.d_z))
        out = project(Var(a), Var(b), 0.5, params, cfg).data
        x = np.concatenate([0.5 * a, 0.5 * b], axis=-1)
        raw = x @ params["proj/plain/W"].data + params["proj/plain/b"].data
        expect = raw / np.linalg.norm(raw, axis=-1, keepdims=True)
        np.testing.assert_allclose(out, expect, atol=1e-12)

    def test_gamma_one_ignores_predictive_stream(self, params, cfg, rng):
        a = rng.normal(size=(2, cfg.d_v))
        v1 = project(Var(a), Var(rng.normal(size=(2, cfg.d_z))), 1.0, params, cfg)
        v2 = project(Var(a), Var(rng.normal(size=(2, cfg.d_z))), 1.0, params, cfg)
        np.testing.assert_array_equal(v1.data, v2.data)

    def test_gradients_match_finite_differences(self, rng):
        cfg = Config(d_v=4, d_z=3, d_embed=5, proj_hidden=6, proj_blocks=2,
                     dropout=0.0)
        params = init_params(cfg)
        # nonzero down weights so block gradients are exercised
        for i in range(cfg.proj_blocks):
            params[f"proj/block{i}/down/W"].data[:] = rng.normal(
                size=params[f"proj/block{i}/down/W"].shape) * 0.1
        w = rng.normal(size=(2, cfg.d_embed))

        def build(v):
            out = project(v["a"], v["b"], 0.3, params, cfg)
            return ag.reduce_sum(ag.mul(out, w))

        assert_grads_close(build, {"a": rng.normal(size=(2, cfg.d_v)),
                                   "b": rng.normal(size=(2, cfg.d_z))})

    def test_parameter_gradients_flow(self, cfg, rng):
        params = init_params(cfg)
        out = project(Var(rng.normal(size=(2, cfg.d_v))),
                      Var(rng.normal(size=(2, cfg.d_z))), 0.5, params, cfg)
        ag.reduce_sum(ag.mul(out, rng.normal(size=out.shape))).backward()
        for name in ("proj/in/W", "proj/block0/down/W", "proj/out/W"):
            assert params[name].grad is not None
            assert np.abs(params[name].grad).max() > 0.0
