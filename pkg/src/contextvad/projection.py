"""Residual MLP projection into the shared video-text embedding space.

The two visual streams are weighted by ``gamma`` (gamma=1 silences the
predictive stream entirely), concatenated and projected to a unit-norm
embedding. Residual blocks start as exact identities because the down
projection is zero-initialized, which keeps early joint training stable.

A plain single-linear variant exists for the ablation baseline.
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Var
from .config import Config


def init_projection(params: ParamStore, rng, cfg: Config) -> None:
    d_in = cfg.d_v + cfg.d_z
    d, h = cfg.d_embed, cfg.proj_hidden
    params.add("proj/plain/W", rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d)))
    params.add("proj/plain/b", np.zeros(d))
    params.add("proj/in/W", rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d)))
    params.add("proj/in/b", np.zeros(d))
    params.add("proj/in/ln_g", np.ones(d))
    params.add("proj/in/ln_b", np.zeros(d))
    for i in range(cfg.proj_blocks):
        pre = f"proj/block{i}/"
        params.add(pre + "up/W", rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, h)))
        params.add(pre + "up/b", np.zeros(h))
        params.add(pre + "ln_g", np.ones(h))
        params.add(pre + "ln_b", np.zeros(h))
        params.add(pre + "down/W", np.zeros((h, d)))  # identity at init
        params.add(pre + "down/b", np.zeros(d))
    params.add("proj/final/ln_g", np.ones(d))
    params.add("proj/final/ln_b", np.zeros(d))
    params.add("proj/out/W", rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)))
    params.add("proj/out/b", np.zeros(d))


def fuse_streams(tsf_pooled: Var, dpc_pooled: Var, gamma: float) -> Var:
    if not (0.0 <= gamma <= 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    return ag.concat([ag.mul(tsf_pooled, gamma),
                      ag.mul(dpc_pooled, 1.0 - gamma)], axis=-1)


def residual_trunk(x: Var, params: ParamStore, cfg: Config,
                   training: bool = False,
                   rng: np.random.Generator | None = None) -> Var:
    """Input projection + N residual blocks + final norm, pre-output."""
    x = ag.gelu(ag.layer_norm(
        ag.linear(x, params["proj/in/W"], params["proj/in/b"]),
        params["proj/in/ln_g"], params["proj/in/ln_b"]))
    for i in range(cfg.proj_blocks):
        pre = f"proj/block{i}/"
        y = ag.gelu(ag.linear(x, params[pre + "up/W"], params[pre + "up/b"]))
        y = ag.layer_norm(y, params[pre + "ln_g"], params[pre + "ln_b"])
        if training and cfg.dropout > 0.0:
            y = ag.dropout(y, cfg.dropout, rng)
        y = ag.linear(y, params[pre + "down/W"], params[pre + "down/b"])
        x = ag.add(x, y)
    return ag.layer_norm(x, params["proj/final/ln_g"], params["proj/final/ln_b"])


def project(tsf_pooled: Var, dpc_pooled: Var, gamma: float,
            params: ParamStore, cfg: Config, training: bool = False,
            rng: np.random.Generator | None = None) -> Var:
    """Shared unit-norm visual embedding; accepts (d,) or batched (B, d) inputs."""
    single = tsf_pooled.ndim == 1
    if single:
        tsf_pooled = ag.reshape(tsf_pooled, (1, -1))
        dpc_pooled = ag.reshape(dpc_pooled, (1, -1))
    x = fuse_streams(tsf_pooled, dpc_pooled, gamma)
    if not cfg.use_residual_mlp:
        out = ag.l2_normalize(ag.linear(x, params["proj/plain/W"],
                                        params["proj/plain/b"]))
    else:
        x = residual_trunk(x, params, cfg, training, rng)
        out = ag.l2_normalize(ag.linear(x, params["proj/out/W"], params["proj/out/b"]))
    return ag.reshape(out, (-1,)) if single else out
