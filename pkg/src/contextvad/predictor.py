"""Temporal head over block latents: a gated recurrent aggregator plus small
MLP prediction heads for a set of future horizons.

The recurrence is a standard GRU on pooled latents (the latents here carry no
spatial grid worth convolving). Gates bound every hidden coordinate in
(-1, 1), which keeps arbitrarily long streams stable: ||h|| <= sqrt(d_h).
Prediction heads share a trunk and emit one unit-norm future latent per
horizon, so the predictive dot products stay bounded similarities.
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Var
from .config import Config


def init_predictor(params: ParamStore, rng, cfg: Config) -> None:
    d_in = cfg.d_z + cfg.d_h
    for gate_name in ("Wz", "Wr", "Wh"):
        params.add(f"pred/gru/{gate_name}",
                   rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, cfg.d_h)))
    params.add("pred/gru/bz", np.zeros(cfg.d_h))
    params.add("pred/gru/br", np.zeros(cfg.d_h))
    params.add("pred/gru/bh", np.zeros(cfg.d_h))
    params.add("pred/trunk/W", rng.normal(0.0, 1.0 / np.sqrt(cfg.d_h),
                                          size=(cfg.d_h, cfg.d_h)))
    params.add("pred/trunk/b", np.zeros(cfg.d_h))
    for k in range(1, cfg.horizons + 1):
        params.add(f"pred/head{k}/W1", rng.normal(0.0, 1.0 / np.sqrt(cfg.d_h),
                                                  size=(cfg.d_h, cfg.d_h)))
        params.add(f"pred/head{k}/b1", np.zeros(cfg.d_h))
        params.add(f"pred/head{k}/W2", rng.normal(0.0, 1.0 / np.sqrt(cfg.d_h),
                                                  size=(cfg.d_h, cfg.d_z)))
        params.add(f"pred/head{k}/b2", np.zeros(cfg.d_z))


def gru_step(x: Var, h: Var, params: ParamStore) -> Var:
    """One gated update; x (B, d_z), h (B, d_h)."""
    xh = ag.concat([x, h], axis=-1)
    z = ag.sigmoid(ag.linear(xh, params["pred/gru/Wz"], params["pred/gru/bz"]))
    r = ag.sigmoid(ag.linear(xh, params["pred/gru/Wr"], params["pred/gru/br"]))
    xrh = ag.concat([x, ag.mul(r, h)], axis=-1)
    cand = ag.tanh(ag.linear(xrh, params["pred/gru/Wh"], params["pred/gru/bh"]))
    return ag.add(ag.mul(ag.add(ag.mul(z, -1.0), 1.0), h), ag.mul(z, cand))


def aggregate(latents: Var, params: ParamStore, cfg: Config,
              h0: Var | None = None) -> Var:
    """All hidden states for a latent sequence.

    latents: (T, d_z) or (B, T, d_z); returns matching (.., T, d_h). The
    initial state defaults to zeros; passing ``h0`` carries a stream across
    calls.
    """
    single = latents.ndim == 2
    if single:
        latents = ag.reshape(latents, (1,) + latents.shape)
    b, t = latents.shape[:2]
    if t < 1:
        raise ValueError("aggregate needs at least one latent")
    h = h0 if h0 is not None else Var(np.zeros((b, cfg.d_h)))
    if h.shape != (b, cfg.d_h):
        raise ValueError("initial state shape mismatch")
    states = []
    for i in range(t):
        h = gru_step(latents[:, i], h, params)
        states.append(ag.reshape(h, (b, 1, cfg.d_h)))
    out = ag.concat(states, axis=1)
    return ag.reshape(out, (t, cfg.d_h)) if single else out


def predict(c_t: Var, k_horizons: int, params: ParamStore, cfg: Config) -> Var:
    """Unit-norm future latents (K, d_z) or (B, K, d_z) from a context state."""
    if k_horizons < 1:
        raise ValueError("need at least one prediction horizon")
    if k_horizons > cfg.horizons:
        raise ValueError(f"model has heads for {cfg.horizons} horizons")
    single = c_t.ndim == 1
    if single:
        c_t = ag.reshape(c_t, (1, -1))
    trunk = ag.gelu(ag.linear(c_t, params["pred/trunk/W"], params["pred/trunk/b"]))
    rows = []
    for k in range(1, k_horizons + 1):
        y = ag.gelu(ag.linear(trunk, params[f"pred/head{k}/W1"],
                              params[f"pred/head{k}/b1"]))
        y = ag.linear(y, params[f"pred/head{k}/W2"], params[f"pred/head{k}/b2"])
        rows.append(ag.reshape(ag.l2_normalize(y, axis=-1),
                               (c_t.shape[0], 1, cfg.d_z)))
    out = ag.concat(rows, axis=1)
    return ag.reshape(out, (k_horizons, cfg.d_z)) if single else out
