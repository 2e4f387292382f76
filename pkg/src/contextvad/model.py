"""Model assembly: parameter initialization, the freeze profile, and the
shared forward passes used by training and inference.

Freeze profile (applied after the optional encoder warm-up):
  * attention video encoder: all frozen
  * clip block encoder: frozen except its last conv stage
  * text encoder: all frozen
  * projection head, context gate (incl. beta), recurrent aggregator and
    prediction heads: trainable
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from . import encoders, gate, predictor, projection
from .autograd import ParamStore, Var
from .config import Config

TRAINABLE_PREFIXES = ("proj/", "gate/", "pred/")
DPC_LAST_STAGE = "dpc/conv2/"


def init_params(cfg: Config, seed: int | None = None) -> ParamStore:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    params = ParamStore()
    encoders.init_tsf(params, rng, cfg)
    encoders.init_dpc(params, rng, cfg)
    encoders.init_text(params, rng, cfg)
    projection.init_projection(params, rng, cfg)
    gate.init_gate(params, rng, cfg)
    predictor.init_predictor(params, rng, cfg)
    return params


def apply_freeze_profile(params: ParamStore) -> None:
    for name in params.names():
        trainable = name.startswith(TRAINABLE_PREFIXES) or name.startswith(DPC_LAST_STAGE)
        params.set_trainable(name, trainable)


def frozen_names(params: ParamStore) -> list[str]:
    return [n for n in params.names() if not n.startswith(TRAINABLE_PREFIXES)
            and not n.startswith(DPC_LAST_STAGE)]


class Model:
    """Parameter store plus configuration, with cached text embeddings."""

    def __init__(self, params: ParamStore, cfg: Config):
        self.params = params
        self.cfg = cfg
        self._text_cache: dict[str, np.ndarray] = {}

    def text_embedding(self, description: str) -> np.ndarray:
        if description not in self._text_cache:
            self._text_cache[description] = encoders.encode_text(
                description, self.params, self.cfg)
        return self._text_cache[description]

    def visual_streams(self, tsf_clips: np.ndarray, dpc_clips: np.ndarray
                       ) -> tuple[Var, Var]:
        """Pooled attention features (B, d_v) and block latents (B, n, d_z)."""
        feats = encoders.encode_tsf_batch(tsf_clips, self.params, self.cfg)
        tsf_pooled = ag.reduce_mean(feats, axis=1)
        if self.cfg.use_dpc:
            latents = encoders.encode_dpc_batch(dpc_clips, self.params, self.cfg)
        else:
            n = dpc_clips.shape[1] // self.cfg.dpc_block_frames
            latents = Var(np.zeros((dpc_clips.shape[0], n, self.cfg.d_z)))
        return tsf_pooled, latents

    def visual_embedding(self, tsf_pooled: Var, latents: Var,
                         training: bool = False,
                         rng: np.random.Generator | None = None) -> Var:
        dpc_pooled = ag.reduce_mean(latents, axis=-2)
        return projection.project(tsf_pooled, dpc_pooled, self.cfg.gamma,
                                  self.params, self.cfg, training, rng)

    def gated_text(self, descriptions: list[str], mid_frames: np.ndarray) -> Var:
        """Context-aware text embeddings (B, d_text)."""
        t = Var(np.stack([self.text_embedding(d) for d in descriptions]))
        if not self.cfg.use_gate:
            return t
        u = gate.context_vector(mid_frames, self.params, self.cfg)
        return gate.gate_fuse(t, u, self.params)

    def mid_frame_index(self) -> int:
        # middle of the high-res clip, ties broken low: index 4 of 8
        return self.cfg.tsf_frames // 2

    def aggregate(self, latents: Var, h0: Var | None = None) -> Var:
        return predictor.aggregate(latents, self.params, self.cfg, h0)

    def predict_future(self, c_t: Var, k: int | None = None) -> Var:
        return predictor.predict(c_t, k or self.cfg.horizons, self.params, self.cfg)

    def save(self, path) -> None:
        self.params.save(path)

    @classmethod
    def load(cls, path, cfg: Config) -> "Model":
        return cls(ParamStore.load(path), cfg)
