"""The three feature extractors.

* a small divided space-time attention video encoder: per clip, patch tokens
  get spatial + temporal position embeddings, then each block runs temporal
  self-attention (same patch position across frames), spatial self-attention
  (patches within a frame) and a GELU MLP, all pre-norm residual;
* a block-wise clip encoder: the long low-res clip is split into fixed-size
  frame blocks, each block's frames are stacked into channels and pushed
  through a strided conv stack + GELU + global average pooling to a unit-norm
  latent;
* a deterministic text encoder over the closed scene vocabulary: token +
  position embeddings, two attention blocks, mean pool, linear head, L2 norm.

All three are frozen by default after initialization (the last conv stage of
the clip encoder is the one part left trainable for domain adaptation); the
optional warm-up that tunes them on a frame-order task before freezing lives
in :mod:`contextvad.training`.
"""
from __future__ import annotations

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Var
from .config import Config

VOCAB = ["<unk>", "a", "at", "with", "pedestrian", "activity",
         "corridor", "plaza", "gate", "day", "night",
         "empty", "sparse", "busy"]
_TOK = {w: i for i, w in enumerate(VOCAB)}
MAX_TOKENS = 8


# -- initialization ---------------------------------------------------------

def _dense(rng, n_in, n_out, scale=None):
    scale = scale if scale is not None else 1.0 / np.sqrt(n_in)
    return rng.normal(0.0, scale, size=(n_in, n_out))


def _add_attention_block(params: ParamStore, rng, prefix: str, d: int) -> None:
    params.add(prefix + "ln_g", np.ones(d))
    params.add(prefix + "ln_b", np.zeros(d))
    for w in ("Wq", "Wk", "Wv", "Wo"):
        params.add(prefix + w, _dense(rng, d, d))


def _add_mlp_block(params: ParamStore, rng, prefix: str, d: int, hidden: int) -> None:
    params.add(prefix + "ln_g", np.ones(d))
    params.add(prefix + "ln_b", np.zeros(d))
    params.add(prefix + "W1", _dense(rng, d, hidden))
    params.add(prefix + "b1", np.zeros(hidden))
    params.add(prefix + "W2", _dense(rng, hidden, d))
    params.add(prefix + "b2", np.zeros(d))


def init_tsf(params: ParamStore, rng, cfg: Config) -> None:
    if cfg.tsf_res % cfg.patch != 0:
        raise ValueError("patch size must divide the high-res clip resolution")
    n_patch = (cfg.tsf_res // cfg.patch) ** 2
    patch_dim = cfg.patch * cfg.patch * 3
    d = cfg.d_v
    params.add("tsf/patch/W", _dense(rng, patch_dim, d))
    params.add("tsf/patch/b", np.zeros(d))
    params.add("tsf/pos_spatial", rng.normal(0.0, 0.5, size=(n_patch, d)))
    params.add("tsf/pos_temporal", rng.normal(0.0, 0.5, size=(cfg.tsf_frames, d)))
    for i in range(cfg.tsf_blocks):
        _add_attention_block(params, rng, f"tsf/block{i}/tattn/", d)
        _add_attention_block(params, rng, f"tsf/block{i}/sattn/", d)
        _add_mlp_block(params, rng, f"tsf/block{i}/mlp/", d, 2 * d)
    params.add("tsf/out/ln_g", np.ones(d))
    params.add("tsf/out/ln_b", np.zeros(d))


# Input gain on the temporal-deviation channels: raw deviations are a few
# thousandths on the unit pixel scale, far below where the conv nonlinearity
# does anything useful.
DPC_DEV_GAIN = 10.0


def dpc_conv_channels(cfg: Config) -> list[tuple[int, int]]:
    c_in = cfg.dpc_block_frames * 3
    return [(c_in, 16), (16, 32), (32, cfg.d_z)]


def init_dpc(params: ParamStore, rng, cfg: Config) -> None:
    # Biases start at a small constant, not zero: the deviation input is all
    # zeros for a motionless block, and zero biases would collapse such blocks
    # to an exactly-zero latent that cannot be normalized. A small constant
    # maps "no motion" to a well-defined point on the unit sphere.
    for i, (ci, co) in enumerate(dpc_conv_channels(cfg)):
        params.add(f"dpc/conv{i}/W", rng.normal(0.0, np.sqrt(2.0 / (9 * ci)),
                                                size=(3, 3, ci, co)))
        params.add(f"dpc/conv{i}/b", np.full(co, 0.02))


def init_text(params: ParamStore, rng, cfg: Config) -> None:
    d = cfg.d_text
    params.add("text/tok", rng.normal(0.0, 1.0, size=(len(VOCAB), d)))
    params.add("text/pos", rng.normal(0.0, 0.5, size=(MAX_TOKENS, d)))
    for i in range(2):
        _add_attention_block(params, rng, f"text/block{i}/attn/", d)
        _add_mlp_block(params, rng, f"text/block{i}/mlp/", d, 2 * d)
    params.add("text/out/W", _dense(rng, d, d))
    params.add("text/out/b", np.zeros(d))


# -- shared attention pieces ------------------------------------------------

def _attention(x: Var, params: ParamStore, prefix: str) -> Var:
    """Pre-norm single-head self-attention over the last two axes, residual."""
    d = x.shape[-1]
    y = ag.layer_norm(x, params[prefix + "ln_g"], params[prefix + "ln_b"])
    q = ag.matmul(y, params[prefix + "Wq"])
    k = ag.matmul(y, params[prefix + "Wk"])
    v = ag.matmul(y, params[prefix + "Wv"])
    scores = ag.mul(ag.matmul(q, ag.swapaxes(k, -1, -2)), 1.0 / np.sqrt(d))
    att = ag.softmax(scores, axis=-1)
    out = ag.matmul(ag.matmul(att, v), params[prefix + "Wo"])
    return ag.add(x, out)


def _mlp_block(x: Var, params: ParamStore, prefix: str) -> Var:
    y = ag.layer_norm(x, params[prefix + "ln_g"], params[prefix + "ln_b"])
    y = ag.gelu(ag.linear(y, params[prefix + "W1"], params[prefix + "b1"]))
    y = ag.linear(y, params[prefix + "W2"], params[prefix + "b2"])
    return ag.add(x, y)


# -- video encoders ---------------------------------------------------------

def _patchify(clips: np.ndarray, patch: int) -> np.ndarray:
    """(B, T, H, W, 3) -> (B, T, n_patch, patch*patch*3), row-major patches."""
    b, t, h, w, c = clips.shape
    if h % patch or w % patch:
        raise ValueError("patch size must divide frame height and width")
    x = clips.reshape(b, t, h // patch, patch, w // patch, patch, c)
    x = x.transpose(0, 1, 2, 4, 3, 5, 6)
    return x.reshape(b, t, (h // patch) * (w // patch), patch * patch * c)


def encode_tsf_batch(clips: np.ndarray, params: ParamStore, cfg: Config) -> Var:
    """Per-frame features for a batch of high-res clips: (B, T, d_v)."""
    b, t = clips.shape[:2]
    if clips.shape[2] != cfg.tsf_res or clips.shape[3] != cfg.tsf_res:
        raise ValueError("clip resolution does not match the configuration")
    tokens = ag.linear(Var(_patchify(clips, cfg.patch)),
                       params["tsf/patch/W"], params["tsf/patch/b"])
    tokens = ag.add(tokens, params["tsf/pos_spatial"])
    tokens = ag.add(tokens, ag.reshape(params["tsf/pos_temporal"], (t, 1, cfg.d_v)))
    x = tokens
    for i in range(cfg.tsf_blocks):
        x = ag.swapaxes(x, 1, 2)  # (B, P, T, D): attend across time
        x = _attention(x, params, f"tsf/block{i}/tattn/")
        x = ag.swapaxes(x, 1, 2)  # (B, T, P, D): attend across patches
        x = _attention(x, params, f"tsf/block{i}/sattn/")
        x = _mlp_block(x, params, f"tsf/block{i}/mlp/")
    x = ag.layer_norm(x, params["tsf/out/ln_g"], params["tsf/out/ln_b"])
    return ag.reduce_mean(x, axis=2)


def encode_tsf(clip: np.ndarray, params: ParamStore, cfg: Config) -> Var:
    """Single clip (T, H, W, 3) -> (T, d_v)."""
    return ag.reshape(encode_tsf_batch(clip[None], params, cfg),
                      (clip.shape[0], cfg.d_v))


def _blocks_to_channels(clips: np.ndarray, block_frames: int) -> np.ndarray:
    """(B, T, H, W, 3) -> (B*n_blocks, H, W, block_frames*3).

    Each block is represented by its per-frame deviations from the block mean
    frame: the motion trace, zero wherever nothing moves. The static
    background is dropped deliberately. It dominates every latent otherwise
    and within-block motion becomes invisible after global pooling; appearance
    reaches the shared embedding through the attention stream instead.
    """
    b, t, h, w, c = clips.shape
    if t % block_frames:
        raise ValueError("frame count must be divisible by the block size")
    n = t // block_frames
    x = clips.reshape(b * n, block_frames, h, w, c)
    dev = (x - x.mean(axis=1, keepdims=True)) * DPC_DEV_GAIN
    return dev.transpose(0, 2, 3, 1, 4).reshape(b * n, h, w, block_frames * c)


def encode_dpc_batch(clips: np.ndarray, params: ParamStore, cfg: Config) -> Var:
    """Unit-norm block latents for a batch of low-res clips: (B, n_blocks, d_z)."""
    b, t = clips.shape[:2]
    n = t // cfg.dpc_block_frames
    x: Var = Var(_blocks_to_channels(clips, cfg.dpc_block_frames))
    for i in range(len(dpc_conv_channels(cfg))):
        x = ag.gelu(ag.conv2d(x, params[f"dpc/conv{i}/W"], params[f"dpc/conv{i}/b"],
                              stride=2, pad=1))
    x = ag.reduce_mean(x, axis=(1, 2))  # global average pool
    x = ag.l2_normalize(x, axis=-1)
    return ag.reshape(x, (b, n, cfg.d_z))


def encode_dpc(clip: np.ndarray, params: ParamStore, cfg: Config) -> Var:
    """Single clip (T, H, W, 3) -> (n_blocks, d_z), rows unit-norm."""
    n = clip.shape[0] // cfg.dpc_block_frames
    return ag.reshape(encode_dpc_batch(clip[None], params, cfg), (n, cfg.d_z))


# -- text encoder -----------------------------------------------------------

def tokenize(description: str) -> list[int]:
    if not description.strip():
        raise ValueError("empty description")
    words = description.lower().split()[:MAX_TOKENS]
    return [_TOK.get(w, 0) for w in words]


def encode_text(description: str, params: ParamStore, cfg: Config) -> np.ndarray:
    """Unit-norm text embedding (d_text,); deterministic for a given string."""
    ids = tokenize(description)
    x = ag.add(ag.take(params["text/tok"], np.array(ids)),
               ag.take(params["text/pos"], np.arange(len(ids))))
    x = ag.reshape(x, (1, len(ids), cfg.d_text))
    for i in range(2):
        x = _attention(x, params, f"text/block{i}/attn/")
        x = _mlp_block(x, params, f"text/block{i}/mlp/")
    pooled = ag.reduce_mean(x, axis=1)
    out = ag.l2_normalize(ag.linear(pooled, params["text/out/W"], params["text/out/b"]))
    return out.data[0]
