"""Training objectives: alignment InfoNCE, predictive contrastive loss, and
their weighted combination.

The alignment term is one-directional (visual -> text), exactly as the model
defines it; a symmetric option exists but is off by default. The predictive
term has no temperature. For each predictive anchor the negative pool is every
other latent in the batch: other times of the same clip plus all latents of
other clips. Pools larger than ``neg_cap`` are subsampled with the run seed;
``negative_pool`` is exposed so oracles can enumerate exactly the same set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Var


@dataclass
class LossWeights:
    alpha: float = 0.5
    tau: float = 0.07
    gamma: float = 0.5


def align_loss(visual: Var, text: Var, tau: float, symmetric: bool = False) -> Var:
    """Mean InfoNCE over the batch; rows of both inputs must be unit-norm."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    b = visual.shape[0]
    if b < 2:
        raise ValueError("alignment loss needs a batch of at least 2")
    logits = ag.mul(ag.matmul(visual, ag.swapaxes(text, -1, -2)), 1.0 / tau)
    eye = np.eye(b)
    diag = ag.reduce_sum(ag.mul(logits, eye), axis=-1)
    loss = ag.reduce_mean(ag.add(ag.logsumexp(logits, axis=-1), ag.mul(diag, -1.0)))
    if symmetric:
        logits_t = ag.swapaxes(logits, -1, -2)
        diag_t = ag.reduce_sum(ag.mul(logits_t, eye), axis=-1)
        loss_t = ag.reduce_mean(ag.add(ag.logsumexp(logits_t, axis=-1),
                                       ag.mul(diag_t, -1.0)))
        loss = ag.mul(ag.add(loss, loss_t), 0.5)
    return loss


def negative_pool(n_clips: int, n_blocks: int, clip: int, target: int,
                  cap: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Negative (clip, block) pairs for one anchor: everything except the
    positive. Subsampled without replacement when larger than ``cap``."""
    pool = [(c, t) for c in range(n_clips) for t in range(n_blocks)
            if not (c == clip and t == target)]
    if not pool:
        raise ValueError("empty negative pool")
    if len(pool) > cap:
        pick = rng.choice(len(pool), size=cap, replace=False)
        pool = [pool[i] for i in sorted(pick)]
    return pool


def cpc_anchors(n_blocks: int, horizons: int) -> list[tuple[int, int]]:
    """(context time t, horizon k) pairs with t >= 1 and t + k < n_blocks."""
    return [(t, k) for t in range(1, n_blocks)
            for k in range(1, horizons + 1) if t + k < n_blocks]


def cpc_loss(predictions: Var, anchors: list[tuple[int, int, int]],
             latents: Var, neg_cap: int = 64, seed: int = 0) -> Var:
    """Predictive contrastive loss.

    predictions: (A, d_z) rows, one per anchor; anchors: (clip, t, k) meta for
    each row; latents: (B, n_blocks, d_z) actual unit-norm block latents. The
    positive for row a = (c, t, k) is latents[c, t + k].
    """
    if len(anchors) != predictions.shape[0]:
        raise ValueError("one anchor per prediction row required")
    n_clips, n_blocks = latents.shape[:2]
    flat = ag.reshape(latents, (n_clips * n_blocks, latents.shape[2]))
    rng = np.random.default_rng(seed)
    terms = []
    for a, (clip, t, k) in enumerate(anchors):
        target = t + k
        negs = negative_pool(n_clips, n_blocks, clip, target, neg_cap, rng)
        idx = np.array([clip * n_blocks + target] +
                       [c * n_blocks + b for c, b in negs])
        cands = ag.take(flat, idx)  # (1 + n_neg, d_z)
        pred = ag.reshape(predictions[a], (1, -1))
        logits = ag.matmul(pred, ag.swapaxes(cands, -1, -2))  # (1, 1+n_neg)
        terms.append(ag.add(ag.logsumexp(logits, axis=-1), ag.mul(logits[0, 0], -1.0)))
    return ag.reduce_mean(ag.concat([ag.reshape(x, (1,)) for x in terms]))


def total_loss(l_align: Var | float, l_pred: Var | float, alpha: float) -> Var:
    """alpha * alignment + (1 - alpha) * prediction."""
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    return ag.add(ag.mul(ag.as_var(l_align), alpha),
                  ag.mul(ag.as_var(l_pred), 1.0 - alpha))
