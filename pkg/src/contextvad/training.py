"""Joint training loop and the encoder warm-up.

The optimizer is RMSProp without momentum (adaptive first-order): for each
trainable parameter, ``acc = rho * acc + (1 - rho) * g^2`` and
``theta -= lr * g / (sqrt(acc) + eps)``. Hyperparameters are pinned in the
config for reproducibility. Training is strictly sequential and, under a
fixed seed, bit-reproducible: the jitter stream, batch sampling and dropout
masks are all functions of (seed, step).

Warm-up: before freezing, both visual encoders are tuned for a few steps on a
frame-order contrastive task (adjacent frames / blocks of the same clip are
positives, frames of other clips are negatives). Afterwards the freeze
profile is applied and joint training touches only the trainable set.
"""
from __future__ import annotations

import csv
import warnings

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Var
from .config import Config
from .corpus import VideoCache
from .encoders import encode_dpc_batch, encode_tsf_batch
from .losses import align_loss, cpc_anchors, cpc_loss, total_loss
from .model import Model, apply_freeze_profile
from .sampling import SamplerConfig, entry_rng, extract_clip_pair
from .scenes import entry_from_record


class ContractViolation(Exception):
    """Raised when the zero-shot contract is broken (anomaly in training data)."""


class RMSProp:
    def __init__(self, store: ParamStore, lr: float, rho: float = 0.9,
                 eps: float = 1e-8):
        self.store = store
        self.lr, self.rho, self.eps = lr, rho, eps
        self._acc: dict[str, np.ndarray] = {}

    def step(self) -> None:
        for name in self.store.trainable_names():
            v = self.store[name]
            if v.grad is None:
                continue
            acc = self._acc.get(name)
            if acc is None:
                acc = np.zeros_like(v.data)
            acc = self.rho * acc + (1.0 - self.rho) * v.grad * v.grad
            self._acc[name] = acc
            v.data -= self.lr * v.grad / (np.sqrt(acc) + self.eps)


def check_zero_shot(records: list[dict]) -> None:
    for rec in records:
        if rec["label"] != "normal":
            raise ContractViolation(
                f"training manifest contains anomaly-labeled entry "
                f"{rec['video_id']!r}; the model must never see anomalies")


def _sample_batch(records: list[dict], batch_size: int,
                  rng: np.random.Generator) -> list[int]:
    idx = list(rng.choice(len(records), size=batch_size, replace=len(records) < batch_size))
    descs = {records[i]["description"] for i in idx}
    if len(descs) < 2:
        others = [j for j in range(len(records))
                  if records[j]["description"] not in descs]
        if others:
            idx[-1] = int(rng.choice(others))
        else:
            warnings.warn("batch has a single scene description; "
                          "alignment negatives are not semantically meaningful")
    return [int(i) for i in idx]


def _extract_batch(records: list[dict], idx: list[int], cache: VideoCache,
                   cfg: Config, draw: int, jitter: bool
                   ) -> tuple[np.ndarray, np.ndarray, list[str]]:
    sampler = SamplerConfig(cfg.tsf_frames, cfg.tsf_res, cfg.dpc_frames,
                            cfg.dpc_res, jitter=jitter)
    tsf, dpc, descs = [], [], []
    for i in idx:
        rec = records[i]
        video = cache.get(rec)
        rng = entry_rng(cfg.seed, rec["video_id"], i, draw) if jitter else None
        pair = extract_clip_pair(video, entry_from_record(rec), sampler, rng)
        tsf.append(pair.tsf_clip)
        dpc.append(pair.dpc_clip)
        descs.append(rec["description"])
    return np.stack(tsf), np.stack(dpc), descs


def batch_loss(model: Model, records: list[dict], idx: list[int],
               cache: VideoCache, step: int
               ) -> tuple[Var, float, float]:
    """Total loss for one batch; deterministic for a given (model, idx, step)."""
    cfg = model.cfg
    tsf_clips, dpc_clips, descs = _extract_batch(records, idx, cache, cfg,
                                                 draw=step, jitter=cfg.jitter_train)
    drop_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, step, 777]))

    tsf_pooled, latents = model.visual_streams(tsf_clips, dpc_clips)
    v = model.visual_embedding(tsf_pooled, latents, training=True, rng=drop_rng)
    mid = tsf_clips[:, model.mid_frame_index()]
    t_hat = model.gated_text(descs, mid)
    l_align = align_loss(v, t_hat, cfg.tau)

    n_blocks = latents.shape[1]
    l_pred: Var | float = 0.0
    if cfg.use_dpc:
        states = model.aggregate(latents)  # (B, n_blocks, d_h)
        anchors = cpc_anchors(n_blocks, cfg.horizons)
        rows = []
        for (t, k) in anchors:
            preds_k = _predict_head(model, states[:, t], k)
            rows.append(ag.reshape(preds_k, (len(idx), 1, cfg.d_z)))
        pred_rows = ag.reshape(ag.concat(rows, axis=1),
                               (len(idx) * len(anchors), cfg.d_z))
        meta = [(c, t, k) for c in range(len(idx)) for (t, k) in anchors]
        l_pred = cpc_loss(pred_rows, meta, latents, cfg.neg_cap,
                          seed=cfg.seed * 100_003 + step)

    # Build the combined objective only from terms with nonzero weight so the
    # degenerate alpha settings provably leave the other path untouched.
    if cfg.alpha >= 1.0 or not cfg.use_dpc:
        total = l_align
        l_pred_val = float(l_pred.data) if isinstance(l_pred, Var) else 0.0
    elif cfg.alpha <= 0.0:
        total = l_pred
        l_pred_val = float(l_pred.data)
    else:
        total = total_loss(l_align, l_pred, cfg.alpha)
        l_pred_val = float(l_pred.data)
    return total, float(l_align.data), l_pred_val


def _predict_head(model: Model, c_t: Var, k: int) -> Var:
    """Prediction for one (time, horizon) pair over a batch of states."""
    p, cfg = model.params, model.cfg
    trunk = ag.gelu(ag.linear(c_t, p["pred/trunk/W"], p["pred/trunk/b"]))
    y = ag.gelu(ag.linear(trunk, p[f"pred/head{k}/W1"], p[f"pred/head{k}/b1"]))
    y = ag.linear(y, p[f"pred/head{k}/W2"], p[f"pred/head{k}/b2"])
    return ag.l2_normalize(y, axis=-1)


def spot_check_gradients(model: Model, records: list[dict], idx: list[int],
                         cache: VideoCache, n_params: int = 5,
                         fd_step: float = 1e-5, tol: float = 1e-3) -> None:
    """Central finite-difference check of a few random parameter entries at
    step 0; raises if the analytic gradient disagrees."""
    params = model.params
    model.params.zero_grad()
    total, _, _ = batch_loss(model, records, idx, cache, step=0)
    total.backward()
    grads = params.gradients()
    rng = np.random.default_rng(0)
    names = [n for n in sorted(grads) if grads[n] is not None]
    for _ in range(n_params):
        name = names[int(rng.integers(len(names)))]
        v = params[name]
        flat_i = int(rng.integers(v.data.size))
        orig = v.data.flat[flat_i]
        v.data.flat[flat_i] = orig + fd_step
        hi = float(batch_loss(model, records, idx, cache, step=0)[0].data)
        v.data.flat[flat_i] = orig - fd_step
        lo = float(batch_loss(model, records, idx, cache, step=0)[0].data)
        v.data.flat[flat_i] = orig
        fd = (hi - lo) / (2.0 * fd_step)
        an = grads[name].flat[flat_i]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        if rel > tol:
            raise AssertionError(
                f"gradient spot check failed for {name}[{flat_i}]: "
                f"analytic {an:.6g} vs finite-difference {fd:.6g}")


def train(model: Model, records: list[dict], log_path=None,
          checkpoint_path=None, best_path=None) -> list[tuple]:
    """Run the joint training loop; returns the (step, align, pred, total) log."""
    cfg = model.cfg
    check_zero_shot(records)
    cache = VideoCache(cfg, capacity=4 * cfg.batch_size)
    opt = RMSProp(model.params, cfg.lr, cfg.rms_rho, cfg.rms_eps)
    batch_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 424242]))
    log = []
    best = np.inf
    for step in range(cfg.steps):
        idx = _sample_batch(records, cfg.batch_size, batch_rng)
        if step == 0 and cfg.spot_check:
            spot_check_gradients(model, records, idx, cache)
        model.params.zero_grad()
        total, la, lp = batch_loss(model, records, idx, cache, step)
        total.backward()
        opt.step()
        lt = float(total.data)
        log.append((step, la, lp, lt))
        if lt < best and best_path is not None:
            best = lt
            model.save(best_path)
    if checkpoint_path is not None:
        model.save(checkpoint_path)
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "l_align", "l_pred", "l_total"])
            for row in log:
                w.writerow([row[0], f"{row[1]:.10g}", f"{row[2]:.10g}",
                            f"{row[3]:.10g}"])
    return log


# -- encoder warm-up --------------------------------------------------------

def _adjacency_infonce(feats: Var) -> Var:
    """Frame-order InfoNCE over (B, T, D) unit-norm rows: the frame after the
    anchor is the positive; negatives are all frames of other clips plus the
    same clip's non-adjacent frames. The same-clip negatives matter: without
    them the task is solvable from background identity alone and the encoder
    never learns to track what moves."""
    b, t, d = feats.shape
    flat = ag.reshape(feats, (b * t, d))
    terms = []
    for clip in range(b):
        for i in range(t - 1):
            idx = np.array([clip * t + i + 1] +
                           [clip * t + j for j in range(t)
                            if j not in (i, i + 1)] +
                           [c * t + j for c in range(b) if c != clip
                            for j in range(t)])
            cands = ag.take(flat, idx)
            anchor = ag.reshape(flat[clip * t + i], (1, -1))
            logits = ag.matmul(anchor, ag.swapaxes(cands, -1, -2))
            terms.append(ag.add(ag.logsumexp(logits, axis=-1),
                                ag.mul(logits[0, 0], -1.0)))
    return ag.reduce_mean(ag.concat([ag.reshape(x, (1,)) for x in terms]))


def warmup_encoders(model: Model, records: list[dict]) -> None:
    """Self-supervised warm-up of both visual encoders, then freeze."""
    cfg = model.cfg
    params = model.params
    check_zero_shot(records)
    if cfg.warmup_steps > 0:
        params.freeze_prefix("tsf/", True)
        params.freeze_prefix("dpc/", True)
        params.freeze_prefix("text/", False)
        cache = VideoCache(cfg, capacity=4 * cfg.warmup_batch)
        opt = RMSProp(params, cfg.warmup_lr, cfg.rms_rho, cfg.rms_eps)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 616161]))
        for step in range(cfg.warmup_steps):
            idx = [int(i) for i in rng.choice(len(records), size=cfg.warmup_batch,
                                              replace=len(records) < cfg.warmup_batch)]
            tsf_clips, dpc_clips, _ = _extract_batch(records, idx, cache, cfg,
                                                     draw=100_000 + step,
                                                     jitter=cfg.jitter_train)
            params.zero_grad()
            f = ag.l2_normalize(encode_tsf_batch(tsf_clips, params, cfg), axis=-1)
            loss = _adjacency_infonce(f)
            z = encode_dpc_batch(dpc_clips, params, cfg)
            loss = ag.add(loss, _adjacency_infonce(z))
            loss.backward()
            opt.step()
    apply_freeze_profile(params)
