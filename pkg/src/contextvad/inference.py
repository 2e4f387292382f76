"""Streaming dual-score inference.

A video is scored with sliding windows. Each window yields

  * an alignment score s_a = <v, t_hat>, the cosine between the window's
    visual embedding and the context-gated scene text embedding, and
  * a prediction error s_p = mean over matured horizons of
    1 - <predicted latent, actual latent>,

fused into a(t) = lambda * (1 - s_a)/2 + (1 - lambda) * s_p/2, which lies in
[0, 1]. The recurrent state is carried across windows for the whole stream:
each block latent enters the GRU exactly once (windows overlap, so only the
blocks not seen before are fed), and predictions are queued against the
absolute block index they target. The full streaming state can be snapshotted
and restored with bitwise-identical continuation.

Per-scene thresholds are the (1 - target_fpr) linear-interpolation quantile of
fused scores pooled from normal traces of that scene.
"""
from __future__ import annotations

import copy
import csv
from dataclasses import dataclass, field

import numpy as np

from .autograd import Var
from .config import Config
from .model import Model
from .sampling import SamplerConfig, extract_clip_pair
from .scenes import ManifestEntry, SceneSpec, SyntheticVideo, describe


@dataclass
class ScoreTrace:
    times_s: list[float] = field(default_factory=list)
    align: list[float] = field(default_factory=list)
    pred_err: list[float] = field(default_factory=list)
    fused: list[float] = field(default_factory=list)

    def append(self, t, s_a, s_p, a):
        self.times_s.append(float(t))
        self.align.append(float(s_a))
        self.pred_err.append(float(s_p))
        self.fused.append(float(a))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "align_score", "pred_error", "fused"])
            for row in zip(self.times_s, self.align, self.pred_err, self.fused):
                w.writerow([f"{x:.10g}" for x in row])


@dataclass
class SceneThreshold:
    scene_id: str
    theta: float
    target_fpr: float


class StreamScorer:
    """Stateful per-stream scorer; one instance per video stream."""

    def __init__(self, model: Model, description: str):
        self.model = model
        self.cfg = model.cfg
        self.description = description
        self.h = np.zeros((1, self.cfg.d_h))
        self.next_block = 0  # absolute index of the next unseen block
        self.pending: dict[int, np.ndarray] = {}  # target block -> prediction

    def state(self) -> dict:
        return {"h": self.h.copy(), "next_block": self.next_block,
                "pending": copy.deepcopy(self.pending)}

    def load_state(self, state: dict) -> None:
        self.h = state["h"].copy()
        self.next_block = state["next_block"]
        self.pending = copy.deepcopy(state["pending"])

    def score_window(self, tsf_clip: np.ndarray, dpc_clip: np.ndarray,
                     first_block: int) -> tuple[float, float]:
        """Score one window whose first block has absolute index first_block."""
        model, cfg = self.model, self.cfg
        tsf_pooled, latents = model.visual_streams(tsf_clip[None], dpc_clip[None])
        v = model.visual_embedding(tsf_pooled, latents).data[0]
        t_hat = model.gated_text([self.description],
                                 tsf_clip[model.mid_frame_index()][None]).data[0]
        s_a = float(v @ t_hat)

        s_p = 0.0
        if cfg.use_dpc:
            z = latents.data[0]  # (n_blocks, d_z)
            n_blocks = z.shape[0]
            # resolve matured predictions against this window's actual latents
            errs = []
            for b in range(first_block, first_block + n_blocks):
                if b in self.pending:
                    errs.append(1.0 - float(self.pending.pop(b) @ z[b - first_block]))
            if errs:
                s_p = float(np.mean(errs))
            # feed only blocks the stream has not seen yet
            new_lo = max(self.next_block, first_block)
            if new_lo < first_block + n_blocks:
                fresh = z[new_lo - first_block:]
                states = self.model.aggregate(Var(fresh[None]), Var(self.h))
                self.h = states.data[:, -1, :].copy()
                self.next_block = first_block + n_blocks
            preds = self.model.predict_future(Var(self.h[0])).data
            for k in range(preds.shape[0]):
                self.pending[self.next_block + k] = preds[k]
        return s_a, s_p


def window_plan(n_frames: int, fps: float, cfg: Config) -> list[tuple[int, int]]:
    """(start_frame, first_block) per window; length per the stride formula."""
    win = int(round(cfg.window_s * fps))
    stride = int(round(cfg.stride_s * fps))
    if n_frames < win:
        raise ValueError("video shorter than one window")
    block_frames = win // (cfg.dpc_frames // cfg.dpc_block_frames)
    n_windows = (n_frames - win) // stride + 1
    plan = []
    for w in range(n_windows):
        start = w * stride
        # absolute block index of the window's first block
        plan.append((start, start // block_frames if block_frames else 0))
    return plan


def score_stream(video: SyntheticVideo, spec: SceneSpec, model: Model,
                 scorer: StreamScorer | None = None) -> ScoreTrace:
    """Deterministic (jitter-off) sliding-window scoring of one video."""
    cfg = model.cfg
    fps = video.fps
    win = int(round(cfg.window_s * fps))
    sampler = SamplerConfig(cfg.tsf_frames, cfg.tsf_res, cfg.dpc_frames,
                            cfg.dpc_res, jitter=False)
    scorer = scorer or StreamScorer(model, describe(spec))
    trace = ScoreTrace()
    lam = cfg.fuse_lambda
    for start, first_block in window_plan(video.frames.shape[0], fps, cfg):
        entry = ManifestEntry("normal", "window", start / fps,
                              (start + win) / fps, describe(spec))
        pair = extract_clip_pair(video, entry, sampler)
        s_a, s_p = scorer.score_window(pair.tsf_clip, pair.dpc_clip, first_block)
        fused = lam * (1.0 - s_a) / 2.0 + (1.0 - lam) * s_p / 2.0
        trace.append((start + win) / fps, s_a, s_p, fused)
    return trace


def calibrate(normal_traces: list[ScoreTrace], target_fpr: float,
              scene_id: str = "") -> SceneThreshold:
    """Threshold = (1 - target_fpr) linear-interpolation quantile of the pool."""
    if not (0.0 < target_fpr < 1.0):
        raise ValueError("target_fpr must lie in (0, 1)")
    pool = np.concatenate([np.asarray(t.fused) for t in normal_traces]) \
        if normal_traces else np.array([])
    if pool.size == 0:
        raise ValueError("calibration pool is empty")
    theta = float(np.quantile(pool, 1.0 - target_fpr, method="linear"))
    return SceneThreshold(scene_id, theta, target_fpr)


def flag(trace: ScoreTrace, threshold: SceneThreshold,
         min_duration_s: float) -> list[tuple[float, float]]:
    """Maximal runs of fused > theta lasting >= min_duration_s.

    Runs separated by even a single sub-threshold step stay separate events.
    A run's duration is measured from its first to its last flagged timestep.
    """
    events = []
    run_start = None
    prev_t = None
    for t, a in zip(trace.times_s, trace.fused):
        if a > threshold.theta:
            if run_start is None:
                run_start = t
            prev_t = t
        else:
            if run_start is not None and prev_t - run_start >= min_duration_s:
                events.append((run_start, prev_t))
            run_start = None
    if run_start is not None and prev_t - run_start >= min_duration_s:
        events.append((run_start, prev_t))
    return events
