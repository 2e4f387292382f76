"""Manifest-driven dual-rate clip extraction.

Each manifest entry yields a ClipPair: a short high-resolution clip for the
attention encoder (8 frames by default) and a longer low-resolution clip for
the predictive stream (30 frames). Frames are picked by uniform sparse bin
sampling: the entry's frame range is split into ``count`` near-equal bins and
one frame is taken per bin, either the bin midpoint (deterministic) or a
uniform random index within the bin (jitter).

Jitter uses numpy's PCG64 generator, which is platform-stable; the per-entry
stream is derived from (global seed, crc32(video_id), entry index, draw) so
shuffling the manifest never changes an entry's samples.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .scenes import ManifestEntry, SyntheticVideo


def timestamps_to_frames(start_s: float, end_s: float, fps: float) -> tuple[int, int]:
    """Convert an annotated [start_s, end_s) window to inclusive frame indices."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    if start_s >= end_s:
        raise ValueError("start_s must precede end_s")
    first = math.floor(start_s * fps)
    last = math.floor(end_s * fps) - 1
    if last < first:
        raise ValueError("window shorter than one frame")
    return first, last


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def sparse_bin_sample(first: int, last: int, count: int,
                      jitter: bool = False,
                      rng: np.random.Generator | None = None) -> list[int]:
    """One frame index per bin over [first, last].

    Bin b covers [first + round(b*L/count), first + round((b+1)*L/count) - 1]
    with L = last - first + 1 and round half-up, so non-divisible ranges skew
    bin sizes by at most one frame. Empty bins (range shorter than count)
    repeat the previously emitted index, keeping output shapes fixed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if last < first:
        raise ValueError("last must be >= first")
    if jitter and rng is None:
        raise ValueError("jitter requires an rng")
    span = last - first + 1
    out: list[int] = []
    for b in range(count):
        lo = first + _round_half_up(b * span / count)
        hi = first + _round_half_up((b + 1) * span / count) - 1
        if hi < lo:
            out.append(out[-1] if out else first)
        elif jitter:
            out.append(int(rng.integers(lo, hi + 1)))
        else:
            out.append(lo + (hi - lo + 1) // 2)
    return out


def entry_rng(global_seed: int, video_id: str, entry_index: int,
              draw: int = 0) -> np.random.Generator:
    """Platform-stable per-entry jitter stream (PCG64)."""
    ss = np.random.SeedSequence([global_seed, zlib.crc32(video_id.encode()),
                                 entry_index, draw])
    return np.random.Generator(np.random.PCG64(ss))


def resize_bilinear(frames: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of (T, H, W, C) frames."""
    t, h, w, c = frames.shape
    if (h, w) == (out_h, out_w):
        return frames.copy()
    ys = np.linspace(0.0, h - 1.0, out_h) if out_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1.0, out_w) if out_w > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 2) if h > 1 else np.zeros(out_h, int)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 2) if w > 1 else np.zeros(out_w, int)
    wy = (ys - y0)[None, :, None, None]
    wx = (xs - x0)[None, None, :, None]
    f00 = frames[:, y0][:, :, x0]
    f01 = frames[:, y0][:, :, x0 + 1] if w > 1 else f00
    f10 = frames[:, y0 + 1][:, :, x0] if h > 1 else f00
    f11 = frames[:, y0 + 1][:, :, x0 + 1] if (h > 1 and w > 1) else f00
    top = f00 * (1 - wx) + f01 * wx
    bot = f10 * (1 - wx) + f11 * wx
    return top * (1 - wy) + bot * wy


@dataclass
class SamplerConfig:
    tsf_frames: int = 8
    tsf_res: int = 32
    dpc_frames: int = 30
    dpc_res: int = 32
    jitter: bool = False


@dataclass
class ClipPair:
    tsf_clip: np.ndarray  # (tsf_frames, tsf_res, tsf_res, 3)
    dpc_clip: np.ndarray  # (dpc_frames, dpc_res, dpc_res, 3)
    source: ManifestEntry
    indices_tsf: list[int]
    indices_dpc: list[int]


def extract_clip_pair(video: SyntheticVideo, entry: ManifestEntry,
                      config: SamplerConfig,
                      rng: np.random.Generator | None = None) -> ClipPair:
    """Sample both clips for one manifest entry from a decoded video."""
    first, last = timestamps_to_frames(entry.start_s, entry.end_s, video.fps)
    if first < 0 or last >= video.frames.shape[0]:
        raise ValueError("entry window lies outside the video")
    idx_tsf = sparse_bin_sample(first, last, config.tsf_frames, config.jitter, rng)
    idx_dpc = sparse_bin_sample(first, last, config.dpc_frames, config.jitter, rng)
    tsf = resize_bilinear(video.frames[idx_tsf], config.tsf_res, config.tsf_res)
    dpc = resize_bilinear(video.frames[idx_dpc], config.dpc_res, config.dpc_res)
    return ClipPair(tsf, dpc, entry, idx_tsf, idx_dpc)
