"""Corpus assembly: seed-deterministic train/eval manifests over the 18 scene
contexts, plus a small regeneration cache so the trainer never stores frames.

The training split is normal-only. The evaluation split pairs normal videos
(used for per-scene threshold calibration and as negatives) with videos that
carry one injected anomaly each: contextual for every scene, temporal only for
scenes that have actors to speed up.
"""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .config import Config
from .scenes import (AnomalyRequest, SceneSpec, SyntheticVideo, all_scene_specs,
                     generate, record_for, video_from_record)


def build_train_records(cfg: Config) -> list[dict]:
    records = []
    for spec in all_scene_specs():
        for i in range(cfg.train_videos_per_scene):
            seed = cfg.seed * 10_000 + i
            _, entry, anns = generate(spec, seed, cfg.train_length_s, cfg.fps,
                                      None, h=cfg.frame_size, w=cfg.frame_size)
            records.append(record_for(entry, spec, seed, anns))
    return records


def build_eval_records(cfg: Config) -> list[dict]:
    records = []
    rng = np.random.default_rng(cfg.seed + 99)
    for spec in all_scene_specs():
        for i in range(cfg.eval_normal_per_scene):
            seed = cfg.seed * 10_000 + 500 + i
            _, entry, anns = generate(spec, seed, cfg.eval_length_s, cfg.fps,
                                      None, h=cfg.frame_size, w=cfg.frame_size)
            records.append(record_for(entry, spec, seed, anns))
        for i in range(cfg.eval_anomaly_per_scene):
            seed = cfg.seed * 10_000 + 700 + i
            kinds = ["contextual", "temporal"]
            kind = kinds[i % 2]
            if spec.expected_activity == "empty":
                kind = "contextual"
            onset = float(rng.uniform(2.5, cfg.eval_length_s - 3.5))
            duration = float(rng.uniform(2.0, 3.0))
            inject = AnomalyRequest(kind, onset, duration)
            _, entry, anns = generate(spec, seed, cfg.eval_length_s, cfg.fps,
                                      inject, h=cfg.frame_size, w=cfg.frame_size)
            records.append(record_for(entry, spec, seed, anns))
    return records


class VideoCache:
    """Regenerates videos from manifest records; keeps the most recent few."""

    def __init__(self, cfg: Config, capacity: int = 16):
        self.cfg = cfg
        self.capacity = capacity
        self._cache: OrderedDict[str, SyntheticVideo] = OrderedDict()

    def get(self, record: dict) -> SyntheticVideo:
        vid = record["video_id"]
        if vid in self._cache:
            self._cache.move_to_end(vid)
            return self._cache[vid]
        video = video_from_record(record, self.cfg.fps,
                                  h=self.cfg.frame_size, w=self.cfg.frame_size)
        self._cache[vid] = video
        if len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return video
