"""Procedural synthetic surveillance scenes.

Videos are moving soft blobs over a layout-dependent background, regenerable
bit-identically from (scene spec, seed, annotations). The closed vocabulary of
3 layouts x 2 times of day x 3 activity levels gives 18 scene contexts; each
has a deterministic one-sentence description used by the text encoder.

Anomalies are injected only for evaluation material: a "contextual" anomaly is
an out-of-place actor (large bright intruder blob) present for the annotated
window, a "temporal" anomaly is one actor moving far faster than the scene's
normal speed. The generator keeps its own simulator state so tests can verify
the ground truth without touching pixels.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

LAYOUTS = ("corridor", "plaza", "gate")
TIMES = ("day", "night")
ACTIVITIES = ("empty", "sparse", "busy")

ACTIVITY_COUNTS = {"empty": 0, "sparse": 2, "busy": 6}

# Normal actor speed in pixels/second at the reference 64x64 resolution.
NORMAL_SPEED = 10.0
# Temporal-anomaly actors move at 5x normal speed: strictly above the 4x
# multiple that defines a temporal anomaly, while staying in frame.
TEMPORAL_SPEED_MULT = 5.0

DESCRIPTION_TEMPLATE = "a {layout} at {time_of_day} with {activity} pedestrian activity"


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    layout: str
    time_of_day: str
    expected_activity: str
    palette_seed: int = 0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.time_of_day not in TIMES:
            raise ValueError(f"unknown time_of_day {self.time_of_day!r}")
        if self.expected_activity not in ACTIVITIES:
            raise ValueError(f"unknown expected_activity {self.expected_activity!r}")

    def to_dict(self) -> dict:
        return {"scene_id": self.scene_id, "layout": self.layout,
                "time_of_day": self.time_of_day,
                "expected_activity": self.expected_activity,
                "palette_seed": self.palette_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(**d)


@dataclass(frozen=True)
class AnomalyAnnotation:
    kind: str  # "contextual" | "temporal"
    onset_frame: int
    offset_frame: int

    def to_dict(self) -> dict:
        return {"kind": self.kind, "onset_frame": self.onset_frame,
                "offset_frame": self.offset_frame}

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyAnnotation":
        return cls(d["kind"], int(d["onset_frame"]), int(d["offset_frame"]))


@dataclass(frozen=True)
class ManifestEntry:
    label: str  # "normal" | "anomaly"
    video_id: str
    start_s: float
    end_s: float
    description: str

    def __post_init__(self):
        if not (0.0 <= self.start_s < self.end_s):
            raise ValueError("manifest entry requires 0 <= start_s < end_s")


@dataclass
class SyntheticVideo:
    frames: np.ndarray  # (T, H, W, 3) in [0, 1]
    fps: float
    seed: int
    # Per-frame simulator ground truth: list over frames of actor dicts.
    sim_state: list = field(default_factory=list, repr=False)


def describe(spec: SceneSpec) -> str:
    """Deterministic scene sentence; identical for specs differing only in palette."""
    return DESCRIPTION_TEMPLATE.format(layout=spec.layout,
                                       time_of_day=spec.time_of_day,
                                       activity=spec.expected_activity)


def all_scene_specs() -> list[SceneSpec]:
    """The closed 18-context scene vocabulary with stable ids."""
    specs = []
    for layout in LAYOUTS:
        for tod in TIMES:
            for act in ACTIVITIES:
                sid = f"{layout}-{tod}-{act}"
                specs.append(SceneSpec(sid, layout, tod, act,
                                       palette_seed=zlib.crc32(sid.encode()) % 1000))
    return specs


def _scene_rng(spec: SceneSpec, seed: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, spec.palette_seed,
                                 zlib.crc32(spec.scene_id.encode())])
    return np.random.Generator(np.random.PCG64(ss))


def _background(spec: SceneSpec, h: int, w: int) -> np.ndarray:
    base = 0.55 if spec.time_of_day == "day" else 0.16
    bg = np.full((h, w, 3), base)
    if spec.layout == "corridor":
        wall = max(2, w // 6)
        bg[:, :wall] *= 0.45
        bg[:, -wall:] *= 0.45
    elif spec.layout == "plaza":
        border = max(1, h // 10)
        bg[:border] *= 1.3
        bg[-border:] *= 1.3
        bg[:, :border] *= 1.3
        bg[:, -border:] *= 1.3
    else:  # gate: horizontal wall with an opening
        y0 = h // 2 - max(1, h // 16)
        y1 = h // 2 + max(1, h // 16)
        bg[y0:y1] *= 0.35
        gap0, gap1 = w // 2 - w // 8, w // 2 + w // 8
        bg[y0:y1, gap0:gap1] /= 0.35
    return np.clip(bg, 0.0, 1.0)


def _splat(frame: np.ndarray, x: float, y: float, radius: float,
           color: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> None:
    d2 = (yy - y) ** 2 + (xx - x) ** 2
    weight = np.exp(-d2 / (2.0 * radius * radius))
    frame += weight[:, :, None] * color[None, None, :]


class AnomalyRequest:
    """Injection request: kind plus onset/duration in seconds."""

    def __init__(self, kind: str, onset_s: float, duration_s: float):
        if kind not in ("contextual", "temporal"):
            raise ValueError(f"unknown anomaly kind {kind!r}")
        self.kind = kind
        self.onset_s = float(onset_s)
        self.duration_s = float(duration_s)


def generate(spec: SceneSpec, seed: int, length_s: float, fps: float,
             inject: AnomalyRequest | None = None,
             h: int = 64, w: int = 64
             ) -> tuple[SyntheticVideo, ManifestEntry, list[AnomalyAnnotation]]:
    """Render one synthetic video plus its manifest entry and annotations.

    Bit-identical for identical (spec, seed, length, fps, inject, size).
    """
    if length_s < 2.0:
        raise ValueError("length_s must be at least 2.0 seconds")
    if not (5.0 <= fps <= 60.0):
        raise ValueError("fps must lie in [5, 60]")
    n_frames = int(round(length_s * fps))

    annotations: list[AnomalyAnnotation] = []
    if inject is not None:
        onset = int(round(inject.onset_s * fps))
        offset = onset + int(round(inject.duration_s * fps))
        if not (0 <= onset < offset <= n_frames):
            raise ValueError("anomaly window must lie inside the video")
        if inject.kind == "temporal" and spec.expected_activity == "empty":
            raise ValueError("temporal anomaly needs at least one actor; "
                             "empty scenes only support contextual anomalies")
        annotations.append(AnomalyAnnotation(inject.kind, onset, offset))

    rng = _scene_rng(spec, seed)
    bg = _background(spec, h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    speed_px = NORMAL_SPEED * (w / 64.0) / fps  # per frame
    margin = 6.0

    actors = []
    for _ in range(ACTIVITY_COUNTS[spec.expected_activity]):
        theta = rng.uniform(0, 2 * np.pi)
        shade = rng.uniform(0.5, 0.8)
        actors.append({
            "pos": np.array([rng.uniform(margin, h - margin),
                             rng.uniform(margin, w - margin)]),
            "vel": speed_px * np.array([np.sin(theta), np.cos(theta)]),
            "radius": rng.uniform(2.5, 3.5) * (w / 64.0),
            # Dim blue-grey pedestrians; anomalous actors are bright red.
            "color": np.array([shade * 0.5, shade * 0.6, shade]),
            "role": "normal",
        })

    intruder = None
    fast_idx = None
    if annotations:
        a = annotations[0]
        if a.kind == "contextual":
            theta = rng.uniform(0, 2 * np.pi)
            intruder = {
                "pos": np.array([rng.uniform(margin, h - margin),
                                 rng.uniform(margin, w - margin)]),
                "vel": speed_px * np.array([np.sin(theta), np.cos(theta)]),
                "radius": 5.0 * (w / 64.0),
                "color": np.array([0.95, 0.08, 0.05]),
                "role": "intruder",
            }
        else:
            fast_idx = int(rng.integers(0, len(actors)))

    frames = np.empty((n_frames, h, w, 3))
    sim_state: list[list[dict]] = []

    def advance(actor, mult=1.0):
        actor["pos"] = actor["pos"] + actor["vel"] * mult
        for axis, lim in ((0, h), (1, w)):
            if actor["pos"][axis] < margin:
                actor["pos"][axis] = 2 * margin - actor["pos"][axis]
                actor["vel"][axis] = -actor["vel"][axis]
            elif actor["pos"][axis] > lim - margin:
                actor["pos"][axis] = 2 * (lim - margin) - actor["pos"][axis]
                actor["vel"][axis] = -actor["vel"][axis]

    for t in range(n_frames):
        in_window = bool(annotations) and annotations[0].onset_frame <= t < annotations[0].offset_frame
        frame = bg.copy()
        state_t = []
        for i, actor in enumerate(actors):
            mult = TEMPORAL_SPEED_MULT if (fast_idx == i and in_window) else 1.0
            if t > 0:
                advance(actor, mult)
            _splat(frame, actor["pos"][1], actor["pos"][0], actor["radius"],
                   actor["color"], yy, xx)
            # step_px is path length this frame (reflections fold the path but
            # do not slow the actor down).
            state_t.append({"role": "fast" if (fast_idx == i and in_window) else "normal",
                            "pos": actor["pos"].copy(),
                            "step_px": 0.0 if t == 0 else float(np.linalg.norm(actor["vel"]) * mult)})
        if intruder is not None:
            if t > 0:
                advance(intruder)
            if in_window:
                _splat(frame, intruder["pos"][1], intruder["pos"][0],
                       intruder["radius"], intruder["color"], yy, xx)
                state_t.append({"role": "intruder", "pos": intruder["pos"].copy(),
                                "step_px": float(np.linalg.norm(intruder["vel"]))})
        frames[t] = np.clip(frame, 0.0, 1.0)
        sim_state.append(state_t)

    label = "normal" if not annotations else "anomaly"
    suffix = "" if inject is None else f"-{inject.kind[:4]}"
    video_id = f"{spec.scene_id}-{seed:08d}{suffix}"
    entry = ManifestEntry(label, video_id, 0.0, length_s, describe(spec))
    video = SyntheticVideo(frames, fps, seed, sim_state)
    return video, entry, annotations


def normal_mean_speed(fps: float, w: int = 64) -> float:
    """Mean per-frame displacement of a normal actor, in pixels."""
    return NORMAL_SPEED * (w / 64.0) / fps


# -- corpus manifests -------------------------------------------------------

def record_for(entry: ManifestEntry, spec: SceneSpec, seed: int,
               annotations: list[AnomalyAnnotation]) -> dict:
    """JSONL record; field order is fixed and starts with the manifest tuple."""
    return {
        "label": entry.label,
        "video_id": entry.video_id,
        "start_s": entry.start_s,
        "end_s": entry.end_s,
        "description": entry.description,
        "seed": seed,
        "spec": spec.to_dict(),
        "annotations": [a.to_dict() for a in annotations],
    }


def write_manifest(path, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def entry_from_record(rec: dict) -> ManifestEntry:
    return ManifestEntry(rec["label"], rec["video_id"], float(rec["start_s"]),
                         float(rec["end_s"]), rec["description"])


def video_from_record(rec: dict, fps: float, h: int = 64, w: int = 64) -> SyntheticVideo:
    """Regenerate the video for a manifest record (same bits on any machine)."""
    spec = SceneSpec.from_dict(rec["spec"])
    length_s = float(rec["end_s"]) - float(rec["start_s"])
    inject = None
    if rec["annotations"]:
        a = AnomalyAnnotation.from_dict(rec["annotations"][0])
        inject = AnomalyRequest(a.kind, a.onset_frame / fps,
                                (a.offset_frame - a.onset_frame) / fps)
    video, _, _ = generate(spec, int(rec["seed"]), length_s, fps, inject, h=h, w=w)
    return video
