"""Flat key=value run configuration.

Every key has a documented default below; unknown keys in a config file are
fatal. Values are parsed to the type of the default ('true'/'false'/0/1 for
booleans). Defaults are pinned for the reproducible desk-scale benchmark and
none of them come from the study being reproduced unless stated in README.
"""
from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class Config:
    # run
    seed: int = 7
    out_dir: str = "runs/default"
    threads: int = 1

    # scene generation
    frame_size: int = 64
    fps: float = 10.0
    train_videos_per_scene: int = 3
    eval_normal_per_scene: int = 2
    eval_anomaly_per_scene: int = 2
    train_length_s: float = 6.0
    eval_length_s: float = 8.0

    # sampler
    tsf_frames: int = 8
    tsf_res: int = 32
    dpc_frames: int = 30
    dpc_res: int = 32
    jitter_train: bool = True
    jitter_eval: bool = False

    # encoders
    patch: int = 8
    d_v: int = 64
    d_z: int = 64
    d_text: int = 64
    tsf_blocks: int = 2
    dpc_block_frames: int = 5
    warmup_steps: int = 30
    warmup_batch: int = 4
    warmup_lr: float = 1e-3

    # projection head
    d_embed: int = 64
    proj_hidden: int = 256
    proj_blocks: int = 4
    dropout: float = 0.1

    # context gate
    d_c: int = 32
    use_gate: bool = True

    # predictor
    d_h: int = 64
    horizons: int = 3

    # losses
    alpha: float = 0.2
    tau: float = 0.07
    gamma: float = 0.5
    neg_cap: int = 64
    use_dpc: bool = True
    use_residual_mlp: bool = True

    # trainer
    steps: int = 300
    batch_size: int = 8
    lr: float = 2e-3
    rms_rho: float = 0.9
    rms_eps: float = 1e-8
    spot_check: bool = True

    # inference
    window_s: float = 3.0
    stride_s: float = 1.0
    fuse_lambda: float = 0.1
    target_fpr: float = 0.1
    min_duration_s: float = 0.5


_FIELDS = {f.name: f.type for f in fields(Config)}


def _parse_value(name: str, raw: str, kind: type):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {name}: cannot parse boolean from {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def load_config(path: str | None, overrides: dict | None = None) -> Config:
    """Read ``key=value`` lines ('#' comments allowed); unknown keys are fatal."""
    cfg = Config()
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, raw = line.split("=", 1)
                key = key.strip()
                if not hasattr(cfg, key):
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                setattr(cfg, key, _parse_value(key, raw, type(getattr(cfg, key))))
    for key, value in (overrides or {}).items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg
