"""Train a small model on normal-only clips, then stream-score an eval video.

The run is deliberately tiny (a fraction of the default budget) so the demo
finishes in well under a minute; expect rough scores. For the full benchmark
use the CLI:

    contextvad gen   --out runs/default
    contextvad train --out runs/default
    contextvad eval  --out runs/default

Run from the repository root after `pip install -e .`:

    python demos/02_train_and_score.py
"""
from dataclasses import replace

import numpy as np

from contextvad.config import Config
from contextvad.corpus import build_eval_records, build_train_records
from contextvad.evaluation import evaluate
from contextvad.model import Model, init_params
from contextvad.training import train, warmup_encoders

cfg = replace(Config(),
              train_videos_per_scene=1, eval_normal_per_scene=1,
              eval_anomaly_per_scene=1, steps=40, warmup_steps=10,
              spot_check=False)

train_records = build_train_records(cfg)
eval_records = build_eval_records(cfg)
print(f"train: {len(train_records)} normal clips; "
      f"eval: {len(eval_records)} clips "
      f"({sum(r['label'] == 'anomaly' for r in eval_records)} anomalous)")

# ---------------------------------------------------------------- training
model = Model(init_params(cfg), cfg)
warmup_encoders(model, train_records)   # frame-order task, then freeze
log = train(model, train_records)       # InfoNCE alignment + future prediction
first, last = log[0], log[-1]
print(f"loss: step 0 total={first[3]:.3f} -> step {last[0]} total={last[3]:.3f}")

# ------------------------------------------------------- streaming scoring
report, results, thresholds = evaluate(model, eval_records)
print(f"\npooled metrics over {len(results)} videos: "
      f"roc_auc={report.roc_auc:.3f} pr_auc={report.pr_auc:.3f}")

r = next(x for x in results if x.record["label"] == "anomaly")
theta = thresholds[r.record["spec"]["scene_id"]].theta
print(f"\ntrace for {r.record['video_id']} (scene theta {theta:.3f}):")
print(f"{'t (s)':>6} {'align':>7} {'pred_err':>9} {'fused':>7}  label")
for t, sa, sp, a, lb in zip(r.trace.times_s, r.trace.align,
                            r.trace.pred_err, r.trace.fused, r.labels):
    mark = "ANOMALY" if lb else ""
    print(f"{t:>6.1f} {sa:>7.3f} {sp:>9.3f} {a:>7.3f}  {mark}")

fused = np.asarray(r.trace.fused)
print(f"\nmean fused in anomalous windows {fused[r.labels == 1].mean():.3f} "
      f"vs normal windows {fused[r.labels == 0].mean():.3f}"
      if (r.labels == 0).any() else "")
