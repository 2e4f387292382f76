"""Command-line harness: gen | train | eval | ablate.

Exit codes: 0 success, 1 usage or environment error, 2 contract violation
(an anomaly-labeled entry in the training manifest).

All commands are deterministic under --seed; execution is single-threaded
regardless of --threads (the flag is accepted for interface stability and
bit-reproducibility is the default).
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from collections import Counter
from dataclasses import replace

import numpy as np

from .config import Config, load_config
from .corpus import build_eval_records, build_train_records
from .evaluation import evaluate, write_report
from .model import Model, init_params
from .plots import line_plot, pr_points, roc_points
from .scenes import read_manifest, write_manifest
from .training import ContractViolation, train, warmup_encoders

# Each ablation rung toggles one factor on top of the previous one; training
# budget, corpus and seed are shared across rungs.
ABLATION_VARIANTS = {
    "B1": dict(use_dpc=False, gamma=1.0, alpha=1.0,
               use_residual_mlp=False, use_gate=False),
    "B2": dict(use_dpc=True, gamma=0.5, alpha=0.8,
               use_residual_mlp=False, use_gate=False),
    "B3": dict(use_dpc=True, gamma=0.5, alpha=0.2,
               use_residual_mlp=False, use_gate=False),
    "B4": dict(use_dpc=True, gamma=0.5, alpha=0.2,
               use_residual_mlp=True, use_gate=False),
    "B5": dict(use_dpc=True, gamma=0.5, alpha=0.2,
               use_residual_mlp=True, use_gate=True),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="contextvad",
                     description="context-aware zero-shot anomaly detection "
                                 "on synthetic surveillance scenes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("gen", "generate the synthetic corpus manifests"),
                      ("train", "train on the normal-only corpus"),
                      ("eval", "calibrate, score and report on the eval split"),
                      ("ablate", "run the B1..B5 ablation ladder")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface stability; execution is "
                            "sequential either way")
        if name == "eval":
            p.add_argument("--checkpoint", help="trained checkpoint (.npz)")
            p.add_argument("--oracle-scores", action="store_true",
                           help="debug: replace fused scores with ground-truth "
                                "labels to verify report plumbing")
    return parser


def _config_from(args) -> Config:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return load_config(args.config, overrides)


def _manifest_paths(cfg: Config) -> tuple[str, str]:
    return (os.path.join(cfg.out_dir, "train_manifest.jsonl"),
            os.path.join(cfg.out_dir, "eval_manifest.jsonl"))


def cmd_gen(cfg: Config) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    train_recs = build_train_records(cfg)
    eval_recs = build_eval_records(cfg)
    train_path, eval_path = _manifest_paths(cfg)
    write_manifest(train_path, train_recs)
    write_manifest(eval_path, eval_recs)
    for split, recs in (("train", train_recs), ("eval", eval_recs)):
        by_label = Counter(r["label"] for r in recs)
        by_scene = Counter(r["spec"]["scene_id"] for r in recs)
        print(f"{split}: {len(recs)} entries, labels {dict(by_label)}, "
              f"{len(by_scene)} scenes")
    print(f"wrote {train_path} and {eval_path}")
    return 0


def _trained_model(cfg: Config, records: list[dict]) -> Model:
    params = init_params(cfg)
    model = Model(params, cfg)
    warmup_encoders(model, records)
    train(model, records,
          log_path=os.path.join(cfg.out_dir, "loss_log.csv"),
          checkpoint_path=os.path.join(cfg.out_dir, "checkpoint.npz"),
          best_path=os.path.join(cfg.out_dir, "checkpoint_best.npz"))
    return model


def cmd_train(cfg: Config) -> int:
    train_path, _ = _manifest_paths(cfg)
    if not os.path.exists(train_path):
        print(f"error: training manifest not found: {train_path}", file=sys.stderr)
        return 1
    records = read_manifest(train_path)
    _trained_model(cfg, records)
    print(f"wrote {os.path.join(cfg.out_dir, 'checkpoint.npz')} and loss_log.csv")
    return 0


def cmd_eval(cfg: Config, checkpoint: str | None, oracle_scores: bool) -> int:
    _, eval_path = _manifest_paths(cfg)
    if not os.path.exists(eval_path):
        print(f"error: eval manifest not found: {eval_path}", file=sys.stderr)
        return 1
    checkpoint = checkpoint or os.path.join(cfg.out_dir, "checkpoint.npz")
    if not os.path.exists(checkpoint):
        print(f"error: checkpoint not found: {checkpoint}", file=sys.stderr)
        return 1
    records = read_manifest(eval_path)
    model = Model.load(checkpoint, cfg)
    if oracle_scores:
        from .evaluation import score_corpus, window_labels
        results = score_corpus(model, records)
        for r in results:
            r.trace.fused = [float(x) for x in r.labels]
        from .evaluation import calibrate_scenes
        from .metrics import LabeledScores, MetricReport, pr_auc, roc_auc
        labels = np.concatenate([r.labels for r in results])
        scores = np.concatenate([np.asarray(r.trace.fused) for r in results])
        pooled = LabeledScores(scores, labels)
        report = MetricReport(roc_auc(pooled), pr_auc(pooled), 1.0, 1.0, 0.0)
        thresholds = None
    else:
        report, results, thresholds = evaluate(model, records)
    eval_dir = os.path.join(cfg.out_dir, "eval")
    write_report(eval_dir, report, results)
    trace_dir = os.path.join(eval_dir, "traces")
    plot_dir = os.path.join(eval_dir, "plots")
    os.makedirs(trace_dir, exist_ok=True)
    os.makedirs(plot_dir, exist_ok=True)
    for r in results:
        vid = r.record["video_id"]
        r.trace.write_csv(os.path.join(trace_dir, f"{vid}.csv"))
        line_plot(os.path.join(plot_dir, f"{vid}.svg"),
                  [(r.trace.times_s, r.trace.fused, "fused", "#c02020"),
                   (r.trace.times_s, r.trace.align, "align", "#2050c0"),
                   (r.trace.times_s, r.trace.pred_err, "pred_err", "#20a040")],
                  title=vid, x_label="time (s)", y_label="score")
    labels = np.concatenate([r.labels for r in results])
    # curves use the same per-scene theta shift as the pooled metrics
    scores = np.concatenate([
        np.asarray(r.trace.fused)
        - (thresholds[r.record["spec"]["scene_id"]].theta if thresholds else 0.0)
        for r in results])
    fpr, tpr = roc_points(scores, labels)
    line_plot(os.path.join(plot_dir, "roc.svg"), [(fpr, tpr, "roc", "#c02020")],
              title="ROC", x_label="false positive rate",
              y_label="true positive rate", y_range=(0, 1))
    rec, prec = pr_points(scores, labels)
    line_plot(os.path.join(plot_dir, "pr.svg"), [(rec, prec, "pr", "#2050c0")],
              title="precision-recall", x_label="recall", y_label="precision",
              y_range=(0, 1))
    print(f"roc_auc={report.roc_auc:.4f} pr_auc={report.pr_auc:.4f} "
          f"f1={report.f1:.4f} map={report.map:.4f} "
          f"delay={report.mean_detection_delay_s:.2f}s")
    print(f"report written to {eval_dir}")
    return 0


def run_variant(cfg: Config, variant: str, train_recs: list[dict],
                eval_recs: list[dict]) -> dict:
    """Train and evaluate one ablation rung with the shared budget and seed."""
    toggles = ABLATION_VARIANTS[variant]
    vcfg = replace(cfg, out_dir=os.path.join(cfg.out_dir, f"ablate_{variant}"),
                   **toggles)
    os.makedirs(vcfg.out_dir, exist_ok=True)
    model = _trained_model(vcfg, train_recs)
    report, _, _ = evaluate(model, eval_recs)
    row = {"variant": variant}
    row.update(toggles)
    row.update({"roc_auc": round(report.roc_auc, 6),
                "pr_auc": round(report.pr_auc, 6)})
    return row


def cmd_ablate(cfg: Config) -> int:
    train_path, eval_path = _manifest_paths(cfg)
    for path in (train_path, eval_path):
        if not os.path.exists(path):
            print(f"error: manifest not found: {path}", file=sys.stderr)
            return 1
    train_recs = read_manifest(train_path)
    eval_recs = read_manifest(eval_path)
    rows, failed = [], False
    for variant in ("B1", "B2", "B3", "B4", "B5"):
        try:
            rows.append(run_variant(cfg, variant, train_recs, eval_recs))
        except ContractViolation:
            raise
        except Exception as exc:  # a failed rung is reported, not fatal mid-table
            failed = True
            row = {"variant": variant}
            row.update(ABLATION_VARIANTS[variant])
            row.update({"roc_auc": "failed", "pr_auc": "failed"})
            rows.append(row)
            print(f"{variant} failed: {exc}", file=sys.stderr)
    fieldnames = ["variant", "use_dpc", "gamma", "alpha", "use_residual_mlp",
                  "use_gate", "roc_auc", "pr_auc"]
    out_path = os.path.join(cfg.out_dir, "ablation.csv")
    with open(out_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)
    header = " | ".join(f"{f:>16}" for f in fieldnames)
    print(header)
    print("-" * len(header))
    for row in rows:
        print(" | ".join(f"{str(row[f]):>16}" for f in fieldnames))
    print(f"wrote {out_path}")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from(args)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.oracle_scores)
        if args.command == "ablate":
            return cmd_ablate(cfg)
        return 1
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
