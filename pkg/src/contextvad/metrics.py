"""Frame- and event-level evaluation metrics.

ROC-AUC is the exact Mann-Whitney statistic (ties get half credit), computed
with a rank sweep. PR-AUC is step-interpolated average precision. mAP averages
per-video average precision over videos that contain at least one positive.
Detection delay penalizes missed events with their full duration so the metric
stays finite. Each of these has an O(n^2) / enumeration oracle in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass
class LabeledScores:
    scores: np.ndarray
    labels: np.ndarray  # 0/1

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.shape != self.labels.shape:
            raise ValueError("scores and labels must have equal length")


def roc_auc(data: LabeledScores) -> float:
    """P(score_pos > score_neg) + 0.5 * P(tie)."""
    pos = int(data.labels.sum())
    neg = len(data.labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("roc_auc needs both classes")
    ranks = rankdata(data.scores)  # average ranks handle ties
    rank_sum = ranks[data.labels == 1].sum()
    return float((rank_sum - pos * (pos + 1) / 2.0) / (pos * neg))


def pr_auc(data: LabeledScores) -> float:
    """Step-interpolated average precision (descending-score sweep).

    Ties are resolved pessimistically against the classifier: within a tied
    score group, negatives are ranked ahead of positives.
    """
    pos = int(data.labels.sum())
    if pos == 0:
        raise ValueError("pr_auc needs at least one positive")
    order = np.lexsort((data.labels, -data.scores))
    labels = data.labels[order]
    hits = np.cumsum(labels)
    ranks = np.arange(1, len(labels) + 1)
    precision = hits / ranks
    return float(precision[labels == 1].sum() / pos)


def f1_at(data: LabeledScores, theta: float) -> float:
    """F1 with predicted-positive = score > theta; 0 when nothing is predicted."""
    pred = data.scores > theta
    tp = int(np.sum(pred & (data.labels == 1)))
    fp = int(np.sum(pred & (data.labels == 0)))
    fn = int(np.sum(~pred & (data.labels == 1)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def map_over_videos(per_video: list[LabeledScores]) -> tuple[float, int]:
    """Mean per-video AP; videos without positives are excluded.

    Returns (mAP, number of excluded videos).
    """
    aps, excluded = [], 0
    for video in per_video:
        if video.labels.sum() == 0:
            excluded += 1
            continue
        aps.append(pr_auc(video))
    if not aps:
        raise ValueError("every video was excluded from mAP")
    return float(np.mean(aps)), excluded


def detection_delay(events_pred: list[tuple[float, float]],
                    events_true: list[tuple[float, float]]) -> float:
    """Mean seconds from each true onset to the first overlapping flag.

    A true event no flag overlaps contributes its full duration (miss
    penalty). Flags that begin before the onset but overlap count as zero
    delay.
    """
    if not events_true:
        raise ValueError("detection delay needs ground-truth events")
    delays = []
    for t_on, t_off in events_true:
        overlapping = [p_on for p_on, p_off in events_pred
                       if p_on < t_off and p_off > t_on]
        if overlapping:
            delays.append(max(0.0, min(overlapping) - t_on))
        else:
            delays.append(t_off - t_on)
    return float(np.mean(delays))


@dataclass
class MetricReport:
    roc_auc: float
    pr_auc: float
    f1: float
    map: float
    mean_detection_delay_s: float
    excluded_videos: int = 0

    def as_row(self) -> dict:
        return {"roc_auc": self.roc_auc, "pr_auc": self.pr_auc, "f1": self.f1,
                "map": self.map,
                "mean_detection_delay_s": self.mean_detection_delay_s}
