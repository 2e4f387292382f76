"""Show that the ranking metrics match closed forms and brute-force oracles.

The same oracles are frozen into the test suite; this demo walks through them
at a readable size.

Run from the repository root after `pip install -e .`:

    python demos/03_metric_oracles.py
"""
import numpy as np

from contextvad.metrics import LabeledScores, f1_at, pr_auc, roc_auc

rng = np.random.default_rng(0)

# ---------------------------------------------------- ROC-AUC == pair count
# ROC-AUC equals the probability that a random positive outranks a random
# negative (ties count half), so an O(n^2) pair count is an exact oracle.
scores = rng.normal(size=40)
labels = rng.integers(0, 2, size=40)
data = LabeledScores(scores, labels)

pos, neg = scores[labels == 1], scores[labels == 0]
pairs = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
oracle = pairs / (len(pos) * len(neg))
print(f"roc_auc {roc_auc(data):.12f} vs pair-count oracle {oracle:.12f} "
      f"(|diff| {abs(roc_auc(data) - oracle):.1e})")

# ------------------------------------------------- separable data, closed form
sep = LabeledScores(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1]))
print(f"perfectly separated: roc_auc={roc_auc(sep)} pr_auc={pr_auc(sep)}")
flipped = LabeledScores(sep.scores, 1 - sep.labels)
print(f"labels flipped:      roc_auc={roc_auc(flipped)}")

# ---------------------------------------------------------------- PR-AUC ties
# Average precision resolves ties pessimistically (tied negatives are ranked
# above tied positives), so repeated scores cannot inflate the number.
tied = LabeledScores(np.array([0.5, 0.5, 0.5, 0.1]), np.array([1, 0, 1, 0]))
# cut at 0.5: all three tied items retrieved; pessimistic order puts the
# negative first -> precisions at the two positives are 1/2 and 2/3.
expected = 0.5 * (1 / 2) + 0.5 * (2 / 3)
print(f"tied pr_auc {pr_auc(tied):.12f} vs hand enumeration {expected:.12f}")

# -------------------------------------------------------------------- F1 cut
cut = LabeledScores(np.array([0.9, 0.8, 0.3, 0.2]), np.array([1, 0, 1, 0]))
# threshold 0.5: tp=1 fp=1 fn=1 -> precision=recall=0.5 -> f1=0.5
print(f"f1 at 0.5 = {f1_at(cut, 0.5)} (hand count 0.5)")
