"""Minimal SVG emission: score traces and ROC/PR curves.

SVG is text, diffable, and needs no imaging dependency. Axes are fixed-margin
with simple tick labels; that is all a batch report needs.
"""
from __future__ import annotations

import numpy as np

_W, _H, _M = 640, 360, 48


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=float)
    span = hi - lo if hi > lo else 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def line_plot(path, series, title="", x_label="", y_label="",
              y_range=None) -> None:
    """series: list of (xs, ys, label, color)."""
    xs_all = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    if y_range is not None:
        y_lo, y_hi = y_range
    else:
        y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W/2}" y="18" text-anchor="middle">{title}</text>',
             f'<line x1="{_M}" y1="{_H-_M}" x2="{_W-_M}" y2="{_H-_M}" stroke="black"/>',
             f'<line x1="{_M}" y1="{_M}" x2="{_M}" y2="{_H-_M}" stroke="black"/>',
             f'<text x="{_W/2}" y="{_H-10}" text-anchor="middle">{x_label}</text>',
             f'<text x="14" y="{_H/2}" text-anchor="middle" '
             f'transform="rotate(-90 14 {_H/2})">{y_label}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        xp = _M + frac * (_W - 2 * _M)
        yp = _H - _M - frac * (_H - 2 * _M)
        parts.append(f'<text x="{xp:.1f}" y="{_H-_M+16}" text-anchor="middle">'
                     f'{xv:.2f}</text>')
        parts.append(f'<text x="{_M-6}" y="{yp+4:.1f}" text-anchor="end">'
                     f'{yv:.2f}</text>')
    for i, (xs, ys, label, color) in enumerate(series):
        px = _scale(xs, x_lo, x_hi, _M, _W - _M)
        py = _scale(ys, y_lo, y_hi, _H - _M, _M)
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W-_M}" y="{_M + 14*i}" text-anchor="end" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def roc_points(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tp = np.concatenate([[0], np.cumsum(labels)])
    fp = np.concatenate([[0], np.cumsum(1 - labels)])
    return fp / max(fp[-1], 1), tp / max(tp[-1], 1)


def pr_points(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tp = np.cumsum(labels)
    ranks = np.arange(1, len(labels) + 1)
    precision = tp / ranks
    recall = tp / max(tp[-1], 1)
    return recall, precision
