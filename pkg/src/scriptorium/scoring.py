"""Patch-to-line-to-page score aggregation and the reject option."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

DEFAULT_THRESHOLD = 0.40
UNRELIABLE_THRESHOLD = 0.60


@dataclass(frozen=True)
class LineScore:
    score: np.ndarray
    num_patches: int
    line_id: str = ""


@dataclass(frozen=True)
class Decision:
    label: int | None  # None means rejected
    confidence: float
    threshold: float

    @property
    def accepted(self) -> bool:
        return self.label is not None


def _as_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need a non-empty sequence of equal-length score vectors")
    return arr


def line_score(patch_scores, line_id: str = "") -> LineScore:
    """Mean of the patch softmax vectors of one line."""
    arr = _as_scores(patch_scores)
    return LineScore(arr.mean(axis=0), arr.shape[0], line_id)


def page_score(line_scores: Sequence[LineScore], rule: str = "mean") -> np.ndarray:
    """Page vector from its lines.

    ``rule="mean"`` weights each line by its patch count, which equals the
    flat mean over every patch on the page. ``rule="vote"`` returns the
    normalized histogram of line argmaxes instead.
    """
    if len(line_scores) == 0:
        raise ValueError("page has no lines")
    stacked = _as_scores([ls.score for ls in line_scores])
    if rule == "vote":
        votes = np.bincount(stacked.argmax(axis=1), minlength=stacked.shape[1]).astype(np.float64)
        return votes / votes.sum()
    if rule != "mean":
        raise ValueError(f"unknown page rule {rule!r}")
    weights = np.array([ls.num_patches for ls in line_scores], dtype=np.float64)
    return weights @ stacked / weights.sum()


def decide(score, threshold: float = DEFAULT_THRESHOLD,
           class_thresholds: Mapping[int, float] | None = None) -> Decision:
    """Accept the argmax class if its probability reaches the threshold.

    ``class_thresholds`` overrides the threshold for specific predicted classes.
    """
    score = np.asarray(score, dtype=np.float64)
    label = int(np.argmax(score))  # first index wins ties
    conf = float(score[label])
    t = threshold
    if class_thresholds and label in class_thresholds:
        t = class_thresholds[label]
    if conf >= t:
        return Decision(label, conf, t)
    return Decision(None, conf, t)


def threshold_grid(step: float = 0.01) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.round(np.arange(n + 1) * step, 10)


def error_reject_curve(scores, labels, thresholds=None) -> list[tuple[float, float, float]]:
    """(threshold, reject rate, error rate among accepted) per grid point.

    The error rate is 0 when nothing is accepted.
    """
    arr = _as_scores(scores)
    labels = np.asarray(labels)
    thresholds = threshold_grid() if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    conf = arr.max(axis=1)
    wrong = arr.argmax(axis=1) != labels
    rows = []
    for t in thresholds:
        accepted = conf >= t
        n_acc = int(accepted.sum())
        reject_rate = 1.0 - n_acc / len(conf)
        error_rate = float(wrong[accepted].sum() / n_acc) if n_acc else 0.0
        rows.append((float(t), reject_rate, error_rate))
    return rows


def write_curve_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "reject_rate", "error_rate"])
        for t, r, e in rows:
            writer.writerow([f"{t:.2f}", f"{r:.6f}", f"{e:.6f}"])
