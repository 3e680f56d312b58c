"""Confusion matrices and (weighted) F1 reports at patch, line and page level."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .scoring import DEFAULT_THRESHOLD, Decision, decide, line_score, page_score

log = logging.getLogger(__name__)

LEVELS = ("patch", "line", "page")


@dataclass
class ConfusionMatrix:
    """Rows are true classes, columns predictions; rejects are tallied separately."""

    counts: np.ndarray
    rejected: np.ndarray

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64), np.zeros(num_classes, dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum() + self.rejected.sum())

    def to_csv(self, path: str | Path, class_names: Sequence[str] | None = None) -> None:
        names = list(class_names or map(str, range(self.num_classes)))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true\\pred", *names, "REJECT"])
            for i, name in enumerate(names):
                writer.writerow([name, *self.counts[i].tolist(), int(self.rejected[i])])


def confusion(pairs, num_classes: int) -> ConfusionMatrix:
    """Tally ``(true label, Decision or predicted int)`` pairs."""
    cm = ConfusionMatrix.empty(num_classes)
    for true, pred in pairs:
        if isinstance(pred, Decision):
            pred = pred.label
        if pred is None:
            cm.rejected[true] += 1
        else:
            cm.counts[true, pred] += 1
    return cm


def confusion_from_arrays(true, pred, num_classes: int) -> ConfusionMatrix:
    cm = ConfusionMatrix.empty(num_classes)
    np.add.at(cm.counts, (np.asarray(true, dtype=np.intp), np.asarray(pred, dtype=np.intp)), 1)
    return cm


@dataclass
class MetricsReport:
    level: str
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    weighted_f1: float
    rejected: list[int] = field(default_factory=list)
    class_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_text(self) -> str:
        names = self.class_names or [str(i) for i in range(len(self.f1))]
        width = max(8, *(len(n) for n in names))
        lines = [f"level: {self.level}",
                 f"{'class':<{width}}  precision  recall     f1  support  rejected"]
        rejected = self.rejected or [0] * len(names)
        for i, name in enumerate(names):
            lines.append(f"{name:<{width}}  {self.precision[i]:9.4f}  {self.recall[i]:6.4f}  "
                         f"{self.f1[i]:6.4f}  {self.support[i]:7d}  {rejected[i]:8d}")
        lines.append(f"{'weighted':<{width}}  {'':9}  {'':6}  {self.weighted_f1:6.4f}  {sum(self.support):7d}")
        return "\n".join(lines) + "\n"


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def f1_report(cm: ConfusionMatrix, level: str = "patch", class_names=None) -> MetricsReport:
    """Per-class precision, recall, F1 (0/0 taken as 0) and the support-weighted F1.

    Rejected items carry no prediction and are left out of precision, recall
    and F1, but still count towards each class's support (and hence weight),
    so supports do not depend on the reject threshold.
    """
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    pred_tot = counts.sum(axis=0)
    true_tot = counts.sum(axis=1)
    precision = _safe_div(tp, pred_tot)
    recall = _safe_div(tp, true_tot)
    f1 = _safe_div(2 * tp, pred_tot + true_tot)
    support = true_tot + cm.rejected
    total = support.sum()
    weighted = float(f1 @ support / total) if total else 0.0
    return MetricsReport(
        level=level,
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        support=[int(s) for s in support],
        weighted_f1=weighted,
        rejected=[int(r) for r in cm.rejected],
        class_names=list(class_names or []),
    )


def weighted_f1(true, pred, num_classes: int) -> float:
    return f1_report(confusion_from_arrays(true, pred, num_classes)).weighted_f1


@dataclass
class LineSample:
    """A labeled line with its raw patches ``(N, C, H, W)``."""

    line_id: str
    label: int
    patches: np.ndarray
    page: str | None = None


@dataclass
class LevelResult:
    report: MetricsReport
    confusion: ConfusionMatrix


def evaluate_multilevel(score_fn, samples: Sequence[LineSample], num_classes: int,
                        threshold: float = DEFAULT_THRESHOLD, class_thresholds=None,
                        class_names=None, page_rule: str = "mean"):
    """Evaluate at patch, line and page level.

    ``score_fn`` maps a raw patch array to softmax scores (``predict_proba``
    with the model bound). Patches are judged by argmax; lines and pages go
    through the reject option. A page's true label is the majority label of
    its lines. Returns ``(results, line_scores)`` where ``results`` maps each
    level to a :class:`LevelResult` and ``line_scores`` is the list of
    ``(LineScore, label)`` pairs.
    """
    patch_cm = ConfusionMatrix.empty(num_classes)
    line_pairs = []
    line_scores = []
    pages: dict[str, list] = {}
    missing_page = 0
    for s in samples:
        probs = score_fn(s.patches)
        np.add.at(patch_cm.counts, (s.label, probs.argmax(axis=1)), 1)
        ls = line_score(probs, s.line_id)
        line_scores.append((ls, s.label))
        line_pairs.append((s.label, decide(ls.score, threshold, class_thresholds)))
        if s.page:
            pages.setdefault(s.page, []).append((ls, s.label))
        else:
            missing_page += 1
    if missing_page:
        log.warning("%d lines without page id excluded from page level", missing_page)
    page_pairs = []
    for key in sorted(pages):
        members = pages[key]
        labels = np.bincount([lbl for _, lbl in members], minlength=num_classes)
        vec = page_score([ls for ls, _ in members], rule=page_rule)
        page_pairs.append((int(labels.argmax()), decide(vec, threshold, class_thresholds)))
    line_cm = confusion(line_pairs, num_classes)
    page_cm = confusion(page_pairs, num_classes)
    results = {
        "patch": LevelResult(f1_report(patch_cm, "patch", class_names), patch_cm),
        "line": LevelResult(f1_report(line_cm, "line", class_names), line_cm),
        "page": LevelResult(f1_report(page_cm, "page", class_names), page_cm),
    }
    return results, line_scores
