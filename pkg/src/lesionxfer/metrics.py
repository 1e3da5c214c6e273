"""ROC AUC, accuracy, average precision and the per-model/per-task report."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

MODELS = ("Scratch", "FeatureExtractor", "FineTune", "Hybrid")
TASK_IDS = ("task1", "task2")
METRIC_NAMES = ("AUC", "Test Acc", "Avg Prec")
DASH = "—"


@dataclass(frozen=True)
class ScoredSet:
    image_ids: tuple[str, ...]
    scores: np.ndarray
    labels: np.ndarray

    def __init__(self, image_ids, scores, labels):
        scores = np.asarray(scores, dtype=np.float64).ravel()
        labels = np.asarray(labels).ravel().astype(np.int64)
        if image_ids is None:
            width = len(str(max(len(scores) - 1, 0)))
            image_ids = [f"{i:0{width}d}" for i in range(len(scores))]
        image_ids = tuple(str(i) for i in image_ids)
        if not len(image_ids) == len(scores) == len(labels):
            raise DataError("image_ids, scores and labels must have equal lengths")
        if np.any((labels != 0) & (labels != 1)):
            raise DataError("labels must be 0 or 1")
        if not np.all(np.isfinite(scores)):
            raise DataError("scores must be finite")
        object.__setattr__(self, "image_ids", image_ids)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.scores)

    def flipped(self):
        return ScoredSet(self.image_ids, self.scores, 1 - self.labels)


def _as_scored(s, labels=None):
    if isinstance(s, ScoredSet):
        return s
    return ScoredSet(None, s, labels)


def midranks(values):
    """1-based ranks with tied values sharing the mean of their positions."""
    values = np.asarray(values)
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    n = len(values)
    ranks = np.empty(n, dtype=np.float64)
    # start index of each run of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + 1 + b) / 2.0
    return ranks


def roc_auc(s, labels=None) -> float:
    """Tie-aware AUC from the Mann-Whitney rank sum."""
    s = _as_scored(s, labels)
    pos = int(s.labels.sum())
    neg = len(s) - pos
    if pos == 0 or neg == 0:
        raise DataError("AUC needs at least one positive and one negative")
    rank_sum = math.fsum(midranks(s.scores)[s.labels == 1])
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def accuracy(s, labels=None, threshold=0.5) -> float:
    s = _as_scored(s, labels)
    if len(s) == 0:
        raise DataError("accuracy of an empty set is undefined")
    pred = (s.scores >= threshold).astype(np.int64)
    return int(np.sum(pred == s.labels)) / len(s)


def ranking(s: ScoredSet):
    """Indices by descending score, ties by ascending image id."""
    return sorted(range(len(s)), key=lambda i: (-s.scores[i], s.image_ids[i]))


def average_precision(s, labels=None) -> float:
    """Non-interpolated AP: sum over cutoffs of (R_k - R_{k-1}) * P_k."""
    s = _as_scored(s, labels)
    pos = int(s.labels.sum())
    if pos == 0:
        raise DataError("average precision needs at least one positive")
    y = s.labels[ranking(s)]
    tp = np.cumsum(y)
    k = np.arange(1, len(y) + 1)
    precision = tp / k
    recall = tp / pos
    gain = np.diff(np.r_[0.0, recall])
    return math.fsum(gain * precision)


# report --------------------------------------------------------------------


@dataclass
class EvalReport:
    cells: dict  # (model, task) -> {"AUC": x, "Test Acc": x, "Avg Prec": x}

    def columns(self):
        return [f"{t.capitalize()} {m}" for t in TASK_IDS for m in METRIC_NAMES]

    def rows(self):
        if not self.cells:
            return []
        out = []
        for model in MODELS:
            row = []
            for task in TASK_IDS:
                cell = self.cells.get((model, task))
                row += [None if cell is None else cell[m] for m in METRIC_NAMES]
            out.append((model, row))
        return out

    def render(self, digits=2) -> str:
        cols = self.columns()
        width = max(len(c) for c in cols)
        first = max(len(m) for m in MODELS)
        lines = [" " * first + "".join(f"  {c:>{width}}" for c in cols)]
        for model, row in self.rows():
            cells = [DASH if v is None else f"{v:.{digits}f}" for v in row]
            lines.append(f"{model:<{first}}" + "".join(f"  {c:>{width}}" for c in cells))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model"] + self.columns())
        for model, row in self.rows():
            w.writerow([model] + ["" if v is None else repr(float(v)) for v in row])
        return buf.getvalue()


def evaluate(s: ScoredSet, threshold=0.5):
    return {
        "AUC": roc_auc(s),
        "Test Acc": accuracy(s, threshold=threshold),
        "Avg Prec": average_precision(s),
    }


def build_report(results: dict) -> EvalReport:
    """``results`` maps (model, task) to a ScoredSet."""
    cells = {}
    for (model, task), s in results.items():
        if model not in MODELS or task not in TASK_IDS:
            raise DataError(f"unknown report cell ({model!r}, {task!r})")
        cells[(model, task)] = evaluate(s)
    return EvalReport(cells)
