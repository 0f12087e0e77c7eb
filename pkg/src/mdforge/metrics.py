"""Confusion matrices and per-class precision / recall / F1."""

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConfusionMatrix:
    """``counts[i, j]``: samples of true class ``i`` predicted as ``j``."""

    counts: np.ndarray
    class_names: list

    @property
    def total(self):
        return int(self.counts.sum())

    def true_positives(self, k):
        return int(self.counts[k, k])

    def false_positives(self, k):
        return int(self.counts[:, k].sum() - self.counts[k, k])

    def false_negatives(self, k):
        return int(self.counts[k, :].sum() - self.counts[k, k])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["true\\pred"] + list(self.class_names))
            for name, row in zip(self.class_names, self.counts):
                writer.writerow([name] + [int(v) for v in row])


def confusion(true_labels, predicted_labels, n_classes, class_names=None):
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(predicted_labels, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ValueError("label sequences differ in length")
    for name, arr in (("true", t), ("predicted", p)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"{name} label outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    names = list(class_names) if class_names is not None else [str(i) for i in range(n_classes)]
    return ConfusionMatrix(counts, names)


def precision(cm, k):
    """TP / (TP + FP); 0 when class ``k`` is never predicted."""
    tp = cm.true_positives(k)
    denom = tp + cm.false_positives(k)
    return tp / denom if denom else 0.0


def recall(cm, k):
    """TP / (TP + FN); 0 when class ``k`` never occurs."""
    tp = cm.true_positives(k)
    denom = tp + cm.false_negatives(k)
    return tp / denom if denom else 0.0


def f1(p, r):
    return 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0


@dataclass
class ClassMetrics:
    class_names: list
    precision: list
    recall: list
    f1: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    # classes whose precision or recall fell back to 0 on an empty denominator
    undefined: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["class", "precision", "recall", "f1"])
            for row in zip(self.class_names, self.precision, self.recall, self.f1):
                writer.writerow([row[0]] + [f"{v:.3f}" for v in row[1:]])
            writer.writerow(["macro"] + [f"{v:.3f}" for v in (self.macro_precision, self.macro_recall, self.macro_f1)])
            writer.writerow(["accuracy", f"{self.accuracy:.3f}", "", ""])


def report(cm):
    if cm.counts.size == 0 or cm.total == 0:
        raise ValueError("cannot report on an empty confusion matrix")
    k = cm.counts.shape[0]
    ps = [precision(cm, i) for i in range(k)]
    rs = [recall(cm, i) for i in range(k)]
    fs = [f1(p, r) for p, r in zip(ps, rs)]
    undefined = [
        cm.class_names[i]
        for i in range(k)
        if cm.counts[:, i].sum() == 0 or cm.counts[i, :].sum() == 0
    ]
    return ClassMetrics(
        class_names=list(cm.class_names),
        precision=ps,
        recall=rs,
        f1=fs,
        macro_precision=float(np.mean(ps)),
        macro_recall=float(np.mean(rs)),
        macro_f1=float(np.mean(fs)),
        accuracy=float(np.trace(cm.counts)) / cm.total,
        undefined=undefined,
    )
