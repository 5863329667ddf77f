"""Classification metric suites and fold-level aggregation.

Binary tasks report AUROC, accuracy, NPV, PPV, sensitivity and specificity;
multi-class tasks report accuracy, macro/micro/weighted F1 and weighted
precision/recall. Ratios with a zero denominator are reported as 0.0 and
flagged. AUROC uses the rank method, which credits tied score pairs 0.5.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["auroc", "binary_metrics", "multiclass_metrics", "aggregate"]

BINARY_METRIC_NAMES = ["auroc", "accuracy", "npv", "ppv", "sensitivity", "specificity"]
MULTICLASS_METRIC_NAMES = [
    "accuracy",
    "f1_macro",
    "f1_micro",
    "f1_weighted",
    "precision",
    "recall",
]


def _average_ranks(scores):
    """1-based ranks with ties assigned the mean of their rank range."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels):
    """Area under the ROC curve via the rank statistic.

    ``labels`` are 0/1 with 1 the positive class. Returns ``None`` when only
    one class is present (AUROC undefined for that fold).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(scores)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _safe_ratio(num, den, flags, name):
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def binary_metrics(scores, labels, threshold=0.5):
    """Binary metric suite from positive-class scores.

    Predictions are positive when ``score >= threshold``. Returns a dict of
    the six metrics plus ``undefined`` (metric names whose denominator was
    zero, reported as 0.0) ; AUROC is ``None`` on a single-class fold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))

    flags: list[str] = []
    out = {
        "auroc": auroc(scores, labels),
        "accuracy": _safe_ratio(tp + tn, len(labels), flags, "accuracy"),
        "npv": _safe_ratio(tn, tn + fn, flags, "npv"),
        "ppv": _safe_ratio(tp, tp + fp, flags, "ppv"),
        "sensitivity": _safe_ratio(tp, tp + fn, flags, "sensitivity"),
        "specificity": _safe_ratio(tn, tn + fp, flags, "specificity"),
    }
    out["undefined"] = flags
    return out


def multiclass_metrics(probs, labels, class_count=None):
    """Multi-class metric suite from per-class probabilities (argmax rule).

    Macro averages run over all ``class_count`` classes; a class absent from
    both predictions and truth contributes F1 = 0 and is flagged. Weighted
    averages are support-weighted, so absent classes carry zero weight.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if class_count is None:
        class_count = probs.shape[1]
    pred = probs.argmax(axis=1)
    n = len(labels)

    support = np.bincount(labels, minlength=class_count).astype(np.float64)
    flags: list[str] = []
    precision = np.zeros(class_count)
    recall = np.zeros(class_count)
    f1 = np.zeros(class_count)
    for c in range(class_count):
        tp = int(np.sum((pred == c) & (labels == c)))
        fp = int(np.sum((pred == c) & (labels != c)))
        fn = int(np.sum((pred != c) & (labels == c)))
        if tp + fp + fn == 0:
            flags.append(f"class_{c}_absent")
            continue
        precision[c] = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall[c] = tp / (tp + fn) if tp + fn > 0 else 0.0
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])

    accuracy = float(np.mean(pred == labels)) if n else 0.0
    weights = support / support.sum() if support.sum() else support
    return {
        "accuracy": accuracy,
        "f1_macro": float(f1.mean()),
        "f1_micro": accuracy,  # identical for single-label prediction
        "f1_weighted": float((f1 * weights).sum()),
        "precision": float((precision * weights).sum()),
        "recall": float((recall * weights).sum()),
        "undefined": flags,
    }


def aggregate(fold_values):
    """Mean and sample standard deviation (n-1) per metric across folds.

    ``fold_values`` maps metric name to a list of per-fold values where
    ``None`` marks an undefined fold; those are excluded from the mean and
    counted in ``undefined_folds``.
    """
    out = {}
    for name, values in fold_values.items():
        defined = [v for v in values if v is not None]
        undefined = len(values) - len(defined)
        if not defined:
            out[name] = {
                "mean": None,
                "std": None,
                "per_fold": values,
                "undefined_folds": undefined,
            }
            continue
        mean = sum(defined) / len(defined)
        if len(defined) > 1 and any(v != defined[0] for v in defined):
            var = sum((v - mean) ** 2 for v in defined) / (len(defined) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0  # identical folds have exactly zero spread
        out[name] = {
            "mean": mean,
            "std": std,
            "per_fold": values,
            "undefined_folds": undefined,
        }
    return out
