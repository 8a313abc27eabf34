"""Classification metrics: accuracy, macro-F1 and rank-based binary AUC."""

from fractions import Fraction

import numpy as np
from scipy.stats import rankdata


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred))) if y_true.size else 0.0


def macro_f1(y_true, y_pred, num_classes: int) -> float:
    """Unweighted mean of per-class F1 over ``range(num_classes)``.

    A class with no true and no predicted members scores 0. The mean is taken
    over exact rationals and rounded once.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if num_classes < 1:
        return 0.0
    total = Fraction(0)
    for c in range(num_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        denom = int(np.sum(y_pred == c) + np.sum(y_true == c))
        if denom:
            total += Fraction(2 * tp, denom)
    return float(total / num_classes)


def auc(y_true, scores) -> float:
    """Mann-Whitney AUC of positive-class scores; ties count one half.

    Returns NaN when either class is missing.
    """
    y_true = np.asarray(y_true).astype(bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(y_true.sum())
    n_neg = y_true.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(scores)  # average ranks handle ties
    u = ranks[y_true].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))
