"""Classification metrics and confidence margins.

Conventions: the positive class defaults to right dominance; any metric
whose denominator is zero is reported as 0.0 with ``degenerate`` set, so
aggregation code can surface the warning instead of crashing on tiny folds.

Two margin styles are reported everywhere: the spread margin ``t * sd``
(where individual runs land) and the mean margin ``t * sd / sqrt(n)``
(confidence in the mean), both at 95% two-sided with Student's t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from domvote.dataio import Dominance


class MetricValue(NamedTuple):
    value: float
    degenerate: bool


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    positive: Dominance = Dominance.RIGHT

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(
    predictions: Sequence[Dominance],
    truths: Sequence[Dominance],
    positive: Dominance = Dominance.RIGHT,
) -> ConfusionCounts:
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not predictions:
        raise ValueError("confusion of an empty prediction list")
    tp = fp = tn = fn = 0
    for pred, true in zip(predictions, truths):
        if pred is positive:
            if true is positive:
                tp += 1
            else:
                fp += 1
        else:
            if true is positive:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn, positive=positive)


def _ratio(num: int, den: int) -> MetricValue:
    if den == 0:
        return MetricValue(0.0, True)
    return MetricValue(num / den, False)


def recall(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp, c.tp + c.fn)


def precision(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp, c.tp + c.fp)


def f1(c: ConfusionCounts) -> MetricValue:
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def accuracy(c: ConfusionCounts) -> MetricValue:
    return _ratio(c.tp + c.tn, c.total)


def macro(left: float, right: float) -> float:
    """Unweighted two-class mean, e.g. recall_macro or f1_macro."""
    return (left + right) / 2.0


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation; 0.0 whenever a marginal is empty."""
    factors = (
        (c.tp + c.fp),
        (c.tp + c.fn),
        (c.tn + c.fp),
        (c.tn + c.fn),
    )
    if any(f == 0 for f in factors):
        return 0.0
    num = c.tp * c.tn - c.fp * c.fn
    return num / math.sqrt(math.prod(float(f) for f in factors))


def roc_auc(scores: Sequence[float], truths: Sequence[Dominance | int]) -> float:
    """Area under the ROC curve via average ranks (Mann-Whitney).

    ``truths`` may be Dominance labels (right = positive) or 0/1 ints.
    Tied scores receive the average of their rank range, which matches the
    O(n^2) pairwise count with half credit for ties.
    """
    y = np.array(
        [t.index if isinstance(t, Dominance) else int(t) for t in truths], dtype=np.int64
    )
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError(f"{s.shape[0]} scores for {y.shape[0]} truths")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    pos_rank_sum = ranks[y == 1].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# Two-sided 95% Student t quantiles, df 1..30; the normal value serves beyond.
_T_TABLE_95 = (
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
)
_NORMAL_95 = 1.960


def t_quantile(df: int, level: float = 0.95) -> float:
    if level != 0.95:
        raise ValueError("only the 95% level is tabulated")
    if df < 1:
        raise ValueError("t quantile needs df >= 1")
    if df <= len(_T_TABLE_95):
        return _T_TABLE_95[df - 1]
    return _NORMAL_95


@dataclass(frozen=True)
class IntervalEstimate:
    mean: float
    spread_margin: float
    mean_margin: float
    n: int
    level: float = 0.95


def ci_margin(samples: Sequence[float], level: float = 0.95) -> IntervalEstimate:
    """Mean with both margin styles from the sample standard deviation."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 2:
        raise ValueError("ci_margin needs at least two samples")
    sd = float(x.std(ddof=1))
    t = t_quantile(x.size - 1, level)
    spread = t * sd
    return IntervalEstimate(
        mean=float(x.mean()),
        spread_margin=spread,
        mean_margin=spread / math.sqrt(x.size),
        n=int(x.size),
        level=level,
    )


@dataclass(frozen=True)
class MetricsReport:
    """Per-class and macro view of one evaluation, plus frame-level AUC."""

    recall_left: float
    recall_right: float
    precision_left: float
    precision_right: float
    recall_macro: float
    f1_macro: float
    accuracy: float
    mcc: float
    frame_roc_auc: float
    n_views: int
    degenerate: tuple[str, ...] = ()

    FIELDS = (
        "recall_left", "recall_right", "precision_left", "precision_right",
        "recall_macro", "f1_macro", "accuracy", "mcc", "frame_roc_auc",
    )


def build_report(
    view_predictions: Sequence[Dominance],
    view_truths: Sequence[Dominance],
    frame_scores: Sequence[float] = (),
    frame_truths: Sequence[Dominance | int] = (),
) -> MetricsReport:
    """Assemble the standard report from view-level and frame-level results."""
    c_right = confusion(view_predictions, view_truths, positive=Dominance.RIGHT)
    c_left = confusion(view_predictions, view_truths, positive=Dominance.LEFT)
    flags: list[str] = []

    def track(name: str, mv: MetricValue) -> float:
        if mv.degenerate:
            flags.append(name)
        return mv.value

    rec_l = track("recall_left", recall(c_left))
    rec_r = track("recall_right", recall(c_right))
    prec_l = track("precision_left", precision(c_left))
    prec_r = track("precision_right", precision(c_right))
    f1_l = track("f1_left", f1(c_left))
    f1_r = track("f1_right", f1(c_right))
    acc = track("accuracy", accuracy(c_right))
    frame_y = {t.index if isinstance(t, Dominance) else int(t) for t in frame_truths}
    if len(frame_scores) and len(frame_y) == 2:
        auc = roc_auc(frame_scores, frame_truths)
    else:
        # No frames, or every frame from one class (possible when a fold's
        # labels are overridden with the hidden truth): AUC is undefined.
        flags.append("frame_roc_auc")
        auc = 0.0
    return MetricsReport(
        recall_left=rec_l,
        recall_right=rec_r,
        precision_left=prec_l,
        precision_right=prec_r,
        recall_macro=macro(rec_l, rec_r),
        f1_macro=macro(f1_l, f1_r),
        accuracy=acc,
        mcc=mcc(c_right),
        frame_roc_auc=auc,
        n_views=len(view_predictions),
        degenerate=tuple(flags),
    )
