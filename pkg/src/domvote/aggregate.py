"""Frame-to-view and view-to-study vote aggregation.

A view is classified by summing the raw logits of its selected frames and
taking the argmax; a study by summing those per-view sums over its RCA
views. Ties break toward right dominance, the majority class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from domvote.dataio import Artery, Dominance


@dataclass(frozen=True)
class ViewPrediction:
    summed_logits: np.ndarray
    predicted: Dominance
    n_frames_used: int


@dataclass(frozen=True)
class StudyPrediction:
    summed_logits: np.ndarray
    predicted: Dominance
    n_views_used: int


def _argmax_label(summed: np.ndarray) -> Dominance:
    return Dominance.LEFT if summed[0] > summed[1] else Dominance.RIGHT


def view_predict(frame_logits: np.ndarray) -> ViewPrediction:
    """Sum logits over a view's selected frames and take the argmax.

    ``frame_logits`` has shape (n_frames, 2) with at least one row.
    """
    logits = np.asarray(frame_logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ValueError(f"expected (n, 2) frame logits, got shape {logits.shape}")
    if logits.shape[0] == 0:
        raise ValueError("view_predict needs at least one frame")
    summed = logits.sum(axis=0)
    return ViewPrediction(
        summed_logits=summed,
        predicted=_argmax_label(summed),
        n_frames_used=logits.shape[0],
    )


def study_predict(views: Iterable[tuple[Artery, ViewPrediction]]) -> StudyPrediction:
    """Combine per-view sums across the study's RCA views; LCA views are ignored."""
    total = np.zeros(2, dtype=np.float64)
    used = 0
    for artery, pred in views:
        if artery is not Artery.RCA:
            continue
        total += pred.summed_logits
        used += 1
    if used == 0:
        raise ValueError("study_predict needs at least one RCA view")
    return StudyPrediction(summed_logits=total, predicted=_argmax_label(total), n_views_used=used)


def subsample_majority(indices: Sequence[int], dominance: Dominance) -> list[int]:
    """Thin right-dominant training views to every second selected frame.

    Applied after gating and only at train time; left views pass through.
    Keeps positions 0, 2, 4, ... of the given index list, so n indices
    become ceil(n / 2).
    """
    idx = list(indices)
    if dominance is Dominance.RIGHT:
        return idx[::2]
    return idx
