"""Weighted noise-robust classification losses.

Everything here works on probability vectors over the two dominance classes
(index 0 = left, 1 = right) but is written for arbitrary K and batches: any
array shaped ``(..., K)`` is accepted and the loss comes back shaped
``(...)``.

The family, for predicted distribution p and target distribution q with
class weights w (wn = sum_k w_k q_k):

    ce   = -(1/wn) * sum_k w_k q_k log p_k
    nce  =  [(1/wn) * sum_k w_k q_k log p_k] / [sum_k log p_k]
    rce  = -(1/wn) * sum_k w_k p_k log max(q_k, q_floor)
    sce  = alpha * ce  + beta * rce
    nsce = alpha * nce + beta * rce

nce's denominator is the unweighted sum of log-probabilities (the sum of
one-hot cross entropies over all classes), which keeps the ratio in (0, 1).
All five are non-negative quantities to minimize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights; defaults counter the right-dominant majority."""

    left: float = 0.72
    right: float = 0.28

    def __post_init__(self) -> None:
        if self.left <= 0 or self.right <= 0:
            raise ValueError("class weights must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.left, self.right], dtype=np.float64)


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.3
    beta: float = 0.7
    q_floor: float = math.exp(-4.0)
    smoothing: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if not 0 < self.q_floor < 1:
            raise ValueError("q_floor must lie in (0, 1)")
        if not 0 <= self.smoothing < 1:
            raise ValueError("smoothing must lie in [0, 1)")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis, clamped away from 0 and 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def one_hot(label: int | np.ndarray, k: int = 2) -> np.ndarray:
    """Target distribution(s) for integer class labels."""
    idx = np.asarray(label)
    out = np.zeros(idx.shape + (k,), dtype=np.float64)
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def smooth_targets(q: np.ndarray, smoothing: float) -> np.ndarray:
    """Blend targets toward uniform: q <- (1 - eps) * q + eps / K."""
    if smoothing == 0.0:
        return np.asarray(q, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    k = q.shape[-1]
    return (1.0 - smoothing) * q + smoothing / k


def _prep(p, q, weights):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    w = weights.as_array() if isinstance(weights, ClassWeights) else np.asarray(weights, np.float64)
    wn = (w * q).sum(axis=-1)
    return p, q, w, wn


def ce(p: np.ndarray, q: np.ndarray, weights: ClassWeights | np.ndarray) -> np.ndarray | float:
    """Weighted, weight-normalized cross entropy."""
    p, q, w, wn = _prep(p, q, weights)
    val = -(w * q * np.log(p)).sum(axis=-1) / wn
    return float(val) if val.ndim == 0 else val


def nce(p: np.ndarray, q: np.ndarray, weights: ClassWeights | np.ndarray) -> np.ndarray | float:
    """Normalized cross entropy: weighted ce over the sum of all one-hot ces.

    Both numerator and denominator are negative, so the value is positive
    and strictly inside (0, 1) for non-degenerate p.
    """
    p, q, w, wn = _prep(p, q, weights)
    logp = np.log(p)
    num = (w * q * logp).sum(axis=-1) / wn
    den = logp.sum(axis=-1)
    val = num / den
    return float(val) if val.ndim == 0 else val


def rce(
    p: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    q_floor: float = math.exp(-4.0),
) -> np.ndarray | float:
    """Reverse cross entropy with the target floored at q_floor inside the log."""
    p, q, w, wn = _prep(p, q, weights)
    val = -(w * p * np.log(np.maximum(q, q_floor))).sum(axis=-1) / wn
    return float(val) if val.ndim == 0 else val


def sce(
    p: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> np.ndarray | float:
    """Symmetric cross entropy: alpha * ce + beta * rce."""
    return cfg.alpha * ce(p, q, weights) + cfg.beta * rce(p, q, weights, cfg.q_floor)


def nsce(
    p: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> np.ndarray | float:
    """Normalized symmetric cross entropy: alpha * nce + beta * rce."""
    return cfg.alpha * nce(p, q, weights) + cfg.beta * rce(p, q, weights, cfg.q_floor)


LOSS_KINDS = ("ce", "sce", "nsce")


def loss_value(
    kind: str,
    logits: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> np.ndarray | float:
    """Loss of the given kind on softmax(logits); smoothing applied to q."""
    p = softmax(logits)
    q = smooth_targets(q, cfg.smoothing)
    if kind == "ce":
        return ce(p, q, weights)
    if kind == "sce":
        return sce(p, q, weights, cfg)
    if kind == "nsce":
        return nsce(p, q, weights, cfg)
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# Gradients with respect to logits.
#
# With p = softmax(z):  dL/dz_j = p_j * (g_j - sum_k g_k p_k), g_k = dL/dp_k.
# The probability clamp is treated as pass-through for gradients.


def _chain_through_softmax(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    inner = (g * p).sum(axis=-1, keepdims=True)
    return p * (g - inner)


def _dce_dp(p, q, w, wn):
    return -(w * q) / p / wn[..., None]


def _dnce_dp(p, q, w, wn):
    logp = np.log(p)
    num = (w * q * logp).sum(axis=-1, keepdims=True) / wn[..., None]
    den = logp.sum(axis=-1, keepdims=True)
    dnum = (w * q) / p / wn[..., None]
    dden = 1.0 / p
    return (dnum * den - num * dden) / (den * den)


def _drce_dp(p, q, w, wn, q_floor):
    return -(w * np.log(np.maximum(q, q_floor))) / wn[..., None]


def loss_grad(
    kind: str,
    logits: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> np.ndarray:
    """d(loss)/d(logits) for the composed loss-of-softmax.

    The gradient sums to zero over the logit axis (softmax is shift
    invariant), which makes a handy internal consistency check.
    """
    p = softmax(logits)
    q = smooth_targets(np.asarray(q, dtype=np.float64), cfg.smoothing)
    w = weights.as_array() if isinstance(weights, ClassWeights) else np.asarray(weights, np.float64)
    wn = (w * q).sum(axis=-1)
    if kind == "ce":
        g = _dce_dp(p, q, w, wn)
    elif kind == "sce":
        g = cfg.alpha * _dce_dp(p, q, w, wn) + cfg.beta * _drce_dp(p, q, w, wn, cfg.q_floor)
    elif kind == "nsce":
        g = cfg.alpha * _dnce_dp(p, q, w, wn) + cfg.beta * _drce_dp(p, q, w, wn, cfg.q_floor)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return _chain_through_softmax(p, g)


def nsce_grad(
    logits: np.ndarray,
    q: np.ndarray,
    weights: ClassWeights | np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> np.ndarray:
    """Analytic gradient of nsce(softmax(logits), q)."""
    return loss_grad("nsce", logits, q, weights, cfg)
