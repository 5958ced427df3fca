"""Frame selection: learned informativeness gating and reference baselines.

The main method trains the small CNN to score each frame's informativeness
(is the vessel clearly filled with contrast agent), then gates frames by
score. Training views use per-class thresholds: right-dominant views keep
frames scoring >= 0.6, left-dominant >= 0.3, which tops up the minority
class with more (if noisier) frames. Test views use one unified threshold
of 0.55, falling back to the single best-scoring frame so a view is never
left empty.

Baselines: SSIM peak selection (frames around the maximum dissimilarity
from the pre-contrast first frame), discarding a fixed number of leading
frames, and using everything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from domvote import nnet
from domvote.dataio import CineView, Dominance
from domvote.losses import softmax


@dataclass(frozen=True)
class GatingPolicy:
    train_threshold_right: float = 0.6
    train_threshold_left: float = 0.3
    test_threshold: float = 0.55

    def __post_init__(self) -> None:
        for name in ("train_threshold_right", "train_threshold_left", "test_threshold"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def gate_train(
    scores: np.ndarray, dominance: Dominance, policy: GatingPolicy = GatingPolicy()
) -> list[int]:
    """Indices of frames passing the per-class training threshold. May be empty."""
    s = np.asarray(scores, dtype=np.float64)
    threshold = (
        policy.train_threshold_right
        if dominance is Dominance.RIGHT
        else policy.train_threshold_left
    )
    return [int(i) for i in np.nonzero(s >= threshold)[0]]


def gate_test(scores: np.ndarray, policy: GatingPolicy = GatingPolicy()) -> list[int]:
    """Indices passing the unified test threshold; best single frame if none do."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("gate_test needs at least one score")
    kept = np.nonzero(s >= policy.test_threshold)[0]
    if kept.size == 0:
        return [int(np.argmax(s))]
    return [int(i) for i in kept]


# ---------------------------------------------------------------------------
# SSIM and the peak-dissimilarity baseline


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    peak_window: int = 4


def _gaussian_kernel(window: int, sigma: float) -> np.ndarray:
    half = (window - 1) / 2.0
    coords = np.arange(window, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-mode weighted local means via sliding windows."""
    k = kernel.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean structural similarity with Gaussian-weighted local statistics.

    Inputs are 2-d intensity arrays on the 0..255 scale and must share
    dimensions at least the window size. Identical inputs score exactly 1.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"ssim inputs differ in shape: {x.shape} vs {y.shape}")
    if min(x.shape) < cfg.window:
        raise ValueError(f"ssim needs images of at least {cfg.window}x{cfg.window}")
    kernel = _gaussian_kernel(cfg.window, cfg.sigma)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2

    mu_x = _windowed_mean(x, kernel)
    mu_y = _windowed_mean(y, kernel)
    var_x = _windowed_mean(x * x, kernel) - mu_x * mu_x
    var_y = _windowed_mean(y * y, kernel) - mu_y * mu_y
    cov = _windowed_mean(x * y, kernel) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim_select(view: CineView, cfg: SsimConfig = SsimConfig()) -> list[int]:
    """Frames around the SSIM trough relative to the first (pre-contrast) frame.

    The trough is where the view differs most from its contrast-free
    reference, i.e. peak opacification. Returns indices in
    [peak - peak_window, peak + peak_window] clipped to the view, so at
    most 2 * peak_window + 1 frames.
    """
    if len(view.frames) < 2:
        return [0]
    ref = view.frames[0].pixels
    sims = [ssim(ref, f.pixels, cfg) for f in view.frames[1:]]
    peak = 1 + int(np.argmin(sims))
    lo = max(0, peak - cfg.peak_window)
    hi = min(len(view.frames) - 1, peak + cfg.peak_window)
    return list(range(lo, hi + 1))


def discard_first(view: CineView, n: int = 20) -> list[int]:
    """Drop the first n frames; whole view if it is shorter than n + 1."""
    if len(view.frames) <= n:
        return list(range(len(view.frames)))
    return list(range(n, len(view.frames)))


def all_frames(view: CineView) -> list[int]:
    return list(range(len(view.frames)))


# ---------------------------------------------------------------------------
# Learned quality scoring


def frames_to_array(view: CineView, indices: list[int] | None = None) -> np.ndarray:
    """Stack (a subset of) a view's frames as float32 in [0, 1]."""
    frames = view.frames if indices is None else [view.frames[i] for i in indices]
    return np.stack([f.pixels for f in frames]).astype(np.float32) / 255.0


def train_quality_scorer(
    views: list[CineView],
    settings: nnet.TrainSettings,
    seed: int = 0,
    frame_stride: int = 1,
) -> nnet.ParamSet:
    """Train the informativeness scorer on views carrying generator truth.

    ``frame_stride`` subsamples each view's frames (every stride-th frame)
    purely to bound training cost; scoring always sees every frame. Raises
    if no frames are available or all labels agree, since a one-class
    scorer is useless.
    """
    images = []
    labels = []
    for view in views:
        if view.informative_truth is None:
            raise ValueError(f"view {view.view_id!r} has no informativeness truth")
        idx = list(range(0, len(view.frames), max(1, frame_stride)))
        images.append(frames_to_array(view, idx))
        labels.extend(int(view.informative_truth[i]) for i in idx)
    if not images:
        raise ValueError("quality scorer: empty training set")
    stacked = np.concatenate(images, axis=0)
    label_arr = np.asarray(labels, dtype=np.int64)
    if len(set(labels)) < 2:
        raise ValueError("quality scorer: training labels are single-class")
    params, _ = nnet.train_classifier(stacked, label_arr, settings, seed)
    return params


def score_frames(params: nnet.ParamSet, view: CineView) -> np.ndarray:
    """Informativeness score (probability of class 1) per frame."""
    logits = nnet.predict_logits(params, frames_to_array(view))
    return softmax(logits)[:, 1]
