"""Synthetic cine angiography with a planted dominance signal.

Each study gets a main vessel drawn as a smooth polyline plus side
branches; right-dominant studies get a wider trunk and an extra distal
(PDA-like) branch, left-dominant ones a thinner trunk and no such branch.
Vessels darken against a bright background in proportion to a per-frame
contrast level that ramps up, holds a plateau, and washes out over the
view, mimicking contrast agent flow. Occluded studies truncate the trunk
at a proximal point, erasing most of the distal evidence while keeping
their label; the occlusion tag is recorded only in the hidden truth
sidecar, as is the original label of any noise-flipped study.

Determinism: one master seed; every study renders from its own spawned
substream, so the same config always produces byte-identical output.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from domvote import dataio
from domvote.dataio import Artery, CineView, DataError, Dominance, Frame, Study

BACKGROUND = 200.0
VESSEL_AMPLITUDE = 150.0


@dataclass(frozen=True)
class ContrastProfile:
    """Fractions of the view spent ramping up, at plateau, and washing out.

    ``gamma`` shapes the ramps: contrast follows (t)**gamma, so gamma > 1
    keeps more of the ramp near zero (useful to plant many low-contrast
    frames). The first frame always has zero contrast and serves as the
    pre-injection reference.
    """

    ramp: float = 0.2
    plateau: float = 0.5
    washout: float = 0.3
    gamma: float = 1.0

    def __post_init__(self) -> None:
        total = self.ramp + self.plateau + self.washout
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"contrast profile fractions sum to {total}, expected 1")
        if self.plateau <= 0:
            raise ValueError("contrast plateau fraction must be positive")
        if self.gamma <= 0:
            raise ValueError("contrast gamma must be positive")


def contrast_levels(n_frames: int, profile: ContrastProfile) -> np.ndarray:
    """Per-frame contrast in [0, 1] following ramp/plateau/washout."""
    if n_frames < 3:
        raise ValueError("a view needs at least 3 frames for a contrast profile")
    n_ramp = round(profile.ramp * n_frames)
    n_wash = round(profile.washout * n_frames)
    n_plateau = n_frames - n_ramp - n_wash
    if n_plateau < 1:
        n_plateau, n_wash = 1, n_frames - n_ramp - 1
    levels = np.empty(n_frames, dtype=np.float64)
    for i in range(n_ramp):
        levels[i] = (i / n_ramp) ** profile.gamma
    levels[n_ramp : n_ramp + n_plateau] = 1.0
    for j in range(n_wash):
        levels[n_ramp + n_plateau + j] = ((n_wash - 1 - j) / n_wash) ** profile.gamma
    return levels


@dataclass(frozen=True)
class SynthConfig:
    num_studies: int = 200
    left_fraction: float = 0.232
    image_size: int = 64
    frames_min: int = 30
    frames_max: int = 60
    views_right_mean: float = 2.0
    views_left_mean: float = 1.2
    width_right: float = 5.0
    width_left: float = 2.8
    width_jitter: float = 0.5
    width_gap: float = 1.0
    contrast: ContrastProfile = ContrastProfile()
    noise_sigma: float = 6.0
    occlusion_fraction: float = 0.0
    occlusion_depth: tuple[float, float] = (0.25, 0.45)
    informative_contrast_min: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_studies < 2:
            raise ValueError("need at least two studies")
        if not 0 < self.left_fraction < 1:
            raise ValueError("left_fraction must lie in (0, 1)")
        if self.image_size < 16 or self.image_size % 2:
            raise ValueError("image_size must be even and >= 16")
        if not 3 <= self.frames_min <= self.frames_max:
            raise ValueError("need 3 <= frames_min <= frames_max")
        if self.width_right <= self.width_left:
            raise ValueError("right vessels must be wider than left ones")
        if self.width_gap <= 0:
            raise ValueError("width_gap must be positive")
        if (self.width_right - self.width_left) - 2 * self.width_jitter < self.width_gap:
            raise ValueError(
                "width distributions too close: (width_right - width_left) - "
                "2 * width_jitter must be >= width_gap"
            )
        if not 0 <= self.occlusion_fraction <= 0.5:
            raise ValueError("occlusion_fraction must lie in [0, 0.5]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0 < self.informative_contrast_min <= 1:
            raise ValueError("informative_contrast_min must lie in (0, 1]")


@dataclass(frozen=True)
class LabelNoiseSpec:
    flip_rate: float
    mode: str = "exact_count"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.flip_rate <= 0.5:
            raise ValueError("flip_rate must lie in [0, 0.5]")
        if self.mode not in ("exact_count", "bernoulli"):
            raise ValueError(f"unknown label-noise mode {self.mode!r}")


# ---------------------------------------------------------------------------
# Vessel geometry


@dataclass
class VesselTree:
    """Polylines (points in pixel coordinates) with per-polyline widths."""

    polylines: list[np.ndarray]
    widths: list[float]
    main_width: float
    has_pda: bool
    occluded: bool = False
    _field_cache: dict = field(default_factory=dict, repr=False)

    def intensity_field(self, image_size: int) -> np.ndarray:
        """Rasterized vessel map in [0, 1]; cached per image size."""
        cached = self._field_cache.get(image_size)
        if cached is None:
            cached = _rasterize(self.polylines, self.widths, image_size)
            self._field_cache[image_size] = cached
        return cached


def _smooth_path(points: np.ndarray, n_out: int) -> np.ndarray:
    """Densify a control polyline with linear interpolation."""
    t = np.linspace(0.0, 1.0, len(points))
    tt = np.linspace(0.0, 1.0, n_out)
    return np.column_stack([np.interp(tt, t, points[:, 0]), np.interp(tt, t, points[:, 1])])


def build_vessel_tree(
    rng: np.random.Generator,
    image_size: int,
    trunk_width: float,
    has_pda: bool,
) -> VesselTree:
    """Random trunk top-to-bottom plus 2-5 side branches (plus a PDA)."""
    s = image_size
    n_ctrl = 7
    ys = np.linspace(0.06 * s, 0.94 * s, n_ctrl)
    xs = np.empty(n_ctrl)
    xs[0] = rng.uniform(0.35 * s, 0.65 * s)
    for i in range(1, n_ctrl):
        xs[i] = np.clip(xs[i - 1] + rng.uniform(-0.14 * s, 0.14 * s), 0.15 * s, 0.85 * s)
    trunk = _smooth_path(np.column_stack([xs, ys]), 48)

    polylines = [trunk]
    widths = [trunk_width]
    n_branches = int(rng.integers(2, 6))
    for _ in range(n_branches):
        t0 = rng.uniform(0.2, 0.8)
        start = trunk[int(t0 * (len(trunk) - 1))]
        direction = rng.choice([-1.0, 1.0])
        length = rng.uniform(0.15 * s, 0.3 * s)
        angle = rng.uniform(0.2, 1.1)
        end = start + np.array([direction * np.cos(angle), np.sin(angle)]) * length
        mid = (start + end) / 2 + rng.uniform(-0.04 * s, 0.04 * s, size=2)
        branch = _smooth_path(np.vstack([start, mid, end]), 16)
        polylines.append(np.clip(branch, 1.0, s - 2.0))
        widths.append(trunk_width * 0.45)
    if has_pda:
        t0 = rng.uniform(0.8, 0.92)
        start = trunk[int(t0 * (len(trunk) - 1))]
        direction = 1.0 if start[0] < 0.5 * s else -1.0
        length = rng.uniform(0.25 * s, 0.4 * s)
        end = start + np.array([direction * length, rng.uniform(0.0, 0.08 * s)])
        pda = _smooth_path(np.vstack([start, end]), 16)
        polylines.append(np.clip(pda, 1.0, s - 2.0))
        widths.append(trunk_width * 0.6)
    return VesselTree(polylines=polylines, widths=widths, main_width=trunk_width,
                      has_pda=has_pda)


def occlude(tree: VesselTree, rng: np.random.Generator, depth: tuple[float, float]) -> VesselTree:
    """Truncate the trunk at a random proximal arc fraction.

    Branches attached beyond the cut (the PDA in particular) disappear with
    it: contrast never reaches them.
    """
    frac = rng.uniform(depth[0], depth[1])
    trunk = tree.polylines[0]
    keep = max(2, int(frac * len(trunk)))
    stub = trunk[:keep]
    cut_y = stub[-1, 1]
    polylines = [stub]
    widths = [tree.widths[0]]
    for line, width in zip(tree.polylines[1:], tree.widths[1:]):
        if line[0, 1] <= cut_y:
            polylines.append(line)
            widths.append(width)
    return VesselTree(polylines=polylines, widths=widths, main_width=tree.main_width,
                      has_pda=False, occluded=True)


def _rasterize(polylines: list[np.ndarray], widths: list[float], image_size: int) -> np.ndarray:
    s = image_size
    yy, xx = np.meshgrid(np.arange(s, dtype=np.float64), np.arange(s, dtype=np.float64),
                         indexing="ij")
    pix = np.column_stack([xx.ravel(), yy.ravel()])
    out = np.zeros(s * s, dtype=np.float64)
    ln2 = np.log(2.0)
    for line, width in zip(polylines, widths):
        a = line[:-1]
        b = line[1:]
        ab = b - a
        ab_len2 = np.maximum((ab * ab).sum(axis=1), 1e-12)
        dmin = np.full(s * s, np.inf)
        for seg_a, seg_ab, seg_len2 in zip(a, ab, ab_len2):
            rel = pix - seg_a
            t = np.clip((rel @ seg_ab) / seg_len2, 0.0, 1.0)
            closest = seg_a + t[:, None] * seg_ab
            d = np.sqrt(((pix - closest) ** 2).sum(axis=1))
            np.minimum(dmin, d, out=dmin)
        # Soft tube: full darkness on the centerline, half at the nominal edge.
        contrib = np.exp(-ln2 * (2.0 * dmin / width) ** 2)
        np.maximum(out, contrib, out=out)
    return out.reshape(s, s)


def render_frame(
    tree: VesselTree,
    contrast: float,
    noise_sigma: float,
    rng: np.random.Generator,
    image_size: int,
) -> np.ndarray:
    """One uint8 frame: bright background, vessel darkened by ``contrast``."""
    if not 0 <= contrast <= 1:
        raise ValueError(f"contrast {contrast} outside [0, 1]")
    img = BACKGROUND - VESSEL_AMPLITUDE * contrast * tree.intensity_field(image_size)
    if noise_sigma > 0:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Dataset assembly


def _views_count(rng: np.random.Generator, mean: float) -> int:
    """Small integer view count around the requested mean (1 to 3)."""
    if mean >= 2.0:
        return int(rng.choice([1, 2, 3], p=[0.25, 0.5, 0.25]))
    p2 = max(0.0, mean - 1.0)
    return int(rng.choice([1, 2], p=[1.0 - p2, p2]))


def _make_study(
    study_id: str,
    dominance: Dominance,
    occluded: bool,
    cfg: SynthConfig,
    rng: np.random.Generator,
) -> tuple[Study, dict]:
    if dominance is Dominance.RIGHT:
        base = cfg.width_right
        n_views = _views_count(rng, cfg.views_right_mean)
    else:
        base = cfg.width_left
        n_views = _views_count(rng, cfg.views_left_mean)
    trunk_width = base + rng.uniform(-cfg.width_jitter, cfg.width_jitter)

    views = []
    for v in range(n_views):
        tree = build_vessel_tree(rng, cfg.image_size, trunk_width,
                                 has_pda=dominance is Dominance.RIGHT)
        if occluded:
            tree = occlude(tree, rng, cfg.occlusion_depth)
        n_frames = int(rng.integers(cfg.frames_min, cfg.frames_max + 1))
        levels = contrast_levels(n_frames, cfg.contrast)
        frames = tuple(
            Frame(render_frame(tree, float(c), cfg.noise_sigma, rng, cfg.image_size))
            for c in levels
        )
        truth = tuple(bool(c >= cfg.informative_contrast_min) for c in levels)
        views.append(CineView(view_id=f"v{v:02d}", artery=Artery.RCA, frames=frames,
                              fps=15, informative_truth=truth))
    study = Study(study_id=study_id, dominance=dominance, views=tuple(views))
    meta = {
        "true_dominance": str(dominance),
        "occluded": occluded,
        "flipped": False,
        "main_width": round(float(trunk_width), 6),
    }
    return study, meta


def generate_dataset(cfg: SynthConfig) -> tuple[list[Study], dict[str, dict]]:
    """Build the in-memory dataset plus the hidden per-study truth map."""
    master = np.random.SeedSequence([cfg.seed, 0x5EED])
    top_rng = np.random.default_rng(master)

    n_left = round(cfg.left_fraction * cfg.num_studies)
    n_left = min(max(n_left, 1), cfg.num_studies - 1)
    labels = [Dominance.LEFT] * n_left + [Dominance.RIGHT] * (cfg.num_studies - n_left)
    top_rng.shuffle(labels)

    n_occluded = round(cfg.occlusion_fraction * cfg.num_studies)
    right_ids = [i for i, lab in enumerate(labels) if lab is Dominance.RIGHT]
    if n_occluded > len(right_ids):
        raise DataError(
            f"cannot occlude {n_occluded} studies: only {len(right_ids)} right-dominant"
        )
    occluded_ids = set(top_rng.choice(right_ids, size=n_occluded, replace=False).tolist()) \
        if n_occluded else set()

    studies: list[Study] = []
    truth: dict[str, dict] = {}
    for i, child in enumerate(master.spawn(cfg.num_studies)):
        study_id = f"s{i:04d}"
        study, meta = _make_study(
            study_id, labels[i], i in occluded_ids, cfg, np.random.default_rng(child)
        )
        studies.append(study)
        truth[study_id] = meta
    return studies, truth


@dataclass(frozen=True)
class FlipRecord:
    study_id: str
    original: Dominance


def inject_label_noise(
    dataset: list[Study], truth: dict[str, dict], spec: LabelNoiseSpec
) -> tuple[list[Study], dict[str, dict], list[FlipRecord]]:
    """Flip dominance labels; returns (dataset, truth, flip log).

    ``exact_count`` flips exactly round(rate * n) studies; ``bernoulli``
    flips each independently. The truth map keeps the original label and
    gains a ``flipped`` tag; the log makes the operation reversible.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xF11]))
    n = len(dataset)
    if spec.mode == "exact_count":
        count = round(spec.flip_rate * n)
        chosen = set(rng.choice(n, size=count, replace=False).tolist()) if count else set()
    else:
        chosen = {i for i in range(n) if rng.random() < spec.flip_rate}

    flipped_dataset: list[Study] = []
    new_truth = {sid: dict(meta) for sid, meta in truth.items()}
    log: list[FlipRecord] = []
    for i, study in enumerate(dataset):
        if i in chosen:
            opposite = Dominance.LEFT if study.dominance is Dominance.RIGHT else Dominance.RIGHT
            flipped_dataset.append(dataclasses.replace(study, dominance=opposite))
            entry = new_truth.setdefault(study.study_id, {})
            entry["flipped"] = True
            entry["true_dominance"] = str(study.dominance)
            log.append(FlipRecord(study_id=study.study_id, original=study.dominance))
        else:
            flipped_dataset.append(study)
    return flipped_dataset, new_truth, log


def revert_label_noise(dataset: list[Study], log: list[FlipRecord]) -> list[Study]:
    """Undo :func:`inject_label_noise` using its flip log."""
    originals = {rec.study_id: rec.original for rec in log}
    return [
        dataclasses.replace(s, dominance=originals[s.study_id])
        if s.study_id in originals else s
        for s in dataset
    ]


def write_synthetic_dataset(
    cfg: SynthConfig, root: str, noise: LabelNoiseSpec | None = None
) -> str:
    """Generate, optionally inject label noise, and write everything to disk."""
    dataset, truth = generate_dataset(cfg)
    if noise is not None and noise.flip_rate > 0:
        dataset, truth, _ = inject_label_noise(dataset, truth, noise)
    manifest_path = dataio.write_dataset(dataset, root)
    dataio.write_truth(truth, root)
    return manifest_path
