"""Cross-validation, data-saturation, ablations, and hard-case mining.

Every experiment decomposes into independent (seed, val-seed, fold) jobs:
train the frame scorer if the plan gates by quality, train the dominance
classifier on gated-and-subsampled training frames, then evaluate the held
fold. Jobs can run in a process pool; results merge by key ordering, so
parallel and serial runs produce identical output.

Splits are stratified at the study level. A validation reserve is carved
out of each training part for monitoring; its final macro recall is kept
per job but never drives any decision.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from domvote import frameselect, nnet
from domvote.aggregate import StudyPrediction, ViewPrediction, study_predict, subsample_majority, view_predict
from domvote.dataio import Artery, CineView, DataError, Dominance, Study
from domvote.frameselect import GatingPolicy, SsimConfig
from domvote.losses import ClassWeights, LossConfig, softmax
from domvote.metrics import IntervalEstimate, MetricsReport, build_report, ci_margin
from domvote.nnet import AugmentConfig, LrSchedule, TrainSettings

FRAME_METHODS = ("quality", "ssim", "discard20", "all")


@dataclass(frozen=True)
class FoldSplit:
    k: int
    seed: int
    assignment: dict[str, int]

    def train_ids(self, fold: int) -> list[str]:
        return [sid for sid, f in self.assignment.items() if f != fold]

    def test_ids(self, fold: int) -> list[str]:
        return [sid for sid, f in self.assignment.items() if f == fold]


def kfold_split(studies: list[Study], k: int, seed: int) -> FoldSplit:
    """Stratified k-fold assignment of whole studies.

    Shuffles each class separately, then deals studies continuously
    round-robin (left class first), so fold sizes and per-fold class counts
    each differ by at most one.
    """
    if k < 2:
        raise DataError(f"k-fold split needs k >= 2, got {k}")
    if len(studies) < k:
        raise DataError(f"cannot split {len(studies)} studies into {k} folds")
    ids = [s.study_id for s in studies]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate study ids in dataset")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    assignment: dict[str, int] = {}
    next_fold = 0
    for label in (Dominance.LEFT, Dominance.RIGHT):
        class_ids = [s.study_id for s in studies if s.dominance is label]
        rng.shuffle(class_ids)
        for sid in class_ids:
            assignment[sid] = next_fold
            next_fold = (next_fold + 1) % k
    return FoldSplit(k=k, seed=seed, assignment=assignment)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def stratified_subsample(
    studies: list[Study], fraction: float, seed: int, min_per_class: int = 1
) -> list[Study]:
    """Keep round(fraction * n) studies per class, preserving dataset order."""
    if not 0 < fraction <= 1:
        raise DataError(f"subsample fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(studies)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5AB]))
    keep: set[str] = set()
    for label in (Dominance.LEFT, Dominance.RIGHT):
        class_ids = [s.study_id for s in studies if s.dominance is label]
        count = max(min_per_class, round(fraction * len(class_ids)))
        if count > len(class_ids):
            raise DataError(f"cannot keep {count} of {len(class_ids)} {label} studies")
        keep.update(rng.choice(class_ids, size=count, replace=False).tolist())
    return [s for s in studies if s.study_id in keep]


# ---------------------------------------------------------------------------
# Plan and result rows


@dataclass(frozen=True)
class ExperimentPlan:
    loss: str = "nsce"
    loss_cfg: LossConfig = LossConfig()
    class_weights: ClassWeights = ClassWeights()
    frame_method: str = "quality"
    gating: GatingPolicy = GatingPolicy()
    ssim_cfg: SsimConfig = SsimConfig()
    discard_n: int = 20
    schedule: LrSchedule = LrSchedule()
    batch_size: int = 100
    augment: AugmentConfig = AugmentConfig()
    augment_quality: bool = True
    weight_decay: float = 0.05
    quality_epochs: int = 3
    quality_frame_stride: int = 2
    folds: int = 5
    val_fraction: float = 0.2
    val_seeds: int = 1
    seeds: tuple[int, ...] = (0,)
    fractions: tuple[float, ...] = (0.2, 0.25, 0.3, 0.4, 0.5, 0.75, 1.0)
    loss_fractions: tuple[float, ...] = (0.4, 0.75, 1.0)
    repeat_scale: float = 1.0
    subsample_right: bool = True
    subsample_before_gating: bool = False
    eval_against_truth: bool = False
    ensemble_size: int = 5
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.frame_method not in FRAME_METHODS:
            raise ValueError(f"unknown frame method {self.frame_method!r}")
        if self.folds < 2:
            raise ValueError("plan needs at least 2 folds")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        if list(self.fractions) != sorted(self.fractions):
            raise ValueError("saturation fractions must be sorted ascending")

    def dominance_settings(self) -> TrainSettings:
        return TrainSettings(
            loss=self.loss, loss_cfg=self.loss_cfg, class_weights=self.class_weights,
            schedule=self.schedule, batch_size=self.batch_size, augment=self.augment,
            weight_decay=self.weight_decay,
        )

    def quality_settings(self) -> TrainSettings:
        return TrainSettings(
            loss="ce", loss_cfg=LossConfig(smoothing=0.0),
            class_weights=ClassWeights(left=1.0, right=1.0),
            schedule=dataclasses.replace(self.schedule, epochs=self.quality_epochs),
            batch_size=self.batch_size,
            augment=self.augment if self.augment_quality
            else dataclasses.replace(self.augment, enabled=False),
            weight_decay=self.weight_decay,
        )


@dataclass(frozen=True)
class ViewRow:
    seed: int
    val_seed: int
    fold: int
    study_id: str
    view_id: str
    artery: Artery
    n_frames_used: int
    sum_left: float
    sum_right: float
    predicted: Dominance
    label: Dominance
    label_eval: Dominance


@dataclass(frozen=True)
class FrameRow:
    seed: int
    val_seed: int
    fold: int
    study_id: str
    view_id: str
    frame_index: int
    score_right: float
    label_eval: Dominance


@dataclass(frozen=True)
class StudyRow:
    seed: int
    val_seed: int
    fold: int
    study_id: str
    sum_left: float
    sum_right: float
    predicted: Dominance
    label: Dominance


@dataclass
class CrossvalResult:
    view_rows: list[ViewRow]
    frame_rows: list[FrameRow]
    study_rows: list[StudyRow]
    val_recall: dict[tuple[int, int, int], float]
    fold_reports: dict[tuple[int, int, int], MetricsReport]
    aggregate: dict[str, IntervalEstimate]


def estimate(values: list[float]) -> IntervalEstimate:
    """ci_margin that tolerates a single sample (zero margins)."""
    if len(values) == 1:
        return IntervalEstimate(mean=values[0], spread_margin=0.0, mean_margin=0.0, n=1)
    return ci_margin(values)


def reports_from_rows(
    view_rows: list[ViewRow], frame_rows: list[FrameRow]
) -> dict[tuple[int, int, int], MetricsReport]:
    """Per-(seed, val-seed, fold) metric reports, recomputable from CSVs."""
    keys = sorted({(r.seed, r.val_seed, r.fold) for r in view_rows})
    reports = {}
    for key in keys:
        views = [r for r in view_rows if (r.seed, r.val_seed, r.fold) == key]
        frames = [r for r in frame_rows if (r.seed, r.val_seed, r.fold) == key]
        reports[key] = build_report(
            [r.predicted for r in views],
            [r.label_eval for r in views],
            [r.score_right for r in frames],
            [r.label_eval for r in frames],
        )
    return reports


def aggregate_reports(reports: dict) -> dict[str, IntervalEstimate]:
    out = {}
    for name in MetricsReport.FIELDS:
        out[name] = estimate([getattr(rep, name) for rep in reports.values()])
    return out


# ---------------------------------------------------------------------------
# One (seed, val-seed, fold) job


def _val_reserve(
    train_studies: list[Study], fraction: float, seed: int
) -> tuple[list[Study], list[Study]]:
    if fraction == 0:
        return list(train_studies), []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA1]))
    val_ids: set[str] = set()
    for label in (Dominance.LEFT, Dominance.RIGHT):
        class_ids = [s.study_id for s in train_studies if s.dominance is label]
        count = min(len(class_ids) - 1, round(fraction * len(class_ids)))
        if count > 0:
            val_ids.update(rng.choice(class_ids, size=count, replace=False).tolist())
    train = [s for s in train_studies if s.study_id not in val_ids]
    val = [s for s in train_studies if s.study_id in val_ids]
    return train, val


def _train_selection(
    view: CineView, dominance: Dominance, scores: np.ndarray | None, plan: ExperimentPlan
) -> list[int]:
    if plan.frame_method == "quality":
        if plan.subsample_before_gating and plan.subsample_right:
            pre = subsample_majority(list(range(len(view.frames))), dominance)
            kept = [i for i in pre if scores[i] >= (
                plan.gating.train_threshold_right if dominance is Dominance.RIGHT
                else plan.gating.train_threshold_left)]
            return kept
        indices = frameselect.gate_train(scores, dominance, plan.gating)
    elif plan.frame_method == "ssim":
        indices = frameselect.ssim_select(view, plan.ssim_cfg)
    elif plan.frame_method == "discard20":
        indices = frameselect.discard_first(view, plan.discard_n)
    else:
        indices = frameselect.all_frames(view)
    if plan.subsample_right and not plan.subsample_before_gating:
        indices = subsample_majority(indices, dominance)
    return indices


def _test_selection(
    view: CineView, scores: np.ndarray | None, plan: ExperimentPlan
) -> list[int]:
    if plan.frame_method == "quality":
        return frameselect.gate_test(scores, plan.gating)
    if plan.frame_method == "ssim":
        return frameselect.ssim_select(view, plan.ssim_cfg)
    if plan.frame_method == "discard20":
        return frameselect.discard_first(view, plan.discard_n)
    return frameselect.all_frames(view)


def _fold_job(
    dataset: list[Study],
    eval_labels: dict[str, Dominance],
    plan: ExperimentPlan,
    seed: int,
    val_seed: int,
    fold: int,
) -> tuple[list[ViewRow], list[FrameRow], list[StudyRow], float]:
    split = kfold_split(dataset, plan.folds, seed)
    by_id = {s.study_id: s for s in dataset}
    train_all = [by_id[sid] for sid in split.train_ids(fold)]
    test_studies = [by_id[sid] for sid in split.test_ids(fold)]
    train_studies, val_studies = _val_reserve(
        train_all, plan.val_fraction, _derive_seed(seed, val_seed, fold, 3)
    )

    scorer = None
    if plan.frame_method == "quality":
        train_views = [v for s in train_studies for v in s.rca_views()]
        scorer = frameselect.train_quality_scorer(
            train_views, plan.quality_settings(),
            seed=_derive_seed(seed, val_seed, fold, 2),
            frame_stride=plan.quality_frame_stride,
        )

    def scores_for(view: CineView) -> np.ndarray | None:
        if scorer is None:
            return None
        return frameselect.score_frames(scorer, view)

    images = []
    labels = []
    for study in train_studies:
        for view in study.rca_views():
            indices = _train_selection(view, study.dominance, scores_for(view), plan)
            if not indices:
                continue
            images.append(frameselect.frames_to_array(view, indices))
            labels.extend([study.dominance.index] * len(indices))
    if not images:
        raise DataError("no training frames survived frame selection")
    label_arr = np.asarray(labels, dtype=np.int64)
    if len(set(labels)) < 2:
        raise DataError("training frames are single-class after selection")
    params, _ = nnet.train_classifier(
        np.concatenate(images, axis=0), label_arr, plan.dominance_settings(),
        seed=_derive_seed(seed, val_seed, fold, 1),
    )

    def eval_view(study: Study, view: CineView):
        indices = _test_selection(view, scores_for(view), plan)
        logits = nnet.predict_logits(params, frameselect.frames_to_array(view, indices))
        pred = view_predict(logits)
        p_right = softmax(logits)[:, 1]
        return indices, pred, p_right

    val_preds: list[Dominance] = []
    val_truths: list[Dominance] = []
    for study in val_studies:
        for view in study.rca_views():
            _, pred, _ = eval_view(study, view)
            val_preds.append(pred.predicted)
            val_truths.append(study.dominance)
    if val_preds:
        rep = build_report(val_preds, val_truths)
        val_recall = rep.recall_macro
    else:
        val_recall = float("nan")

    view_rows: list[ViewRow] = []
    frame_rows: list[FrameRow] = []
    study_rows: list[StudyRow] = []
    for study in test_studies:
        label_eval = eval_labels.get(study.study_id, study.dominance)
        per_view: list[tuple[Artery, ViewPrediction]] = []
        for view in study.rca_views():
            indices, pred, p_right = eval_view(study, view)
            per_view.append((view.artery, pred))
            view_rows.append(ViewRow(
                seed=seed, val_seed=val_seed, fold=fold, study_id=study.study_id,
                view_id=view.view_id, artery=view.artery,
                n_frames_used=pred.n_frames_used,
                sum_left=float(pred.summed_logits[0]),
                sum_right=float(pred.summed_logits[1]),
                predicted=pred.predicted, label=study.dominance, label_eval=label_eval,
            ))
            for j, idx in enumerate(indices):
                frame_rows.append(FrameRow(
                    seed=seed, val_seed=val_seed, fold=fold, study_id=study.study_id,
                    view_id=view.view_id, frame_index=idx,
                    score_right=float(p_right[j]), label_eval=label_eval,
                ))
        spred: StudyPrediction = study_predict(per_view)
        study_rows.append(StudyRow(
            seed=seed, val_seed=val_seed, fold=fold, study_id=study.study_id,
            sum_left=float(spred.summed_logits[0]), sum_right=float(spred.summed_logits[1]),
            predicted=spred.predicted, label=study.dominance,
        ))
    return view_rows, frame_rows, study_rows, val_recall


def fit_pipeline(
    dataset: list[Study], plan: ExperimentPlan, seed: int
) -> tuple[nnet.ParamSet | None, nnet.ParamSet, list[float]]:
    """Train the scorer and the dominance classifier on every study.

    No split, no held-out evaluation; this is the path behind the `train`
    subcommand. Returns (quality params or None, dominance params, per-epoch
    mean losses).
    """
    scorer = None
    if plan.frame_method == "quality":
        views = [v for s in dataset for v in s.rca_views()]
        scorer = frameselect.train_quality_scorer(
            views, plan.quality_settings(), seed=_derive_seed(seed, 2),
            frame_stride=plan.quality_frame_stride,
        )
    images = []
    labels: list[int] = []
    for study in dataset:
        for view in study.rca_views():
            scores = frameselect.score_frames(scorer, view) if scorer is not None else None
            indices = _train_selection(view, study.dominance, scores, plan)
            if not indices:
                continue
            images.append(frameselect.frames_to_array(view, indices))
            labels.extend([study.dominance.index] * len(indices))
    if not images:
        raise DataError("no training frames survived frame selection")
    if len(set(labels)) < 2:
        raise DataError("training frames are single-class after selection")
    params, epoch_losses = nnet.train_classifier(
        np.concatenate(images, axis=0), np.asarray(labels, dtype=np.int64),
        plan.dominance_settings(), seed=_derive_seed(seed, 1),
    )
    return scorer, params, epoch_losses


# ---------------------------------------------------------------------------
# Worker pool


_WORKER_STATE: dict = {}


def _worker_init(dataset, eval_labels, plan) -> None:
    _WORKER_STATE["args"] = (dataset, eval_labels, plan)


def _worker_run(key: tuple[int, int, int]):
    dataset, eval_labels, plan = _WORKER_STATE["args"]
    return key, _fold_job(dataset, eval_labels, plan, *key)


def _eval_labels(
    dataset: list[Study], truth: dict[str, dict] | None, plan: ExperimentPlan
) -> dict[str, Dominance]:
    labels = {s.study_id: s.dominance for s in dataset}
    if plan.eval_against_truth and truth:
        for sid, meta in truth.items():
            if sid in labels and "true_dominance" in meta:
                labels[sid] = Dominance.from_string(meta["true_dominance"])
    return labels


def run_crossval(
    dataset: list[Study],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
) -> CrossvalResult:
    """Full stratified cross-validation over plan.seeds and validation seeds."""
    eval_labels = _eval_labels(dataset, truth, plan)
    keys = [
        (seed, vseed, fold)
        for seed in plan.seeds
        for vseed in range(plan.val_seeds)
        for fold in range(plan.folds)
    ]
    outcomes: dict[tuple[int, int, int], tuple] = {}
    if plan.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=plan.jobs, initializer=_worker_init,
            initargs=(dataset, eval_labels, plan),
        ) as pool:
            for key, outcome in pool.map(_worker_run, keys):
                outcomes[key] = outcome
    else:
        for key in keys:
            outcomes[key] = _fold_job(dataset, eval_labels, plan, *key)

    view_rows: list[ViewRow] = []
    frame_rows: list[FrameRow] = []
    study_rows: list[StudyRow] = []
    val_recall: dict[tuple[int, int, int], float] = {}
    for key in sorted(outcomes):
        v, f, s, vr = outcomes[key]
        view_rows.extend(v)
        frame_rows.extend(f)
        study_rows.extend(s)
        val_recall[key] = vr
    fold_reports = reports_from_rows(view_rows, frame_rows)
    return CrossvalResult(
        view_rows=view_rows, frame_rows=frame_rows, study_rows=study_rows,
        val_recall=val_recall, fold_reports=fold_reports,
        aggregate=aggregate_reports(fold_reports),
    )


# ---------------------------------------------------------------------------
# Saturation


def saturation_repeats(fraction: float, scale: float = 1.0) -> int:
    base = max(4, round(5.6 / fraction))
    return max(1, round(base * scale))


@dataclass(frozen=True)
class SaturationPoint:
    fraction: float
    repeats: int
    recall_macro: IntervalEstimate


def run_saturation(
    dataset: list[Study],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
) -> list[SaturationPoint]:
    """Repeated subsample-and-crossvalidate at each configured fraction."""
    base_seed = plan.seeds[0]
    points = []
    for fidx, fraction in enumerate(plan.fractions):
        repeats = saturation_repeats(fraction, plan.repeat_scale)
        values = []
        for rep in range(repeats):
            rep_seed = _derive_seed(base_seed, fidx, rep, 7)
            sub = stratified_subsample(dataset, fraction, rep_seed)
            if len(sub) < plan.folds:
                raise DataError(
                    f"fraction {fraction} keeps {len(sub)} studies, fewer than "
                    f"{plan.folds} folds"
                )
            rep_plan = dataclasses.replace(plan, seeds=(rep_seed,))
            result = run_crossval(sub, rep_plan, truth)
            values.append(result.aggregate["recall_macro"].mean)
        points.append(SaturationPoint(fraction=fraction, repeats=repeats,
                                      recall_macro=estimate(values)))
    return points


# ---------------------------------------------------------------------------
# Ablations


@dataclass(frozen=True)
class AblationCell:
    loss: str
    fraction: float
    recall_macro: IntervalEstimate
    frame_roc_auc: IntervalEstimate


def run_loss_ablation(
    dataset: list[Study],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
    losses: tuple[str, ...] = ("ce", "sce", "nsce"),
) -> list[AblationCell]:
    """Train-data fraction x loss grid; every cell averages over plan.seeds."""
    cells = []
    for loss in losses:
        for fidx, fraction in enumerate(plan.loss_fractions):
            recalls, aucs = [], []
            for seed in plan.seeds:
                sub = stratified_subsample(dataset, fraction, _derive_seed(seed, fidx, 11))
                cell_plan = dataclasses.replace(plan, loss=loss, seeds=(seed,))
                result = run_crossval(sub, cell_plan, truth)
                recalls.append(result.aggregate["recall_macro"].mean)
                aucs.append(result.aggregate["frame_roc_auc"].mean)
            cells.append(AblationCell(
                loss=loss, fraction=fraction,
                recall_macro=estimate(recalls), frame_roc_auc=estimate(aucs),
            ))
    return cells


@dataclass(frozen=True)
class FrameMethodRow:
    method: str
    recall_macro: IntervalEstimate
    accuracy: IntervalEstimate
    f1_macro: IntervalEstimate
    frame_roc_auc: IntervalEstimate


def run_frame_ablation(
    dataset: list[Study],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
    methods: tuple[str, ...] = FRAME_METHODS,
) -> list[FrameMethodRow]:
    """Compare frame-selection strategies under the same training protocol."""
    rows = []
    for method in methods:
        metric_values: dict[str, list[float]] = {
            "recall_macro": [], "accuracy": [], "f1_macro": [], "frame_roc_auc": []
        }
        for seed in plan.seeds:
            method_plan = dataclasses.replace(plan, frame_method=method, seeds=(seed,))
            result = run_crossval(dataset, method_plan, truth)
            for name in metric_values:
                metric_values[name].append(result.aggregate[name].mean)
        rows.append(FrameMethodRow(
            method=method,
            **{name: estimate(vals) for name, vals in metric_values.items()},
        ))
    return rows


# ---------------------------------------------------------------------------
# Hard-case mining


@dataclass
class HardCaseReport:
    ensemble_size: int
    hard_ids: list[str]
    predictions: dict[str, list[str]]
    labels: dict[str, str]
    crosstab: dict[str, dict[str, int]]


def mine_hard_cases(
    dataset: list[Study],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
    ensemble_size: int | None = None,
) -> HardCaseReport:
    """Flag studies that every ensemble member mispredicts out-of-fold.

    Each member is a full cross-validation run with its own split seed, so
    every study receives one out-of-fold study-level prediction per member.
    Flags are always judged against the dataset's own labels (which is what
    surfaces mislabeled studies); the crosstab then compares flags with the
    hidden truth tags.
    """
    size = plan.ensemble_size if ensemble_size is None else ensemble_size
    if size < 2:
        raise ValueError(f"ensemble of {size} cannot corroborate failures; need >= 2")
    base = plan.seeds[0]
    member_preds: list[dict[str, Dominance]] = []
    for member in range(size):
        member_plan = dataclasses.replace(
            plan, seeds=(base + member,), eval_against_truth=False,
        )
        result = run_crossval(dataset, member_plan, truth=None)
        member_preds.append({r.study_id: r.predicted for r in result.study_rows})

    labels = {s.study_id: s.dominance for s in dataset}
    hard_ids = [
        sid for sid in sorted(labels)
        if all(preds[sid] is not labels[sid] for preds in member_preds)
    ]
    crosstab: dict[str, dict[str, int]] = {}
    truth = truth or {}
    for tag in ("occluded", "flipped"):
        tagged = {sid for sid, meta in truth.items() if meta.get(tag)}
        crosstab[tag] = {
            "tagged": len(tagged),
            "tagged_flagged": len(tagged & set(hard_ids)),
            "untagged_flagged": len(set(hard_ids) - tagged),
        }
    return HardCaseReport(
        ensemble_size=size,
        hard_ids=hard_ids,
        predictions={sid: [str(p[sid]) for p in member_preds] for sid in sorted(labels)},
        labels={sid: str(lab) for sid, lab in labels.items()},
        crosstab=crosstab,
    )


def exclude_and_rerun(
    dataset: list[Study],
    hard_ids: list[str],
    plan: ExperimentPlan,
    truth: dict[str, dict] | None = None,
) -> tuple[CrossvalResult, CrossvalResult]:
    """Cross-validate with and without the flagged studies.

    Returns (result_with, result_without). Refuses to exclude unknown ids
    or to empty out a dominance class.
    """
    known = {s.study_id for s in dataset}
    unknown = [sid for sid in hard_ids if sid not in known]
    if unknown:
        raise DataError(f"cannot exclude unknown studies: {unknown[:5]}")
    filtered = [s for s in dataset if s.study_id not in set(hard_ids)]
    for label in (Dominance.LEFT, Dominance.RIGHT):
        if not any(s.dominance is label for s in filtered):
            raise DataError(f"excluding hard cases would empty the {label} class")
    with_result = run_crossval(dataset, plan, truth)
    without_result = run_crossval(filtered, plan, truth)
    return with_result, without_result
