"""End-to-end acceptance gate.

Ten numbered checks, one PASS/FAIL line each (printed, so visible under
``pytest -s`` and in captured output on failure): exact oracle agreement
for the loss family and the metrics, gradient correctness through the
full network, directional claims on planted synthetic data, and
byte-identical reruns from a lock file.

Checks 5 through 9 train real models and together take roughly fifteen
minutes on one core. Run this module alone with

    pytest tests/test_acceptance.py -v -s

to watch the lines appear as they complete.
"""

import dataclasses
import functools
import math
import time

import numpy as np

from domvote import nnet
from domvote import report as reporting
from domvote.cli import main as cli_main
from domvote.experiments import (
    ExperimentPlan,
    exclude_and_rerun,
    mine_hard_cases,
    run_crossval,
    run_frame_ablation,
    run_loss_ablation,
    run_saturation,
)
from domvote.frameselect import GatingPolicy, gate_test
from domvote.losses import (
    ClassWeights,
    LossConfig,
    ce,
    loss_grad,
    loss_value,
    nce,
    nsce,
    one_hot,
    rce,
    sce,
)
from domvote.metrics import (
    ConfusionCounts,
    ci_margin,
    f1,
    macro,
    mcc,
    roc_auc,
    t_quantile,
)
from domvote.nnet import AugmentConfig, LrSchedule, ParamSet, backward, forward, init_params
from domvote.synthgen import (
    ContrastProfile,
    LabelNoiseSpec,
    SynthConfig,
    generate_dataset,
    inject_label_noise,
)

FLAT = ContrastProfile(ramp=0.1, plateau=0.8, washout=0.1)
SCHEDULE = LrSchedule(kind="warmup_peak_decay", epochs=12, lr_scale=300.0)


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


@functools.lru_cache(maxsize=None)
def skewed_dataset():
    """200 studies at 23% left dominance; shared by checks 5 and 9."""
    cfg = SynthConfig(num_studies=200, left_fraction=0.23, image_size=16,
                      frames_min=12, frames_max=16, noise_sigma=3.0, seed=7,
                      width_left=2.0, width_right=7.5, width_jitter=0.5,
                      contrast=FLAT)
    return generate_dataset(cfg)


def view_macro_recall(view_rows) -> float:
    correct, total = [0, 0], [0, 0]
    for row in view_rows:
        y = row.label_eval.index
        total[y] += 1
        correct[y] += int(row.predicted is row.label_eval)
    return 0.5 * (correct[0] / total[0] + correct[1] / total[1])


# ---------------------------------------------------------------------------
# 1. Loss family against an independent direct-formula evaluator


def direct_family(p, q, w, cfg: LossConfig) -> dict:
    """The five losses written out longhand in scalar arithmetic."""
    k = len(p)
    wn = sum(w[i] * q[i] for i in range(k))
    ce_v = -sum(w[i] * q[i] * math.log(p[i]) for i in range(k)) / wn
    num = sum(w[i] * q[i] * math.log(p[i]) for i in range(k)) / wn
    den = sum(math.log(p[i]) for i in range(k))
    rce_v = -sum(w[i] * p[i] * math.log(max(q[i], cfg.q_floor)) for i in range(k)) / wn
    return {
        "ce": ce_v,
        "nce": num / den,
        "rce": rce_v,
        "sce": cfg.alpha * ce_v + cfg.beta * rce_v,
        "nsce": cfg.alpha * (num / den) + cfg.beta * rce_v,
    }


def random_target(rng, k: int) -> np.ndarray:
    kind = int(rng.integers(3))
    q = np.zeros(k)
    q[int(rng.integers(k))] = 1.0
    if kind == 0:
        return q
    if kind == 1:
        eps = float(rng.uniform(0.02, 0.3))
        return (1.0 - eps) * q + eps / k
    return rng.dirichlet(np.ones(k))


def test_01_loss_family_matches_direct_formulas():
    start = time.perf_counter()
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(k))
        p = np.clip(p, 1e-9, None)
        p = p / p.sum()
        q = random_target(rng, k)
        w = rng.uniform(0.1, 3.0, size=k)
        cfg = LossConfig(alpha=float(rng.uniform(0.1, 1.0)),
                         beta=float(rng.uniform(0.1, 1.0)),
                         q_floor=float(np.exp(rng.uniform(-6.0, -1.0))))
        want = direct_family(list(p), list(q), list(w), cfg)
        got = {"ce": ce(p, q, w), "nce": nce(p, q, w),
               "rce": rce(p, q, w, cfg.q_floor),
               "sce": sce(p, q, w, cfg), "nsce": nsce(p, q, w, cfg)}
        worst = max(worst, max(abs(got[name] - want[name]) for name in want))

    p = np.array([0.8, 0.2])
    unit, skew = ClassWeights(1.0, 1.0), ClassWeights()
    examples_ok = (abs(nce(p, one_hot(0), unit) - 0.121765) < 1e-6
                   and abs(rce(p, one_hot(0), skew) - 0.311111) < 1e-6
                   and abs(nsce(p, one_hot(0), skew) - 0.254307) < 1e-6)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-9 and examples_ok and elapsed < 10
    verdict("loss oracle equality", ok,
            f"max |module - direct| {worst:.2e} over 1000 draws, worked values "
            f"{'match' if examples_ok else 'WRONG'}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Analytic gradients of loss-through-network against central differences


W_SKEW = ClassWeights()
CFG_DEFAULT = LossConfig()


def net_loss(params64: ParamSet, x64: np.ndarray, q: np.ndarray) -> float:
    logits, _ = forward(params64, x64, dtype=np.float64)
    return float(np.mean(loss_value("nsce", logits, q, W_SKEW, CFG_DEFAULT)))


def net_analytic(params64: ParamSet, x64: np.ndarray, q: np.ndarray) -> ParamSet:
    logits, cache = forward(params64, x64, dtype=np.float64)
    dlogits = loss_grad("nsce", logits, q, W_SKEW, CFG_DEFAULT) / x64.shape[0]
    return backward(cache, dlogits)


def net_fd(params64: ParamSet, x64: np.ndarray, q: np.ndarray, h: float = 1e-4) -> ParamSet:
    arrays = [a.copy() for a in params64.arrays()]
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = net_loss(ParamSet(*arrays), x64, q)
            flat[j] = orig - h
            down = net_loss(ParamSet(*arrays), x64, q)
            flat[j] = orig
            gflat[j] = (up - down) / (2 * h)
        grads.append(g)
    return ParamSet(*grads)


def max_relative_error(a: ParamSet, f: ParamSet) -> float:
    diff = max(np.abs(ga - gf).max() for ga, gf in zip(a.arrays(), f.arrays()))
    scale = max(np.abs(gf).max() for gf in f.arrays())
    return diff / max(scale, 1e-8)


def kink_margin(params64: ParamSet, x64: np.ndarray) -> float:
    """Distance of ReLU preactivations and pool decisions from a kink.

    Central differences stay on one smooth branch only when the probe step
    cannot flip a ReLU sign or reorder a pool window, so near-kink draws
    are skipped rather than compared.
    """
    n, h, w = x64.shape
    z1, _ = nnet._conv_forward(x64[:, None], params64.w1, params64.b1)
    r1 = np.maximum(z1, 0)
    hh, ww = h // 2, w // 2
    rwin = (r1.reshape(n, 8, hh, 2, ww, 2)
            .transpose(0, 1, 2, 4, 3, 5).reshape(n, 8, hh, ww, 4))
    top2 = np.sort(rwin, axis=-1)[..., -2:]
    gaps = np.where(top2[..., 1] > 0, top2[..., 1] - top2[..., 0], np.inf)
    pooled = np.take_along_axis(rwin, rwin.argmax(axis=-1)[..., None], axis=-1)[..., 0]
    z2, _ = nnet._conv_forward(pooled, params64.w2, params64.b2)
    return float(min(np.abs(z1).min(), np.abs(z2).min(), gaps.min()))


def test_02_network_gradients_match_finite_differences():
    start = time.perf_counter()
    worst, used, seed = 0.0, 0, 0
    while used < 10:
        rng = np.random.default_rng(500 + seed)
        params64 = ParamSet(*[a.astype(np.float64) for a in init_params(seed).arrays()])
        x = rng.random((2, 6, 6)).astype(np.float32).astype(np.float64)
        q = one_hot(rng.integers(0, 2, size=2))
        seed += 1
        assert seed < 200, "could not find enough kink-free cases"
        if kink_margin(params64, x) < 2e-3:
            continue
        worst = max(worst, max_relative_error(net_analytic(params64, x, q),
                                              net_fd(params64, x, q)))
        used += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 60
    verdict("gradient correctness", ok,
            f"max relative error {worst:.2e} over {used} seeds (need < 1e-4), "
            f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. Metric oracles


def test_03_metric_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(7)

    worst_auc = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 201))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        scores = rng.integers(0, 15, size=n) / 10.0  # coarse grid forces ties
        sp, sn = scores[y == 1], scores[y == 0]
        pairs = (sp[:, None] > sn[None, :]).sum() + 0.5 * (sp[:, None] == sn[None, :]).sum()
        worst_auc = max(worst_auc, abs(roc_auc(scores, y) - pairs / (sp.size * sn.size)))

    worst_conf = 0.0
    for _ in range(200):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 30, size=4))
        tp = max(tp, 1) if tp + fp + tn + fn == 0 else tp
        c = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        den = 2 * tp + fp + fn
        worst_conf = max(worst_conf, abs(f1(c).value - (2 * tp / den if den else 0.0)))
        margins = ((tp + fp), (tp + fn), (tn + fp), (tn + fn))
        want_mcc = (0.0 if 0 in margins else
                    (tp * tn - fp * fn) / math.sqrt(math.prod(float(v) for v in margins)))
        worst_conf = max(worst_conf, abs(mcc(c) - want_mcc))

    t_factor = t_quantile(19)
    samples = list(rng.normal(0.5, 0.1, size=20))
    backed_out = (ci_margin(samples).mean_margin * math.sqrt(20)
                  / float(np.std(samples, ddof=1)))
    elapsed = time.perf_counter() - start
    ok = (worst_auc < 1e-12 and worst_conf < 1e-12
          and abs(t_factor - 2.093) <= 0.001 and abs(backed_out - 2.093) <= 0.001
          and elapsed < 10)
    verdict("metric oracles", ok,
            f"AUC rank vs pairwise |diff| {worst_auc:.1e}, F1/MCC |diff| "
            f"{worst_conf:.1e}, t factor for 20 samples {t_factor:.3f}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. Macro metrics recompose from per-class rates


def test_04_macro_metrics_recompose_from_per_class_rates():
    recall_l, recall_r = 0.924, 0.938
    precision_l, precision_r = 0.746, 0.985
    recall_macro = macro(recall_l, recall_r)
    f1_l = 2 * precision_l * recall_l / (precision_l + recall_l)
    f1_r = 2 * precision_r * recall_r / (precision_r + recall_r)
    f1_macro = macro(f1_l, f1_r)
    ok = abs(recall_macro - 0.931) <= 0.002 and abs(f1_macro - 0.892) <= 0.002
    verdict("macro recomposition", ok,
            f"recall macro {100 * recall_macro:.2f} (want 93.1 +/- 0.2pp), "
            f"f1 macro {100 * f1_macro:.2f} (want 89.2 +/- 0.2pp)")


# ---------------------------------------------------------------------------
# 5. Planted-signal cross-validation with protocol invariants


def test_05_planted_signal_crossval():
    start = time.perf_counter()
    dataset, _ = skewed_dataset()
    plan = ExperimentPlan(loss="nsce", frame_method="quality",
                          class_weights=ClassWeights(left=0.34, right=0.66),
                          schedule=SCHEDULE, batch_size=100,
                          augment=AugmentConfig(enabled=True),
                          folds=5, val_fraction=0.0, seeds=(0, 1, 2))
    result = run_crossval(dataset, plan)
    recall = view_macro_recall(result.view_rows)

    leak_free = True
    for seed in plan.seeds:
        folds_by_study: dict = {}
        for row in result.study_rows:
            if row.seed == seed:
                folds_by_study.setdefault(row.study_id, set()).add(row.fold)
        leak_free &= len(folds_by_study) == len(dataset)
        leak_free &= all(len(folds) == 1 for folds in folds_by_study.values())

    stratified = True
    for seed in plan.seeds:
        per_fold = {fold: [0, 0] for fold in range(plan.folds)}
        for row in result.study_rows:
            if row.seed == seed:
                per_fold[row.fold][row.label.index] += 1
        lefts = [counts[0] for counts in per_fold.values()]
        sizes = [sum(counts) for counts in per_fold.values()]
        stratified &= max(lefts) - min(lefts) <= 1 and max(sizes) - min(sizes) <= 1

    def seed0_rows(rows):
        return sorted((r.fold, r.study_id, r.view_id, r.n_frames_used,
                       r.sum_left, r.sum_right, r.predicted.index)
                      for r in rows if r.seed == 0)

    rerun = run_crossval(dataset, dataclasses.replace(plan, seeds=(0,)))
    deterministic = seed0_rows(result.view_rows) == seed0_rows(rerun.view_rows)

    elapsed = time.perf_counter() - start
    ok = (recall >= 0.90 and leak_free and stratified and deterministic
          and elapsed < 900)
    verdict("planted-signal run", ok,
            f"view macro recall {recall:.3f} (need >= 0.90); leak-free {leak_free}, "
            f"stratified {stratified}, deterministic {deterministic}; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 6. Noise-robust losses under exact-count label flips


def test_06_robust_losses_beat_ce_under_label_flips():
    start = time.perf_counter()
    cfg = SynthConfig(num_studies=100, left_fraction=0.5, image_size=16,
                      frames_min=12, frames_max=16, noise_sigma=3.0, seed=7,
                      width_left=2.2, width_right=7.0, width_jitter=0.5,
                      contrast=FLAT)
    dataset, clean_truth = generate_dataset(cfg)
    noisy, truth, flips = inject_label_noise(
        dataset, clean_truth, LabelNoiseSpec(flip_rate=0.2, seed=7))
    plan = ExperimentPlan(loss="nsce", frame_method="quality",
                          class_weights=ClassWeights(left=0.52, right=0.48),
                          schedule=SCHEDULE, batch_size=100,
                          augment=AugmentConfig(enabled=True),
                          folds=5, val_fraction=0.0, seeds=(0, 1, 2, 3, 4),
                          eval_against_truth=True, subsample_right=True,
                          loss_fractions=(1.0,))
    cells = run_loss_ablation(noisy, plan, truth, losses=("ce", "sce", "nsce"))
    by_loss = {cell.loss: cell.recall_macro for cell in cells}
    means = ", ".join(f"{name} {est.mean:.4f} +/- {est.mean_margin:.4f}"
                      for name, est in by_loss.items())
    elapsed = time.perf_counter() - start
    ok = (len(flips) == 20
          and by_loss["nsce"].mean >= by_loss["ce"].mean
          and by_loss["sce"].mean >= by_loss["ce"].mean
          and elapsed < 2700)
    verdict("label-noise robustness", ok,
            f"{len(flips)} flipped labels; mean view macro recall over "
            f"{len(plan.seeds)} seeds: {means}; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. Quality gating against training on every frame


def test_07_quality_gating_beats_all_frames():
    start = time.perf_counter()
    cfg = SynthConfig(num_studies=100, left_fraction=0.5, image_size=16,
                      frames_min=12, frames_max=16, noise_sigma=5.0, seed=7,
                      width_left=2.6, width_right=5.5, width_jitter=0.5,
                      contrast=ContrastProfile(ramp=0.29, plateau=0.42,
                                               washout=0.29, gamma=3.0))
    dataset, truth = generate_dataset(cfg)
    total = sum(len(view.frames) for study in dataset for view in study.views)
    low = sum(sum(1 for flag in view.informative_truth if not flag)
              for study in dataset for view in study.views)
    low_fraction = low / total

    plan = ExperimentPlan(loss="ce", frame_method="quality",
                          class_weights=ClassWeights(left=1.0, right=1.0),
                          schedule=SCHEDULE, batch_size=100,
                          augment=AugmentConfig(enabled=False),
                          folds=5, val_fraction=0.0, seeds=(0, 1, 2),
                          subsample_right=False)
    rows = {row.method: row
            for row in run_frame_ablation(dataset, plan, truth,
                                          methods=("quality", "all"))}
    kept = gate_test(np.array([0.104, 0.435, 0.759, 0.999]),
                     GatingPolicy(test_threshold=0.55))
    elapsed = time.perf_counter() - start
    ok = (abs(low_fraction - 0.40) < 0.02
          and rows["quality"].recall_macro.mean >= rows["all"].recall_macro.mean
          and kept == [2, 3]
          and elapsed < 1800)
    verdict("frame-selection direction", ok,
            f"low-contrast fraction {low_fraction:.3f}; recall macro quality "
            f"{rows['quality'].recall_macro.mean:.4f} vs all "
            f"{rows['all'].recall_macro.mean:.4f}; threshold keeps {kept}; "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. Ensemble mining of planted occlusions, then exclusion


def test_08_ensemble_flags_occluded_studies():
    start = time.perf_counter()
    cfg = SynthConfig(num_studies=200, left_fraction=0.80, image_size=16,
                      frames_min=12, frames_max=16, noise_sigma=4.0, seed=7,
                      width_left=2.0, width_right=5.0, width_jitter=0.5,
                      occlusion_fraction=0.05, occlusion_depth=(0.01, 0.04),
                      contrast=FLAT)
    dataset, truth = generate_dataset(cfg)
    plan = ExperimentPlan(loss="ce", frame_method="all",
                          loss_cfg=LossConfig(smoothing=0.2),
                          class_weights=ClassWeights(left=0.75, right=0.25),
                          schedule=SCHEDULE, batch_size=100,
                          augment=AugmentConfig(enabled=False),
                          folds=5, val_fraction=0.0, seeds=(0, 1, 2))
    mined = mine_hard_cases(dataset, plan, truth, ensemble_size=5)
    tab = mined.crosstab["occluded"]
    flagged_fraction = tab["tagged_flagged"] / tab["tagged"]

    with_result, without_result = exclude_and_rerun(dataset, mined.hard_ids, plan, truth)
    acc_with = with_result.aggregate["accuracy"].mean
    acc_without = without_result.aggregate["accuracy"].mean
    elapsed = time.perf_counter() - start
    ok = (tab["tagged"] == 10 and flagged_fraction >= 0.8
          and acc_without >= acc_with and elapsed < 3600)
    verdict("occlusion mining and exclusion", ok,
            f"flagged {tab['tagged_flagged']}/{tab['tagged']} occluded studies "
            f"({tab['untagged_flagged']} clean studies flagged); accuracy "
            f"{acc_with:.4f} -> {acc_without:.4f} after exclusion; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 9. Training-set saturation trend with SVG artifact


def test_09_saturation_trend(tmp_path):
    start = time.perf_counter()
    dataset, truth = skewed_dataset()
    plan = ExperimentPlan(loss="ce", frame_method="all",
                          class_weights=ClassWeights(left=1.0, right=1.0),
                          schedule=SCHEDULE, batch_size=100,
                          augment=AugmentConfig(enabled=False),
                          folds=5, val_fraction=0.0, seeds=(0,),
                          fractions=(0.2, 0.5, 1.0), repeat_scale=0.25)
    points = run_saturation(dataset, plan, truth)
    low, full = points[0], points[-1]
    trend = (full.recall_macro.mean
             >= low.recall_macro.mean - low.recall_macro.mean_margin)

    reporting.write_saturation_artifacts(points, str(tmp_path))
    svg = (tmp_path / reporting.SATURATION_SVG).read_text()
    artifacts = (svg.startswith("<svg") and "<polyline" in svg
                 and "<polygon" in svg
                 and (tmp_path / reporting.SATURATION_CSV).is_file())
    elapsed = time.perf_counter() - start
    ok = trend and artifacts and elapsed < 3600
    verdict("saturation trend", ok,
            f"recall macro {low.recall_macro.mean:.3f} @ 0.2 -> "
            f"{full.recall_macro.mean:.3f} @ 1.0 (margin "
            f"{low.recall_macro.mean_margin:.3f}); curve and band drawn; "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 10. Byte-identical rerun from the lock file


def test_10_rerun_from_lock_is_byte_identical(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(
        "num_studies = 16\nleft_fraction = 0.5\nimage_size = 16\n"
        "frames_min = 6\nframes_max = 8\nnoise_sigma = 2.0\n"
        "epochs = 2\nfolds = 2\nseeds = 0\nloss = ce\n"
        "frame_method = all\naugment = false\n")
    first, second = tmp_path / "first", tmp_path / "second"
    rc_first = cli_main(["crossval", "--config", str(cfg_path), "--out", str(first)])
    rc_second = cli_main(["crossval", "--config", str(first / "run.lock.json"),
                          "--out", str(second)])
    names = [reporting.PREDICTIONS_CSV, reporting.FRAME_PREDICTIONS_CSV,
             reporting.STUDIES_CSV, reporting.REPORT_CSV, reporting.REPORT_MD,
             "run.lock.json"]
    differing = [name for name in names
                 if (first / name).read_bytes() != (second / name).read_bytes()]
    ok = rc_first == 0 and rc_second == 0 and not differing
    verdict("lock-file rerun", ok,
            "all report files byte-identical" if ok else
            f"exit codes ({rc_first}, {rc_second}); differing files: {differing}")
