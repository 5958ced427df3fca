"""Command-line driver: flat key=value configs in, experiment artifacts out.

Every run command takes --config (an empty file means library defaults) and
--out; nothing is written outside --out. The fully resolved configuration is
recorded as run.lock.json, and that lock file is itself accepted by --config,
so any run can be repeated bit-exactly from its own artifacts.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from domvote import __version__
from domvote import report as reporting
from domvote.dataio import DataError, Dataset, load_manifest, load_truth, save_checkpoint
from domvote.experiments import (
    FRAME_METHODS,
    ExperimentPlan,
    exclude_and_rerun,
    fit_pipeline,
    mine_hard_cases,
    run_crossval,
    run_frame_ablation,
    run_loss_ablation,
    run_saturation,
    stratified_subsample,
)
from domvote.frameselect import GatingPolicy, SsimConfig
from domvote.losses import LOSS_KINDS, ClassWeights, LossConfig
from domvote.metrics import MetricsReport
from domvote.nnet import AugmentConfig, LrSchedule
from domvote.synthgen import ContrastProfile, LabelNoiseSpec, SynthConfig, write_synthetic_dataset

LOCK_NAME = "run.lock.json"


class ConfigError(Exception):
    """Bad usage or configuration; the process exits with code 1."""


# ---------------------------------------------------------------------------
# Configuration registry

_SYNTH = SynthConfig()
_CONTRAST = ContrastProfile()
_LOSS = LossConfig()
_WEIGHTS = ClassWeights()
_GATE = GatingPolicy()
_SSIM = SsimConfig()
_AUG = AugmentConfig()
_SCHED = LrSchedule()
_PLAN = ExperimentPlan()

# key -> (type tag, default, expected-range text used in error messages)
CONFIG_KEYS: dict[str, tuple[str, object, str]] = {
    "dataset": ("str", "", "path to a dataset manifest; empty generates one under --out"),
    "seed": ("int", 0, "integer master seed"),
    "seeds": ("ints", (), "comma-separated integers; empty derives one from seed"),
    "jobs": ("int", 1, ">= 1 worker processes"),
    "fraction": ("float", 1.0, "in (0, 1], stratified subsample applied before the run"),
    # synthetic generator
    "num_studies": ("int", _SYNTH.num_studies, ">= 2"),
    "left_fraction": ("float", _SYNTH.left_fraction, "in (0, 1)"),
    "image_size": ("int", _SYNTH.image_size, "even, >= 16"),
    "frames_min": ("int", _SYNTH.frames_min, ">= 3"),
    "frames_max": ("int", _SYNTH.frames_max, ">= frames_min"),
    "views_right_mean": ("float", _SYNTH.views_right_mean, "in [1, 3]"),
    "views_left_mean": ("float", _SYNTH.views_left_mean, "in [1, 3]"),
    "width_right": ("float", _SYNTH.width_right, "> 0 pixels"),
    "width_left": ("float", _SYNTH.width_left, "> 0 pixels"),
    "width_jitter": ("float", _SYNTH.width_jitter, ">= 0 pixels"),
    "width_gap": ("float", _SYNTH.width_gap, "> 0, guaranteed class separation"),
    "contrast_ramp": ("float", _CONTRAST.ramp, "fraction of frames, sums to 1 with plateau/washout"),
    "contrast_plateau": ("float", _CONTRAST.plateau, "fraction of frames, > 0"),
    "contrast_washout": ("float", _CONTRAST.washout, "fraction of frames"),
    "contrast_gamma": ("float", _CONTRAST.gamma, "> 0 ramp shape"),
    "noise_sigma": ("float", _SYNTH.noise_sigma, ">= 0 gray levels"),
    "occlusion_fraction": ("float", _SYNTH.occlusion_fraction, "in [0, 0.5]"),
    "occlusion_depth_min": ("float", _SYNTH.occlusion_depth[0], "in (0, 1)"),
    "occlusion_depth_max": ("float", _SYNTH.occlusion_depth[1], "in (0, 1), >= min"),
    "informative_contrast_min": ("float", _SYNTH.informative_contrast_min, "in (0, 1]"),
    "flip_rate": ("float", 0.0, "in [0, 0.5]"),
    "flip_mode": ("str", "exact_count", "exact_count or bernoulli"),
    "flip_seed": ("int", 0, "integer"),
    # loss
    "loss": ("str", _PLAN.loss, "one of " + "|".join(LOSS_KINDS)),
    "alpha": ("float", _LOSS.alpha, "> 0, CE/NCE term weight"),
    "beta": ("float", _LOSS.beta, "> 0, RCE term weight"),
    "q_floor": ("float", _LOSS.q_floor, "in (0, 1), floor inside RCE's log"),
    "smoothing": ("float", _LOSS.smoothing, "in [0, 1), label smoothing"),
    "weight_left": ("float", _WEIGHTS.left, "> 0 class weight"),
    "weight_right": ("float", _WEIGHTS.right, "> 0 class weight"),
    # frame gating and selection
    "train_threshold_right": ("float", _GATE.train_threshold_right, "in [0, 1]"),
    "train_threshold_left": ("float", _GATE.train_threshold_left, "in [0, 1]"),
    "test_threshold": ("float", _GATE.test_threshold, "in [0, 1]"),
    "frame_method": ("str", _PLAN.frame_method, "one of " + "|".join(FRAME_METHODS)),
    "discard_n": ("int", _PLAN.discard_n, ">= 0 frames dropped from the head"),
    "ssim_window": ("int", _SSIM.window, "odd, >= 3"),
    "ssim_sigma": ("float", _SSIM.sigma, "> 0"),
    "ssim_k1": ("float", _SSIM.k1, "> 0"),
    "ssim_k2": ("float", _SSIM.k2, "> 0"),
    "ssim_dynamic_range": ("float", _SSIM.dynamic_range, "> 0"),
    "ssim_peak_window": ("int", _SSIM.peak_window, ">= 0 frames either side of the peak"),
    # augmentation
    "augment": ("bool", _AUG.enabled, "true or false"),
    "max_rotation_deg": ("float", _AUG.max_rotation_deg, ">= 0 degrees"),
    "crop_scale_min": ("float", _AUG.crop_scale[0], "in (0, 1]"),
    "crop_scale_max": ("float", _AUG.crop_scale[1], "in (0, 1], >= min"),
    "crop_ratio_min": ("float", _AUG.crop_ratio[0], "> 0"),
    "crop_ratio_max": ("float", _AUG.crop_ratio[1], "> 0, >= min"),
    # optimization
    "lr_schedule": ("str", _SCHED.kind, "constant_after_warmup or warmup_peak_decay"),
    "warmup_lr": ("float", _SCHED.warmup_lr, "> 0, epoch-0 learning rate"),
    "peak_lr": ("float", _SCHED.peak_lr, "> 0"),
    "decay_lr": ("float", _SCHED.decay_lr, "> 0"),
    "decay_epoch": ("int", _SCHED.decay_epoch, ">= 1, last epoch at peak_lr"),
    "epochs": ("int", _SCHED.epochs, ">= 1"),
    "lr_scale": ("float", _SCHED.lr_scale, "> 0 multiplier on every rate"),
    "batch_size": ("int", _PLAN.batch_size, ">= 1"),
    "weight_decay": ("float", _PLAN.weight_decay, ">= 0"),
    # quality scorer
    "quality_epochs": ("int", _PLAN.quality_epochs, ">= 1"),
    "quality_frame_stride": ("int", _PLAN.quality_frame_stride, ">= 1"),
    "augment_quality": ("bool", _PLAN.augment_quality, "true or false"),
    # experiment protocol
    "folds": ("int", _PLAN.folds, ">= 2"),
    "val_fraction": ("float", _PLAN.val_fraction, "in [0, 1)"),
    "val_seeds": ("int", _PLAN.val_seeds, ">= 1"),
    "fractions": ("floats", _PLAN.fractions, "comma-separated fractions, ascending"),
    "loss_fractions": ("floats", _PLAN.loss_fractions, "comma-separated fractions"),
    "repeat_scale": ("float", _PLAN.repeat_scale, "> 0, scales saturation repeats"),
    "subsample_right": ("bool", _PLAN.subsample_right, "true or false"),
    "subsample_before_gating": ("bool", _PLAN.subsample_before_gating, "true or false"),
    "eval_against_truth": ("bool", _PLAN.eval_against_truth, "true or false"),
    "ensemble_size": ("int", _PLAN.ensemble_size, ">= 2 members"),
}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(lowered)


def parse_value(key: str, text: str):
    tag, _, expected = CONFIG_KEYS[key]
    try:
        if tag == "int":
            return int(text)
        if tag == "float":
            return float(text)
        if tag == "bool":
            return _parse_bool(text)
        if tag == "ints":
            return tuple(int(p.strip()) for p in text.split(",") if p.strip())
        if tag == "floats":
            return tuple(float(p.strip()) for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ConfigError(
            f"config key {key!r}: cannot parse {text!r}; expected {expected}"
        ) from None


def _value_from_json(key: str, value):
    tag, _, expected = CONFIG_KEYS[key]
    ok = False
    if tag == "int":
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif tag == "float":
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif tag == "bool":
        ok = isinstance(value, bool)
    elif tag == "ints":
        ok = isinstance(value, list) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value)
        value = tuple(value) if ok else value
    elif tag == "floats":
        ok = isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        value = tuple(float(v) for v in value) if ok else value
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config key {key!r}: bad value {value!r}; expected {expected}")
    return value


def load_config(path: str) -> dict:
    """Parse a key=value config file, or the config block of a run.lock.json."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        block = doc.get("config", doc)
        if not isinstance(block, dict):
            raise ConfigError(f"{path}: 'config' must be an object")
        values = {}
        for key, value in block.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            values[key] = _value_from_json(key, value)
        return values
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
        values[key] = parse_value(key, val)
    return values


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then command-line overrides."""
    cfg = {key: spec[1] for key, spec in CONFIG_KEYS.items()}
    cfg.update(load_config(args.config))
    for flag, key in (("seed", "seed"), ("jobs", "jobs"), ("fraction", "fraction"),
                      ("loss", "loss"), ("frame_method", "frame_method")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    return cfg


def write_lock(out_dir: str, command: str, cfg: dict) -> str:
    doc = {
        "command": command,
        "version": __version__,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()},
    }
    path = os.path.join(out_dir, LOCK_NAME)
    os.makedirs(out_dir, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# Building runtime objects from the flat config


def build_synth_config(cfg: dict) -> SynthConfig:
    try:
        return SynthConfig(
            num_studies=cfg["num_studies"], left_fraction=cfg["left_fraction"],
            image_size=cfg["image_size"], frames_min=cfg["frames_min"],
            frames_max=cfg["frames_max"], views_right_mean=cfg["views_right_mean"],
            views_left_mean=cfg["views_left_mean"], width_right=cfg["width_right"],
            width_left=cfg["width_left"], width_jitter=cfg["width_jitter"],
            width_gap=cfg["width_gap"],
            contrast=ContrastProfile(
                ramp=cfg["contrast_ramp"], plateau=cfg["contrast_plateau"],
                washout=cfg["contrast_washout"], gamma=cfg["contrast_gamma"],
            ),
            noise_sigma=cfg["noise_sigma"],
            occlusion_fraction=cfg["occlusion_fraction"],
            occlusion_depth=(cfg["occlusion_depth_min"], cfg["occlusion_depth_max"]),
            informative_contrast_min=cfg["informative_contrast_min"],
            seed=cfg["seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_noise_spec(cfg: dict) -> LabelNoiseSpec | None:
    if cfg["flip_rate"] <= 0:
        return None
    try:
        return LabelNoiseSpec(flip_rate=cfg["flip_rate"], mode=cfg["flip_mode"],
                              seed=cfg["flip_seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_plan(cfg: dict) -> ExperimentPlan:
    if cfg["loss"] not in LOSS_KINDS:
        raise ConfigError(f"config key 'loss': {cfg['loss']!r} is not one of "
                          + "|".join(LOSS_KINDS))
    seeds = tuple(cfg["seeds"]) or (cfg["seed"],)
    try:
        return ExperimentPlan(
            loss=cfg["loss"],
            loss_cfg=LossConfig(alpha=cfg["alpha"], beta=cfg["beta"],
                                q_floor=cfg["q_floor"], smoothing=cfg["smoothing"]),
            class_weights=ClassWeights(left=cfg["weight_left"], right=cfg["weight_right"]),
            frame_method=cfg["frame_method"],
            gating=GatingPolicy(
                train_threshold_right=cfg["train_threshold_right"],
                train_threshold_left=cfg["train_threshold_left"],
                test_threshold=cfg["test_threshold"],
            ),
            ssim_cfg=SsimConfig(
                window=cfg["ssim_window"], sigma=cfg["ssim_sigma"], k1=cfg["ssim_k1"],
                k2=cfg["ssim_k2"], dynamic_range=cfg["ssim_dynamic_range"],
                peak_window=cfg["ssim_peak_window"],
            ),
            discard_n=cfg["discard_n"],
            schedule=LrSchedule(
                kind=cfg["lr_schedule"], warmup_lr=cfg["warmup_lr"],
                peak_lr=cfg["peak_lr"], decay_lr=cfg["decay_lr"],
                decay_epoch=cfg["decay_epoch"], epochs=cfg["epochs"],
                lr_scale=cfg["lr_scale"],
            ),
            batch_size=cfg["batch_size"],
            augment=AugmentConfig(
                enabled=cfg["augment"], max_rotation_deg=cfg["max_rotation_deg"],
                crop_scale=(cfg["crop_scale_min"], cfg["crop_scale_max"]),
                crop_ratio=(cfg["crop_ratio_min"], cfg["crop_ratio_max"]),
            ),
            augment_quality=cfg["augment_quality"],
            weight_decay=cfg["weight_decay"],
            quality_epochs=cfg["quality_epochs"],
            quality_frame_stride=cfg["quality_frame_stride"],
            folds=cfg["folds"], val_fraction=cfg["val_fraction"],
            val_seeds=cfg["val_seeds"], seeds=seeds,
            fractions=cfg["fractions"], loss_fractions=cfg["loss_fractions"],
            repeat_scale=cfg["repeat_scale"],
            subsample_right=cfg["subsample_right"],
            subsample_before_gating=cfg["subsample_before_gating"],
            eval_against_truth=cfg["eval_against_truth"],
            ensemble_size=cfg["ensemble_size"],
            jobs=cfg["jobs"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_dataset(cfg: dict, out_dir: str) -> tuple[Dataset, dict | None]:
    """Load the configured dataset, or synthesize one under --out."""
    if cfg["dataset"]:
        manifest = cfg["dataset"]
        root = manifest if os.path.isdir(manifest) else os.path.dirname(manifest)
    else:
        root = os.path.join(out_dir, "dataset")
        manifest = write_synthetic_dataset(build_synth_config(cfg), root,
                                           noise=build_noise_spec(cfg))
    dataset = load_manifest(manifest)
    truth = load_truth(root)
    if cfg["fraction"] < 1.0:
        dataset = stratified_subsample(dataset, cfg["fraction"], cfg["seed"])
    return dataset, truth


# ---------------------------------------------------------------------------
# Console output


def _style(text: str, code: str) -> str:
    if os.environ.get("DOMVOTE_NO_COLOR") is not None or not sys.stdout.isatty():
        return text
    return f"\x1b[{code}m{text}\x1b[0m"


def _print_aggregate(aggregate: dict) -> None:
    for name in MetricsReport.FIELDS:
        est = aggregate[name]
        print(f"  {name:16s} {100 * est.mean:6.1f}  "
              f"+/- {100 * est.spread_margin:5.1f} (t*sd)  "
              f"+/- {100 * est.mean_margin:5.1f} (t*sd/sqrt(n))")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    write_synthetic_dataset(build_synth_config(cfg), args.out, noise=build_noise_spec(cfg))
    write_lock(args.out, "synth", cfg)
    dataset = load_manifest(args.out)
    n_left = sum(1 for s in dataset if s.dominance.index == 0)
    print(f"wrote {len(dataset)} studies ({n_left} left, {len(dataset) - n_left} right) "
          f"to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, _ = resolve_dataset(cfg, args.out)
    plan = build_plan(cfg)
    scorer, params, epoch_losses = fit_pipeline(dataset, plan, seed=cfg["seed"])
    if scorer is not None:
        save_checkpoint(list(scorer.arrays()), os.path.join(args.out, "quality.ckpt"))
    save_checkpoint(list(params.arrays()), os.path.join(args.out, "model.ckpt"))
    write_lock(args.out, "train", cfg)
    for epoch, value in enumerate(epoch_losses):
        print(f"  epoch {epoch}: mean {plan.loss} {value:.6f}")
    print(f"saved model.ckpt{' and quality.ckpt' if scorer is not None else ''} "
          f"under {args.out}")
    return 0


def cmd_crossval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    result = run_crossval(dataset, build_plan(cfg), truth)
    reporting.write_crossval_artifacts(result, args.out)
    write_lock(args.out, "crossval", cfg)
    print(_style(f"cross-validation over {len(result.fold_reports)} runs:", "1"))
    _print_aggregate(result.aggregate)
    return 0


def cmd_saturation(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    points = run_saturation(dataset, build_plan(cfg), truth)
    reporting.write_saturation_artifacts(points, args.out)
    write_lock(args.out, "saturation", cfg)
    for p in points:
        print(f"  fraction {p.fraction:4.2f} ({p.repeats:2d} repeats): recall macro "
              f"{100 * p.recall_macro.mean:5.1f} +/- {100 * p.recall_macro.mean_margin:.1f}")
    return 0


def cmd_ablate_loss(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    cells = run_loss_ablation(dataset, build_plan(cfg), truth)
    reporting.write_loss_ablation_artifacts(cells, args.out)
    write_lock(args.out, "ablate-loss", cfg)
    for c in cells:
        print(f"  {c.loss:4s} @ {c.fraction:4.2f}: recall macro "
              f"{100 * c.recall_macro.mean:5.1f} +/- {100 * c.recall_macro.mean_margin:.1f}")
    return 0


def cmd_ablate_frames(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    rows = run_frame_ablation(dataset, build_plan(cfg), truth)
    reporting.write_frame_ablation_artifacts(rows, args.out)
    write_lock(args.out, "ablate-frames", cfg)
    for r in rows:
        print(f"  {r.method:9s}: recall macro {100 * r.recall_macro.mean:5.1f}, "
              f"accuracy {100 * r.accuracy.mean:5.1f}")
    return 0


def cmd_mine_hard(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    report = mine_hard_cases(dataset, build_plan(cfg), truth)
    reporting.write_hardcases(report, args.out)
    write_lock(args.out, "mine-hard", cfg)
    print(f"flagged {len(report.hard_ids)} of {len(dataset)} studies "
          f"({report.ensemble_size} members)")
    for tag, counts in report.crosstab.items():
        print(f"  {tag}: {counts['tagged_flagged']}/{counts['tagged']} tagged flagged, "
              f"{counts['untagged_flagged']} untagged flagged")
    return 0


def cmd_exclude_rerun(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dataset, truth = resolve_dataset(cfg, args.out)
    plan = build_plan(cfg)
    report = mine_hard_cases(dataset, plan, truth)
    reporting.write_hardcases(report, args.out)
    with_result, without_result = exclude_and_rerun(dataset, report.hard_ids, plan, truth)
    reporting.write_crossval_artifacts(with_result, os.path.join(args.out, "with"))
    reporting.write_crossval_artifacts(without_result, os.path.join(args.out, "without"))
    reporting.write_exclusion_summary(with_result, without_result, report.hard_ids, args.out)
    write_lock(args.out, "exclude-rerun", cfg)
    acc_with = with_result.aggregate["accuracy"].mean
    acc_without = without_result.aggregate["accuracy"].mean
    print(f"excluded {len(report.hard_ids)} studies: accuracy "
          f"{100 * acc_with:.1f} -> {100 * acc_without:.1f}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    for name in (reporting.PREDICTIONS_CSV, reporting.FRAME_PREDICTIONS_CSV):
        if not os.path.isfile(os.path.join(args.in_dir, name)):
            raise ConfigError(f"no {name} under {args.in_dir}")
    path = reporting.regenerate_report_md(args.in_dir)
    print(f"regenerated {path}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this front end promises 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="domvote",
                     description="Coronary-dominance pipeline experiments.")
    parser.add_argument("--version", action="version", version=f"domvote {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_command(name: str, func, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True,
                       help="key=value config file or a run.lock.json")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--fraction", type=float,
                       help="stratified subsample fraction applied before the run")
        p.add_argument("--loss", choices=LOSS_KINDS, help="override the training loss")
        p.add_argument("--frame-method", dest="frame_method", choices=FRAME_METHODS,
                       help="override the frame-selection method")
        p.set_defaults(func=func)
        return p

    run_command("synth", cmd_synth, "generate a synthetic dataset")
    run_command("train", cmd_train, "train the pipeline on a whole dataset")
    run_command("crossval", cmd_crossval, "stratified k-fold cross-validation")
    run_command("saturation", cmd_saturation, "training-set saturation curve")
    run_command("ablate-loss", cmd_ablate_loss, "loss-function ablation grid")
    run_command("ablate-frames", cmd_ablate_frames, "frame-selection ablation")
    run_command("mine-hard", cmd_mine_hard, "ensemble hard-case mining")
    run_command("exclude-rerun", cmd_exclude_rerun,
                "mine hard cases, then cross-validate with and without them")

    rep = sub.add_parser("report", help="regenerate report.md from prediction CSVs")
    rep.add_argument("--in", dest="in_dir", required=True,
                     help="directory holding predictions.csv")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(_style(f"error: {exc}", "31"), file=sys.stderr)
        return 1
    except DataError as exc:
        print(_style(f"data error: {exc}", "31"), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
