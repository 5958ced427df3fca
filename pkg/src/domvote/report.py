"""Experiment artifacts: CSV tables, markdown reports, and the SVG curve.

Everything that lands in report.md is derived purely from the prediction
CSVs, so regenerating the report from a results directory reproduces it
byte for byte. Floats in CSVs are written with repr (shortest round-trip)
to keep recomputation exact; markdown tables round to one decimal percent
like the metric tables they mirror.
"""

from __future__ import annotations

import csv
import json
import os

from domvote.dataio import Artery, Dominance
from domvote.experiments import (
    AblationCell,
    CrossvalResult,
    FrameMethodRow,
    FrameRow,
    HardCaseReport,
    SaturationPoint,
    ViewRow,
    aggregate_reports,
    reports_from_rows,
)
from domvote.metrics import MetricsReport

PREDICTIONS_CSV = "predictions.csv"
FRAME_PREDICTIONS_CSV = "frame_predictions.csv"
STUDIES_CSV = "studies.csv"
REPORT_CSV = "report.csv"
REPORT_MD = "report.md"
SATURATION_SVG = "saturation.svg"
SATURATION_CSV = "saturation.csv"
HARDCASES_JSON = "hardcases.json"

_METRIC_TITLES = {
    "recall_left": "Recall left",
    "recall_right": "Recall right",
    "precision_left": "Precision left",
    "precision_right": "Precision right",
    "recall_macro": "Recall macro",
    "f1_macro": "F1 macro",
    "accuracy": "Accuracy",
    "mcc": "MCC",
    "frame_roc_auc": "ROC AUC (frames)",
}


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Cross-validation artifacts


def write_crossval_artifacts(result: CrossvalResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, PREDICTIONS_CSV),
        ["seed", "val_seed", "fold", "study_id", "view_id", "artery", "n_frames_used",
         "sum_left", "sum_right", "predicted", "label", "label_eval"],
        [[r.seed, r.val_seed, r.fold, r.study_id, r.view_id, str(r.artery),
          r.n_frames_used, repr(r.sum_left), repr(r.sum_right), str(r.predicted),
          str(r.label), str(r.label_eval)] for r in result.view_rows],
    )
    _write_csv(
        os.path.join(out_dir, FRAME_PREDICTIONS_CSV),
        ["seed", "val_seed", "fold", "study_id", "view_id", "frame_index",
         "score_right", "label_eval"],
        [[r.seed, r.val_seed, r.fold, r.study_id, r.view_id, r.frame_index,
          repr(r.score_right), str(r.label_eval)] for r in result.frame_rows],
    )
    _write_csv(
        os.path.join(out_dir, STUDIES_CSV),
        ["seed", "val_seed", "fold", "study_id", "sum_left", "sum_right",
         "predicted", "label"],
        [[r.seed, r.val_seed, r.fold, r.study_id, repr(r.sum_left),
          repr(r.sum_right), str(r.predicted), str(r.label)] for r in result.study_rows],
    )

    fold_rows = []
    for key, rep in result.fold_reports.items():
        seed, vseed, fold = key
        fold_rows.append(
            ["fold", seed, vseed, fold]
            + [repr(getattr(rep, name)) for name in MetricsReport.FIELDS]
            + [rep.n_views, repr(result.val_recall.get(key, float("nan")))]
        )
    for kind, attr in (("mean", "mean"), ("spread_margin", "spread_margin"),
                       ("mean_margin", "mean_margin")):
        fold_rows.append(
            [kind, "", "", ""]
            + [repr(getattr(result.aggregate[name], attr)) for name in MetricsReport.FIELDS]
            + ["", ""]
        )
    _write_csv(
        os.path.join(out_dir, REPORT_CSV),
        ["kind", "seed", "val_seed", "fold"] + list(MetricsReport.FIELDS)
        + ["n_views", "val_recall_macro"],
        fold_rows,
    )

    md = crossval_report_md(result.view_rows, result.frame_rows)
    with open(os.path.join(out_dir, REPORT_MD), "w", encoding="ascii", newline="") as fh:
        fh.write(md)


def crossval_report_md(view_rows: list[ViewRow], frame_rows: list[FrameRow]) -> str:
    """The markdown report, a pure function of the prediction rows."""
    reports = reports_from_rows(view_rows, frame_rows)
    agg = aggregate_reports(reports)
    n_runs = len(reports)

    def table(names: list[str]) -> list[str]:
        head = "| | " + " | ".join(_METRIC_TITLES[n] for n in names) + " |"
        sep = "|---" * (len(names) + 1) + "|"
        mean = "| mean | " + " | ".join(_pct(agg[n].mean) for n in names) + " |"
        spread = "| +/- t*sd | " + " | ".join(_pct(agg[n].spread_margin) for n in names) + " |"
        mm = "| +/- t*sd/sqrt(n) | " + " | ".join(_pct(agg[n].mean_margin) for n in names) + " |"
        return [head, sep, mean, spread, mm]

    lines = [
        "# Cross-validation report",
        "",
        f"Aggregated over {n_runs} runs: {len(view_rows)} view predictions, "
        f"{len(frame_rows)} frame scores. Values are percentages.",
        "",
        "## Per-class metrics (view level)",
        "",
        *table(["recall_left", "recall_right", "precision_left", "precision_right",
                "frame_roc_auc"]),
        "",
        "## Macro metrics (view level)",
        "",
        *table(["recall_macro", "accuracy", "f1_macro", "mcc"]),
    ]
    flagged = sorted({name for rep in reports.values() for name in rep.degenerate})
    if flagged:
        lines += ["", "Degenerate (zero-denominator) metrics in some runs: "
                  + ", ".join(flagged) + "."]
    return "\n".join(lines) + "\n"


def read_prediction_rows(out_dir: str) -> tuple[list[ViewRow], list[FrameRow]]:
    """Parse the prediction CSVs back into rows (exact float round-trip)."""
    view_rows = []
    with open(os.path.join(out_dir, PREDICTIONS_CSV), encoding="ascii", newline="") as fh:
        for rec in csv.DictReader(fh):
            view_rows.append(ViewRow(
                seed=int(rec["seed"]), val_seed=int(rec["val_seed"]), fold=int(rec["fold"]),
                study_id=rec["study_id"], view_id=rec["view_id"],
                artery=Artery.from_string(rec["artery"]),
                n_frames_used=int(rec["n_frames_used"]),
                sum_left=float(rec["sum_left"]), sum_right=float(rec["sum_right"]),
                predicted=Dominance.from_string(rec["predicted"]),
                label=Dominance.from_string(rec["label"]),
                label_eval=Dominance.from_string(rec["label_eval"]),
            ))
    frame_rows = []
    with open(os.path.join(out_dir, FRAME_PREDICTIONS_CSV), encoding="ascii", newline="") as fh:
        for rec in csv.DictReader(fh):
            frame_rows.append(FrameRow(
                seed=int(rec["seed"]), val_seed=int(rec["val_seed"]), fold=int(rec["fold"]),
                study_id=rec["study_id"], view_id=rec["view_id"],
                frame_index=int(rec["frame_index"]),
                score_right=float(rec["score_right"]),
                label_eval=Dominance.from_string(rec["label_eval"]),
            ))
    return view_rows, frame_rows


def regenerate_report_md(out_dir: str) -> str:
    """Rebuild report.md from the prediction CSVs; returns its path."""
    view_rows, frame_rows = read_prediction_rows(out_dir)
    md = crossval_report_md(view_rows, frame_rows)
    path = os.path.join(out_dir, REPORT_MD)
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(md)
    return path


# ---------------------------------------------------------------------------
# Saturation artifacts


def write_saturation_artifacts(points: list[SaturationPoint], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, SATURATION_CSV),
        ["fraction", "repeats", "recall_macro_mean", "spread_margin", "mean_margin"],
        [[repr(p.fraction), p.repeats, repr(p.recall_macro.mean),
          repr(p.recall_macro.spread_margin), repr(p.recall_macro.mean_margin)]
         for p in points],
    )
    svg = saturation_svg(points)
    with open(os.path.join(out_dir, SATURATION_SVG), "w", encoding="ascii", newline="") as fh:
        fh.write(svg)
    lines = [
        "# Data saturation",
        "",
        "| Fraction | Repeats | Recall macro | +/- t*sd/sqrt(n) |",
        "|---|---|---|---|",
    ]
    for p in points:
        lines.append(
            f"| {p.fraction:g} | {p.repeats} | {_pct(p.recall_macro.mean)} "
            f"| {_pct(p.recall_macro.mean_margin)} |"
        )
    lines += ["", f"Curve with the mean-margin band: {SATURATION_SVG}"]
    with open(os.path.join(out_dir, REPORT_MD), "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def saturation_svg(points: list[SaturationPoint]) -> str:
    """Hand-emitted polyline plot with a shaded mean-margin band."""
    width, height = 720, 440
    ml, mr, mt, mb = 70, 24, 28, 56
    xs = [p.fraction for p in points]
    means = [p.recall_macro.mean for p in points]
    margins = [p.recall_macro.mean_margin for p in points]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo = min(m - g for m, g in zip(means, margins))
    y_hi = max(m + g for m, g in zip(means, margins))
    pad = max(0.02, 0.1 * (y_hi - y_lo))
    y_lo, y_hi = max(0.0, y_lo - pad), min(1.0, y_hi + pad)

    def px(x: float) -> float:
        return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr)

    def py(y: float) -> float:
        return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb)

    def pt(x: float, y: float) -> str:
        return f"{px(x):.1f},{py(y):.1f}"

    band = " ".join(pt(x, m + g) for x, m, g in zip(xs, means, margins))
    band += " " + " ".join(pt(x, m - g) for x, m, g in reversed(list(zip(xs, means, margins))))
    line = " ".join(pt(x, m) for x, m in zip(xs, means))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polygon points="{band}" fill="#4c72b0" fill-opacity="0.22" stroke="none"/>',
        f'<polyline points="{line}" fill="none" stroke="#4c72b0" stroke-width="2"/>',
    ]
    for x, m in zip(xs, means):
        parts.append(f'<circle cx="{px(x):.1f}" cy="{py(m):.1f}" r="3.5" fill="#4c72b0"/>')
    ax_y = height - mb
    parts.append(f'<line x1="{ml}" y1="{ax_y}" x2="{width - mr}" y2="{ax_y}" '
                 'stroke="black" stroke-width="1"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{ax_y}" '
                 'stroke="black" stroke-width="1"/>')
    for x in xs:
        parts.append(f'<line x1="{px(x):.1f}" y1="{ax_y}" x2="{px(x):.1f}" y2="{ax_y + 5}" '
                     'stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{px(x):.1f}" y="{ax_y + 20}" text-anchor="middle">'
                     f'{x:g}</text>')
    n_ticks = 5
    for i in range(n_ticks + 1):
        y = y_lo + (y_hi - y_lo) * i / n_ticks
        parts.append(f'<line x1="{ml - 5}" y1="{py(y):.1f}" x2="{ml}" y2="{py(y):.1f}" '
                     'stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{ml - 9}" y="{py(y) + 4:.1f}" text-anchor="end">'
                     f'{100 * y:.1f}</text>')
    parts.append(f'<text x="{(ml + width - mr) / 2:.1f}" y="{height - 14}" '
                 'text-anchor="middle">training data fraction</text>')
    parts.append(f'<text x="18" y="{(mt + ax_y) / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {(mt + ax_y) / 2:.1f})">recall macro, %</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Ablation and mining artifacts


def write_loss_ablation_artifacts(cells: list[AblationCell], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "loss_ablation.csv"),
        ["loss", "fraction", "recall_macro_mean", "recall_macro_mean_margin",
         "frame_roc_auc_mean", "frame_roc_auc_mean_margin", "n"],
        [[c.loss, repr(c.fraction), repr(c.recall_macro.mean),
          repr(c.recall_macro.mean_margin), repr(c.frame_roc_auc.mean),
          repr(c.frame_roc_auc.mean_margin), c.recall_macro.n] for c in cells],
    )
    lines = [
        "# Loss ablation",
        "",
        "| Loss | Fraction | Recall macro | +/- t*sd/sqrt(n) | ROC AUC (frames) | +/- t*sd/sqrt(n) |",
        "|---|---|---|---|---|---|",
    ]
    for c in cells:
        lines.append(
            f"| {c.loss} | {c.fraction:g} | {_pct(c.recall_macro.mean)} "
            f"| {_pct(c.recall_macro.mean_margin)} | {_pct(c.frame_roc_auc.mean)} "
            f"| {_pct(c.frame_roc_auc.mean_margin)} |"
        )
    with open(os.path.join(out_dir, REPORT_MD), "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_frame_ablation_artifacts(rows: list[FrameMethodRow], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, "frame_methods.csv"),
        ["method", "recall_macro_mean", "recall_macro_mean_margin", "accuracy_mean",
         "accuracy_mean_margin", "f1_macro_mean", "f1_macro_mean_margin",
         "frame_roc_auc_mean", "frame_roc_auc_mean_margin", "n"],
        [[r.method, repr(r.recall_macro.mean), repr(r.recall_macro.mean_margin),
          repr(r.accuracy.mean), repr(r.accuracy.mean_margin),
          repr(r.f1_macro.mean), repr(r.f1_macro.mean_margin),
          repr(r.frame_roc_auc.mean), repr(r.frame_roc_auc.mean_margin),
          r.recall_macro.n] for r in rows],
    )
    lines = [
        "# Frame-selection ablation",
        "",
        "| Method | Recall macro | Accuracy | F1 macro | ROC AUC (frames) |",
        "|---|---|---|---|---|",
    ]
    for r in rows:
        lines.append(
            f"| {r.method} | {_pct(r.recall_macro.mean)} | {_pct(r.accuracy.mean)} "
            f"| {_pct(r.f1_macro.mean)} | {_pct(r.frame_roc_auc.mean)} |"
        )
    with open(os.path.join(out_dir, REPORT_MD), "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_hardcases(report: HardCaseReport, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "ensemble_size": report.ensemble_size,
        "hard_ids": report.hard_ids,
        "labels": report.labels,
        "predictions": report.predictions,
        "crosstab": report.crosstab,
    }
    with open(os.path.join(out_dir, HARDCASES_JSON), "w", encoding="ascii", newline="") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_exclusion_summary(
    with_result: CrossvalResult, without_result: CrossvalResult,
    hard_ids: list[str], out_dir: str,
) -> None:
    os.makedirs(out_dir, exist_ok=True)
    acc_with = with_result.aggregate["accuracy"]
    acc_without = without_result.aggregate["accuracy"]
    doc = {
        "excluded": hard_ids,
        "accuracy_with": {"mean": acc_with.mean, "mean_margin": acc_with.mean_margin},
        "accuracy_without": {"mean": acc_without.mean, "mean_margin": acc_without.mean_margin},
    }
    with open(os.path.join(out_dir, "exclusion.json"), "w", encoding="ascii", newline="") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    lines = [
        "# Hard-case exclusion",
        "",
        f"Excluded {len(hard_ids)} studies.",
        "",
        "| | Accuracy | +/- t*sd/sqrt(n) |",
        "|---|---|---|",
        f"| with hard cases | {_pct(acc_with.mean)} | {_pct(acc_with.mean_margin)} |",
        f"| without hard cases | {_pct(acc_without.mean)} | {_pct(acc_without.mean_margin)} |",
    ]
    with open(os.path.join(out_dir, "summary.md"), "w", encoding="ascii", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
