"""CSV and SVG reports. Output depends only on the values passed in."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import DatasetError
from .evaluation import SweepResult
from .storage import fmt

SWEEP_HEADER = ["n_pts", "n_rx", "fold", "rmse_c"]
SUMMARY_HEADER = ["n_pts", "n_rx", "mean_rmse_c", "std_rmse_c", "n_folds"]

PALETTE = ["#1b6ca8", "#d1495b", "#2e933c", "#edae49", "#6a4c93", "#00798c", "#7a7a7a"]


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path, text):
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path


def write_sweep_csv(result: SweepResult, path):
    rows = [[n_pts, n_rx, fold, fmt(v)] for n_pts, n_rx, fold, v in result.rows()]
    return _write(path, _csv_text(SWEEP_HEADER, rows))


def read_sweep_csv(path) -> SweepResult:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(path, "missing file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise DatasetError(path, f"unexpected header {header}")
        cells = {}
        for row in reader:
            n_pts, n_rx, fold, value = int(row[0]), int(row[1]), int(row[2]), float(row[3])
            vals = cells.setdefault((n_pts, n_rx), [])
            if fold != len(vals):
                raise DatasetError(path, f"folds of cell {(n_pts, n_rx)} out of order")
            vals.append(value)
    n_folds = {len(v) for v in cells.values()}
    if len(n_folds) != 1:
        raise DatasetError(path, "cells have different fold counts")
    return SweepResult(n_folds=n_folds.pop(), cells=cells)


def write_summary_csv(result: SweepResult, path):
    rows = [[n_pts, n_rx, fmt(m), fmt(s), len(result.cells[(n_pts, n_rx)])]
            for n_pts, n_rx, m, s in result.summary_rows()]
    return _write(path, _csv_text(SUMMARY_HEADER, rows))


def write_loss_history(history, path):
    rows = [[h["epoch"], fmt(h["train_loss"]), fmt(h["val_loss"])] for h in history]
    return _write(path, _csv_text(["epoch", "train_loss", "val_loss"], rows))


def write_predictions(path, keys, predicted, truth):
    """One row per sample: the ``keys`` tuple, then ``pred_i`` and ``true_i`` columns."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    n_pts = predicted.shape[1]
    header = ["run_id", "tx", "step"] + [f"pred_{i}" for i in range(n_pts)] + [f"true_{i}" for i in range(n_pts)]
    rows = [list(k) + [fmt(v) for v in p] + [fmt(v) for v in t] for k, p, t in zip(keys, predicted, truth)]
    return _write(path, _csv_text(header, rows))


def _nice_max(value):
    if value <= 0:
        return 1.0
    mag = 10 ** np.floor(np.log10(value))
    for m in (1, 2, 2.5, 5, 10):
        if m * mag >= value:
            return float(m * mag)
    return float(10 * mag)


def sweep_svg(result: SweepResult, title="Mean RMSE vs output points"):
    """Line chart of mean RMSE against n_pts, one line per n_rx with a +-1 std band."""
    w, h = 640, 400
    left, right, top, bottom = 60, 120, 40, 50
    pw, ph = w - left - right, h - top - bottom
    xs = result.n_pts_values
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    y_hi = _nice_max(max(result.mean(p, r) + result.std(p, r) for p, r in result.cells))

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + ph - y / y_hi * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="24" text-anchor="middle" font-size="14">{title}</text>']
    for i in range(6):
        y = y_hi * i / 5
        out.append(f'<line x1="{left}" y1="{py(y):.1f}" x2="{left + pw}" y2="{py(y):.1f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{left - 6}" y="{py(y) + 4:.1f}" text-anchor="end">{y:g}</text>')
    for x in xs:
        out.append(f'<text x="{px(x):.1f}" y="{top + ph + 18}" text-anchor="middle">{x}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{h - 10}" text-anchor="middle">N_pts</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">RMSE (C)</text>')
    for i, n_rx in enumerate(result.n_rx_values):
        color = PALETTE[i % len(PALETTE)]
        pts = [p for p in xs if (p, n_rx) in result.cells]
        means = [result.mean(p, n_rx) for p in pts]
        stds = [result.std(p, n_rx) for p in pts]
        upper = [f"{px(p):.1f},{py(m + s):.1f}" for p, m, s in zip(pts, means, stds)]
        lower = [f"{px(p):.1f},{py(max(m - s, 0.0)):.1f}" for p, m, s in zip(pts, means, stds)]
        out.append(f'<polygon points="{" ".join(upper + lower[::-1])}" fill="{color}" fill-opacity="0.2" '
                   f'stroke="none"/>')
        line = " ".join(f"{px(p):.1f},{py(m):.1f}" for p, m in zip(pts, means))
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        for p, m in zip(pts, means):
            out.append(f'<circle cx="{px(p):.1f}" cy="{py(m):.1f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}">N_Rx = {n_rx}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_sweep_svg(result: SweepResult, path):
    return _write(path, sweep_svg(result))


def as_written(result: SweepResult) -> SweepResult:
    """Copy with fold values rounded the way sweep.csv stores them."""
    cells = {k: [float(fmt(v)) for v in vals] for k, vals in result.cells.items()}
    return SweepResult(n_folds=result.n_folds, cells=cells, baselines=dict(result.baselines))


def write_sweep_reports(result: SweepResult, out_dir):
    """sweep.csv, summary.csv and sweep.svg; the last two match what export-report rebuilds."""
    result = as_written(result)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "sweep": write_sweep_csv(result, out / "sweep.csv"),
        "summary": write_summary_csv(result, out / "summary.csv"),
        "chart": write_sweep_svg(result, out / "sweep.svg"),
    }
