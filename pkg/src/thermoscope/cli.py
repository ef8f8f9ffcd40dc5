"""``thermoscope`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cnn import CnnModel, load_checkpoint, predict, save_checkpoint, train
from .config import RunConfig, load_config
from .dataset import make_synthetic_dataset
from .errors import ThermoscopeError
from .evaluation import build_txsets, fold_seeds, make_folds, rmse, run_sweep
from .reports import (read_sweep_csv, write_loss_history, write_predictions, write_summary_csv,
                      write_sweep_reports, write_sweep_svg)
from .storage import read_dataset, write_dataset, write_thetas

log = logging.getLogger("thermoscope")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="global seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--dataset", type=Path, help="dataset directory (default: config 'dataset')")
    common.add_argument("--n-rx", type=_positive_int, nargs="+", help="receiver counts (odd)")
    common.add_argument("--n-pts", type=_positive_int, nargs="+", help="radial output point counts")
    common.add_argument("--folds", type=_positive_int, help="number of cross-validation folds")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="thermoscope", description="Acoustic temperature-profile estimation.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate a synthetic dataset directory")
    sub.add_parser("preprocess", parents=[common], help="write preprocessed CNN inputs as .npy files")
    sub.add_parser("fit-correction", parents=[common], help="fit boundary corrections and store theta.json")
    p = sub.add_parser("train", parents=[common], help="train one model; writes checkpoint and loss history")
    p.add_argument("--holdout-fold", type=int, help="leave this fold of the fold plan out of training")
    p = sub.add_parser("evaluate", parents=[common], help="predict with a checkpoint and write per-step profiles")
    p.add_argument("--checkpoint", type=Path, required=True)
    sub.add_parser("sweep", parents=[common], help="cross-validate the (n_pts, n_rx) grid")
    p = sub.add_parser("export-report", parents=[common], help="rebuild summary CSV and SVG from sweep.csv")
    p.add_argument("--sweep-csv", type=Path, help="sweep results (default: <out>/sweep.csv)")
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(seed=args.seed, n_rx=args.n_rx, n_pts=args.n_pts, folds=args.folds,
                              out=args.out, dataset=args.dataset)


def _cell(cfg):
    return cfg.sweep.n_pts[0], cfg.sweep.n_rx[0]


def cmd_generate(cfg, args):
    target = Path(args.out) if args.out else Path(cfg.dataset)
    dataset = make_synthetic_dataset(cfg.synthetic())
    write_dataset(dataset, target)
    steps = sum(r.steps for r in dataset.runs)
    print(f"wrote {len(dataset.runs)} runs, {steps} steps, {len(dataset.set_ids())} transmitter sets to {target}")


def cmd_preprocess(cfg, args):
    dataset = read_dataset(cfg.dataset)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    n_rx = cfg.sweep.n_rx[0]
    for run in dataset.runs:
        for tx in range(dataset.geometry.n_transducers):
            x = dataset.inputs(run.run_id, tx, n_rx, cfg.sweep.decimation)
            np.save(out / f"inputs_run{run.run_id:02d}_tx{tx:02d}_nrx{n_rx}.npy", x)
    print(f"wrote inputs for {len(dataset.set_ids())} transmitter sets to {out}")


def cmd_fit_correction(cfg, args):
    dataset = read_dataset(cfg.dataset)
    thetas = dataset.fit_corrections(refit=True)
    path = write_thetas(cfg.dataset, thetas)
    for rid, theta in sorted(thetas.items()):
        print(f"run {rid}: " + " ".join(f"{k}={v:.6g}" for k, v in theta.as_dict().items()))
    print(f"wrote {path}")


def _train_ids(cfg, dataset, holdout):
    ids = dataset.set_ids()
    if holdout is None:
        return ids, []
    plan = _plan(cfg, dataset)
    if not 0 <= holdout < plan.n_folds:
        raise ThermoscopeError(f"--holdout-fold must be in [0, {plan.n_folds - 1}]")
    return plan.train_ids(holdout), plan.test_ids(holdout)


def _plan(cfg, dataset):
    ids = dataset.set_ids()
    groups = [sid.split("-")[0] for sid in ids] if cfg.sweep.group_by_run else None
    return make_folds(ids, cfg.sweep.folds, cfg.seed, groups)


def cmd_train(cfg, args):
    dataset = read_dataset(cfg.dataset)
    n_pts, n_rx = _cell(cfg)
    train_ids, test_ids = _train_ids(cfg, dataset, args.holdout_fold)
    chosen = set(train_ids)
    sets = [s for s in build_txsets(dataset, n_pts, n_rx, cfg.sweep.decimation) if s.set_id in chosen]
    x = np.concatenate([s.inputs for s in sets])
    y = np.concatenate([s.labels for s in sets])
    fold = cfg.sweep.folds if args.holdout_fold is None else args.holdout_fold
    init_seed, train_seed = fold_seeds(cfg.seed, n_pts, n_rx, fold)
    model = CnnModel(replace(cfg.cnn, n_pts=n_pts, input_shape=x.shape[1:]), seed=init_seed)
    result = train(model, x, y, cfg.training, seed=train_seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"n_pts": n_pts, "n_rx": n_rx, "seed": cfg.seed, "decimation": cfg.sweep.decimation,
            "folds": cfg.sweep.folds, "group_by_run": cfg.sweep.group_by_run,
            "holdout_fold": args.holdout_fold, "test_sets": test_ids, "best_epoch": result.best_epoch}
    save_checkpoint(model, out / "model.ckpt", meta)
    write_loss_history(result.history, out / "loss_history.csv")
    print(f"trained on {len(sets)} sets ({len(x)} samples), best epoch {result.best_epoch}; wrote {out}")


def cmd_evaluate(cfg, args):
    model, meta = load_checkpoint(args.checkpoint)
    dataset = read_dataset(cfg.dataset)
    n_pts, n_rx = meta["n_pts"], meta["n_rx"]
    wanted = set(meta.get("test_sets") or dataset.set_ids())
    sets = [s for s in build_txsets(dataset, n_pts, n_rx, meta.get("decimation", 2)) if s.set_id in wanted]
    keys, preds, truths = [], [], []
    for s in sets:
        preds.append(predict(model, s.inputs))
        truths.append(s.labels)
        keys += [(s.run_id, s.tx_index, step) for step in range(s.steps)]
    pred, truth = np.concatenate(preds), np.concatenate(truths)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(out / "predictions.csv", keys, pred, truth)
    print(f"rmse {rmse(pred, truth):.4f} C over {len(sets)} sets; wrote {out / 'predictions.csv'}")


def cmd_sweep(cfg, args):
    dataset = read_dataset(cfg.dataset)

    def progress(n_pts, n_rx, cv):
        print(f"n_pts={n_pts} n_rx={n_rx}: mean rmse {cv.mean_rmse:.3f} C "
              f"(baseline {cv.mean_baseline_rmse:.3f} C)", flush=True)

    result = run_sweep(dataset, cfg.sweep.n_pts, cfg.sweep.n_rx, seed=cfg.seed, n_folds=cfg.sweep.folds,
                       cnn_config=cfg.cnn, train_config=cfg.training, decimation=cfg.sweep.decimation,
                       group_by_run=cfg.sweep.group_by_run, progress=progress)
    paths = write_sweep_reports(result, cfg.out)
    print("wrote " + ", ".join(str(p) for p in paths.values()))


def cmd_export_report(cfg, args):
    src = args.sweep_csv or Path(cfg.out) / "sweep.csv"
    result = read_sweep_csv(src)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": write_summary_csv(result, out / "summary.csv"),
             "chart": write_sweep_svg(result, out / "sweep.svg")}
    print(f"wrote {paths['summary']}, {paths['chart']}")


COMMANDS = {
    "generate": cmd_generate,
    "preprocess": cmd_preprocess,
    "fit-correction": cmd_fit_correction,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "export-report": cmd_export_report,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args)
    except (ThermoscopeError, OSError, json.JSONDecodeError) as exc:
        print(f"thermoscope: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
