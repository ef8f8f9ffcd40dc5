"""Transmitter-set cross-validation and the (n_pts, n_rx) sweep."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import multiprocessing

import numpy as np
from threadpoolctl import threadpool_limits

from .cnn import CnnConfig, CnnModel, TrainConfig, predict, train
from .errors import DivergenceError, InvalidArgumentError, LeakageError

log = logging.getLogger(__name__)

DEFAULT_N_PTS = tuple(range(5, 51, 5))
DEFAULT_N_RX = (1, 3, 5, 7, 9)


@dataclass
class TxSet:
    """All steps of one heating run seen from one transmitter."""

    set_id: str
    run_id: int
    tx_index: int
    inputs: np.ndarray  # steps x n_time x n_rx
    labels: np.ndarray  # steps x n_pts

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise InvalidArgumentError(f"{self.set_id}: inputs and labels not aligned by step")

    @property
    def steps(self):
        return len(self.labels)


def build_txsets(dataset, n_pts, n_rx, decimation=2, input_cache=None):
    """Preprocess every (run, tx) of ``dataset`` into :class:`TxSet` objects.

    ``input_cache`` (a dict) lets callers reuse inputs across ``n_pts`` values.
    """
    from .dataset import txset_id

    sets = []
    for run in dataset.runs:
        labels = dataset.labels(run.run_id, n_pts)
        for tx in range(dataset.geometry.n_transducers):
            key = (run.run_id, tx, n_rx, decimation)
            if input_cache is not None and key in input_cache:
                x = input_cache[key]
            else:
                x = dataset.inputs(run.run_id, tx, n_rx, decimation)
                if input_cache is not None:
                    input_cache[key] = x
            sets.append(TxSet(txset_id(run.run_id, tx), run.run_id, tx, x, labels))
    return sets


@dataclass(frozen=True)
class FoldPlan:
    """Partition of set ids into folds; ``folds[k]`` lists the ids tested in fold ``k``."""

    folds: tuple
    seed: int = 0

    @property
    def n_folds(self):
        return len(self.folds)

    @property
    def assignment(self):
        return {sid: k for k, members in enumerate(self.folds) for sid in members}

    def test_ids(self, fold):
        return list(self.folds[fold])

    def train_ids(self, fold):
        return [sid for k, members in enumerate(self.folds) if k != fold for sid in members]


def make_folds(set_ids, n_folds=10, seed=0, groups=None) -> FoldPlan:
    """Seeded random partition of ``set_ids`` into ``n_folds`` balanced folds.

    With ``groups`` (one label per id, e.g. the run) whole groups are kept
    together and dealt out round-robin instead.
    """
    set_ids = list(set_ids)
    if len(set(set_ids)) != len(set_ids):
        raise InvalidArgumentError("set ids must be unique")
    if n_folds < 2:
        raise InvalidArgumentError("cross-validation needs at least 2 folds")
    rng = np.random.default_rng(seed)
    if groups is None:
        if n_folds > len(set_ids):
            raise InvalidArgumentError(f"{len(set_ids)} sets cannot fill {n_folds} folds")
        order = rng.permutation(len(set_ids))
        folds = [[] for _ in range(n_folds)]
        for pos, i in enumerate(order):
            folds[pos % n_folds].append(set_ids[i])
    else:
        groups = list(groups)
        if len(groups) != len(set_ids):
            raise InvalidArgumentError("one group label per set id required")
        labels = sorted(set(groups))
        if n_folds > len(labels):
            raise InvalidArgumentError(f"{len(labels)} groups cannot fill {n_folds} folds")
        order = rng.permutation(len(labels))
        fold_of = {labels[i]: pos % n_folds for pos, i in enumerate(order)}
        folds = [[] for _ in range(n_folds)]
        for sid, g in zip(set_ids, groups):
            folds[fold_of[g]].append(sid)
    return FoldPlan(tuple(tuple(sorted(f)) for f in folds), seed)


def rmse(predicted, truth):
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise InvalidArgumentError(f"shape mismatch {predicted.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def check_disjoint(train_ids, test_ids, where=""):
    overlap = set(train_ids) & set(test_ids)
    if overlap:
        raise LeakageError(f"train/test overlap{where}: {sorted(overlap)}")


@dataclass
class FoldOutcome:
    fold: int
    rmse: float
    baseline_rmse: float
    n_train_sets: int
    n_test_sets: int
    best_epoch: int
    epochs: int
    train_rmse: float | None = None
    test_ids: list = field(default_factory=list)
    predictions: np.ndarray | None = field(default=None, repr=False)
    truth: np.ndarray | None = field(default=None, repr=False)


@dataclass
class CvResult:
    outcomes: list

    @property
    def rmses(self):
        return [o.rmse for o in self.outcomes]

    @property
    def baseline_rmses(self):
        return [o.baseline_rmse for o in self.outcomes]

    @property
    def mean_rmse(self):
        return float(np.mean(self.rmses))

    @property
    def mean_baseline_rmse(self):
        return float(np.mean(self.baseline_rmses))


def fold_seeds(seed, n_pts, n_rx, fold):
    """Model-init and training seeds for one cell/fold, independent of everything else."""
    init, tr = np.random.SeedSequence([seed, n_pts, n_rx, fold]).generate_state(2)
    return int(init), int(tr)


def default_workers():
    env = os.environ.get("THERMOSCOPE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# Arrays shared with forked fold workers; set by run_cv for the duration of a call.
_SHARED = {}


def _fold_job(fold):
    s = _SHARED
    plan = s["plan"]
    test_ids = plan.test_ids(fold)
    train_ids = plan.train_ids(fold)
    check_disjoint(train_ids, test_ids, f" in fold {fold} of cell {s['cell']}")
    ranges = s["ranges"]
    train_rows = np.concatenate([np.arange(*ranges[i]) for i in train_ids])
    test_rows = np.concatenate([np.arange(*ranges[i]) for i in test_ids])
    check_disjoint(train_rows.tolist(), test_rows.tolist(), f" (samples) in fold {fold}")
    x, y = s["x"], s["y"]
    n_pts, n_rx = s["cell"]
    init_seed, train_seed = fold_seeds(s["seed"], n_pts, n_rx, fold)
    model = CnnModel(s["cnn"], seed=init_seed, dtype=np.float32)
    with threadpool_limits(limits=1):
        try:
            result = train(model, x, y, s["train"], seed=train_seed, index=train_rows)
        except DivergenceError as exc:
            raise DivergenceError(exc.epoch, fold=fold) from exc
        pred = predict(model, x[test_rows])
        train_rmse = rmse(predict(model, x[train_rows]), y[train_rows]) if s["score_train"] else None
    truth = y[test_rows]
    baseline = np.broadcast_to(y[train_rows].mean(axis=0), truth.shape)
    return FoldOutcome(fold, rmse(pred, truth), rmse(baseline, truth), len(train_ids), len(test_ids),
                       result.best_epoch, len(result.history), train_rmse, test_ids,
                       pred if s["keep"] else None, truth if s["keep"] else None)


def run_cv(txsets, plan: FoldPlan, cnn_config: CnnConfig = CnnConfig(), train_config: TrainConfig = TrainConfig(),
           seed=0, workers=None, keep_predictions=False, score_train=False) -> CvResult:
    """Train on all folds but one and score the held-out fold, for every fold.

    Each fold also reports the RMSE of the training-fold mean profile on its
    test sets (``baseline_rmse``); ``score_train`` adds the model's RMSE on its
    own training sets.
    """
    if plan.n_folds < 2:
        raise InvalidArgumentError("cross-validation needs at least 2 folds")
    if not txsets:
        raise InvalidArgumentError("no transmitter sets")
    shapes = {(s.inputs.shape[1:], s.labels.shape[1]) for s in txsets}
    if len(shapes) != 1:
        raise InvalidArgumentError("all sets must share n_time, n_rx and n_pts")
    (n_time, n_rx), n_pts = shapes.pop()
    ids = [s.set_id for s in txsets]
    if len(set(ids)) != len(ids):
        raise LeakageError("duplicate transmitter-set ids")
    missing = set(plan.assignment) ^ set(ids)
    if missing:
        raise InvalidArgumentError(f"fold plan and dataset disagree on sets: {sorted(missing)[:5]}")

    ranges, start = {}, 0
    for s in txsets:
        ranges[s.set_id] = (start, start + s.steps)
        start += s.steps
    x = np.concatenate([s.inputs for s in txsets]).astype(np.float32, copy=False)
    y = np.concatenate([s.labels for s in txsets]).astype(float)
    cnn = replace(cnn_config, input_shape=(n_time, n_rx), n_pts=n_pts)

    _SHARED.update(plan=plan, ranges=ranges, x=x, y=y, cnn=cnn, train=train_config, seed=seed,
                   cell=(n_pts, n_rx), keep=keep_predictions, score_train=score_train)
    try:
        workers = default_workers() if workers is None else workers
        folds = range(plan.n_folds)
        if workers <= 1:
            outcomes = []
            for k in folds:
                outcomes.append(_fold_job(k))
                log.info("cell %s fold %d: rmse %.3f C", (n_pts, n_rx), k, outcomes[-1].rmse)
        else:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(workers, plan.n_folds), mp_context=ctx) as pool:
                outcomes = list(pool.map(_fold_job, folds))
    finally:
        _SHARED.clear()
    return CvResult(outcomes)


@dataclass
class SweepResult:
    n_folds: int
    cells: dict = field(default_factory=dict)  # (n_pts, n_rx) -> per-fold rmse list
    baselines: dict = field(default_factory=dict)

    def mean(self, n_pts, n_rx):
        return float(np.mean(self.cells[(n_pts, n_rx)]))

    def std(self, n_pts, n_rx):
        vals = self.cells[(n_pts, n_rx)]
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    @property
    def n_pts_values(self):
        return sorted({k[0] for k in self.cells})

    @property
    def n_rx_values(self):
        return sorted({k[1] for k in self.cells})

    def rows(self):
        """``(n_pts, n_rx, fold, rmse)`` tuples in grid order."""
        for (n_pts, n_rx) in sorted(self.cells):
            for fold, value in enumerate(self.cells[(n_pts, n_rx)]):
                yield n_pts, n_rx, fold, value

    def summary_rows(self):
        for (n_pts, n_rx) in sorted(self.cells):
            yield n_pts, n_rx, self.mean(n_pts, n_rx), self.std(n_pts, n_rx)


def run_sweep(dataset, n_pts_list=DEFAULT_N_PTS, n_rx_list=DEFAULT_N_RX, seed=0, n_folds=10,
              cnn_config: CnnConfig = CnnConfig(), train_config: TrainConfig = TrainConfig(),
              decimation=2, workers=None, group_by_run=False, progress=None) -> SweepResult:
    """Cross-validate every (n_pts, n_rx) cell with one fold plan shared by all cells."""
    if any(n % 2 == 0 for n in n_rx_list):
        raise InvalidArgumentError("n_rx values must be odd")
    set_ids = dataset.set_ids()
    groups = [sid.split("-")[0] for sid in set_ids] if group_by_run else None
    plan = make_folds(set_ids, n_folds, seed, groups)
    result = SweepResult(n_folds=n_folds)
    for n_rx in n_rx_list:
        cache = {}
        for n_pts in n_pts_list:
            sets = build_txsets(dataset, n_pts, n_rx, decimation, input_cache=cache)
            order = {sid: i for i, sid in enumerate(set_ids)}
            sets.sort(key=lambda s: order[s.set_id])
            cv = run_cv(sets, plan, cnn_config, train_config, seed, workers)
            result.cells[(n_pts, n_rx)] = cv.rmses
            result.baselines[(n_pts, n_rx)] = cv.baseline_rmses
            if progress:
                progress(n_pts, n_rx, cv)
        cache.clear()
    return result
