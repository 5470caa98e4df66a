"""Experiment driver: per-fold training, nested cross-validation, reports.

A fold trains on its training block for a fixed number of epochs,
evaluates the validation block after every epoch, restores the parameters
of the best validation epoch, and only then touches the test block once.
Experiments repeat the whole cross-validation with re-seeded partitions
and aggregate mean and standard deviation over all folds.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, stratified_folds
from .errors import ConfigError, NumericalError
from .layers import softmax_cross_entropy
from .model import Model, ModelConfig, with_resolved_k
from .shortest_paths import SPTensor, compute_sp_tensor

log = logging.getLogger(__name__)


@dataclass
class FoldReport:
    """Outcome of one (repeat, fold) training."""

    fold_id: int
    repeat_id: int
    test_accuracy: float
    best_epoch: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    val_accuracies: list[float] = field(default_factory=list)
    wall_time_seconds: float = 0.0
    error: str | None = None


@dataclass
class ExperimentReport:
    """All fold reports of one experiment plus their aggregate accuracy.

    ``mean_accuracy`` and ``std_accuracy`` are computed over the folds
    that completed without error (population standard deviation, reported
    in the usual "mean +/- std" percent format by :func:`emit_report`).
    """

    dataset: str
    config: ModelConfig
    folds: int
    repeats: int
    fold_reports: list[FoldReport]
    mean_accuracy: float
    std_accuracy: float


def precompute_sp_tensors(dataset: Dataset, r: int) -> list[SPTensor]:
    """One shortest-path tensor per graph; r is fixed per experiment."""
    return [compute_sp_tensor(g, r) for g in dataset.graphs]


def _evaluate(model: Model, dataset: Dataset, sps, indices, counters=None,
              phase: str = "eval") -> tuple[float, float]:
    """(accuracy, mean loss) over the given graph indices, dropout off."""
    correct = 0
    total_loss = 0.0
    for gi in indices:
        graph = dataset.graphs[gi]
        _, cache = model.forward(sps[gi], graph.features, train_mode=False)
        loss, _ = softmax_cross_entropy(cache["logits"], graph.target)
        total_loss += loss
        if int(np.argmax(cache["logits"])) == graph.target:
            correct += 1
        if counters is not None:
            counters.setdefault(phase, {}).setdefault(int(gi), 0)
            counters[phase][int(gi)] += 1
    n = len(indices)
    return correct / n, total_loss / n


def train_one_fold(dataset: Dataset, split, config: ModelConfig,
                   fold_id: int = 0, repeat_id: int = 0,
                   sps: list[SPTensor] | None = None,
                   counters: dict | None = None) -> FoldReport:
    """Train on one split and report test accuracy at the best epoch.

    ``split`` is the (train, validation, test) index triple.  ``counters``
    is optional instrumentation: a dict that receives per-phase counts of
    forward passes per graph index.
    """
    train_idx, val_idx, test_idx = (np.asarray(s, dtype=np.int64) for s in split)
    n = len(dataset.graphs)
    combined = np.concatenate([train_idx, val_idx, test_idx])
    if len(combined) != n or len(np.unique(combined)) != n:
        raise ConfigError("split is not a disjoint cover of the dataset")
    train_targets = {dataset.graphs[i].target for i in train_idx}
    if len(train_targets) != dataset.num_classes:
        raise ConfigError("training block is missing at least one class")

    start = time.perf_counter()
    if sps is None:
        sps = precompute_sp_tensors(dataset, config.r)
    config = with_resolved_k(config, [dataset.graphs[i].node_count for i in train_idx])
    config.validate()

    model = Model(config, dataset.feature_dim, dataset.num_classes)
    optimizer = model.make_optimizer()
    rng = np.random.default_rng([config.seed, fold_id, 0x7261])

    best_acc = -1.0
    best_epoch = 0
    best_state = model.get_state()
    train_losses: list[float] = []
    val_losses: list[float] = []
    val_accuracies: list[float] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train_idx)
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo: lo + config.batch_size]
            model.zero_gradients()
            for gi in batch:
                graph = dataset.graphs[gi]
                loss, _, _ = model.loss_and_gradients(
                    sps[gi], graph.features, graph.target,
                    train_mode=True, rng=rng,
                )
                if not math.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss on graph {gi} "
                        f"(fold {fold_id}, repeat {repeat_id}, epoch {epoch})"
                    )
                epoch_loss += loss
                if counters is not None:
                    counters.setdefault("train", {}).setdefault(int(gi), 0)
                    counters["train"][int(gi)] += 1
            model.scale_gradients(1.0 / len(batch))
            optimizer.step(model.gradients())
        train_losses.append(epoch_loss / len(train_idx))

        val_acc, val_loss = _evaluate(model, dataset, sps, val_idx,
                                      counters=counters, phase="val")
        val_losses.append(val_loss)
        val_accuracies.append(val_acc)
        if val_acc > best_acc:  # ties keep the earliest epoch
            best_acc = val_acc
            best_epoch = epoch
            best_state = model.get_state()

    model.set_state(best_state)
    test_acc, _ = _evaluate(model, dataset, sps, test_idx,
                            counters=counters, phase="test")
    return FoldReport(
        fold_id=fold_id,
        repeat_id=repeat_id,
        test_accuracy=test_acc,
        best_epoch=best_epoch,
        train_losses=train_losses,
        val_losses=val_losses,
        val_accuracies=val_accuracies,
        wall_time_seconds=time.perf_counter() - start,
    )


# Worker-process state: the dataset is shipped once per worker instead of
# once per task, and each worker precomputes its shortest-path tensors.
_worker_state: dict = {}


def _init_worker(dataset: Dataset, r: int) -> None:
    _worker_state["dataset"] = dataset
    _worker_state["sps"] = precompute_sp_tensors(dataset, r)


def _fold_task(args) -> FoldReport:
    split, config, fold_id, repeat_id = args
    dataset = _worker_state["dataset"]
    sps = _worker_state["sps"]
    try:
        return train_one_fold(dataset, split, config, fold_id=fold_id,
                              repeat_id=repeat_id, sps=sps)
    except NumericalError as exc:
        log.error("fold %d repeat %d failed: %s", fold_id, repeat_id, exc)
        return FoldReport(fold_id=fold_id, repeat_id=repeat_id,
                          test_accuracy=float("nan"), best_epoch=0,
                          error=str(exc))


def aggregate_accuracy(fold_reports: list[FoldReport]) -> tuple[float, float]:
    """Mean and population standard deviation over completed folds."""
    acc = np.array([fr.test_accuracy for fr in fold_reports if fr.error is None])
    if acc.size == 0:
        raise NumericalError("every fold failed; no accuracies to aggregate")
    return float(acc.mean()), float(acc.std())


def run_experiment(dataset: Dataset, config: ModelConfig, folds: int = 10,
                   repeats: int = 10, jobs: int = 1) -> ExperimentReport:
    """Nested cross-validation: ``folds`` x ``repeats`` independent trainings.

    Partitions are re-drawn per repeat with seed ``config.seed + repeat``.
    A fold that fails numerically is recorded with its error and the
    experiment continues; aggregates cover the completed folds.
    """
    config.validate()
    tasks = []
    for repeat in range(repeats):
        repeat_config = replace(config, seed=config.seed + repeat)
        splits = stratified_folds(dataset, folds, seed=config.seed + repeat)
        for fold, split in enumerate(splits):
            tasks.append((split, repeat_config, fold, repeat))

    if jobs > 1:
        # Folds are deterministic in (seed, repeat, fold), so scheduling
        # order cannot change the results.
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(dataset, config.r)) as pool:
            fold_reports = list(pool.map(_fold_task, tasks, chunksize=1))
        for report in fold_reports:
            log.info("repeat %d fold %d: accuracy %.4f (epoch %d, %.1fs)",
                     report.repeat_id, report.fold_id, report.test_accuracy,
                     report.best_epoch, report.wall_time_seconds)
    else:
        sps = precompute_sp_tensors(dataset, config.r)
        fold_reports = []
        for split, cfg, fold, repeat in tasks:
            try:
                report = train_one_fold(dataset, split, cfg, fold_id=fold,
                                        repeat_id=repeat, sps=sps)
            except NumericalError as exc:
                log.error("fold %d repeat %d failed: %s", fold, repeat, exc)
                report = FoldReport(fold_id=fold, repeat_id=repeat,
                                    test_accuracy=float("nan"), best_epoch=0,
                                    error=str(exc))
            fold_reports.append(report)
            log.info("repeat %d fold %d: accuracy %.4f (epoch %d, %.1fs)",
                     repeat, fold, report.test_accuracy, report.best_epoch,
                     report.wall_time_seconds)

    mean, std = aggregate_accuracy(fold_reports)
    return ExperimentReport(dataset=dataset.name, config=config, folds=folds,
                            repeats=repeats, fold_reports=fold_reports,
                            mean_accuracy=mean, std_accuracy=std)


def format_summary(report: ExperimentReport) -> str:
    failed = sum(1 for fr in report.fold_reports if fr.error is not None)
    lines = [
        f"dataset: {report.dataset}",
        f"mode: {report.config.mode}",
        f"r: {report.config.r}",
        f"folds: {report.folds}",
        f"repeats: {report.repeats}",
        f"fold reports: {len(report.fold_reports)} ({failed} failed)",
        f"accuracy: {report.mean_accuracy * 100:.2f} ± {report.std_accuracy * 100:.2f}",
    ]
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir) -> tuple[Path, Path]:
    """Write ``folds.csv`` and ``summary.txt`` under ``out_dir``.

    The CSV holds one row per fold with full-precision floats (so parsing
    it back recovers every numeric field exactly); the summary carries the
    percent-formatted "mean +/- std" line.
    """
    if not report.fold_reports:
        raise ConfigError("refusing to write a report with no folds")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "folds.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "mode", "r", "fold", "repeat",
                         "accuracy", "best_epoch", "seconds"])
        for fr in report.fold_reports:
            writer.writerow([
                report.dataset, report.config.mode, report.config.r,
                fr.fold_id, fr.repeat_id, repr(fr.test_accuracy),
                fr.best_epoch, repr(fr.wall_time_seconds),
            ])
    summary_path = out / "summary.txt"
    summary_path.write_text(format_summary(report))
    return csv_path, summary_path
