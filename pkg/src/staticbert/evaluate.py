"""Training with early stopping, stratified k-fold evaluation, metrics.

Metrics are the five confusion-derived rates (as percentages):

    accuracy    = (TP + TN) / (TP + TN + FP + FN)
    precision   = TP / (TP + FP)
    recall      = TP / (TP + FN)
    f1          = 2 * precision * recall / (precision + recall)
    specificity = TN / (TN + FP)

A ratio with a zero denominator is reported as absent (None), never as 0 or
100. Fold aggregation computes both conventions: the headline numbers are
micro-averaged (confusion matrices summed across folds, formulas applied
once); the per-fold mean (macro) is reported alongside, tagged.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import LabeledExample, Vocabulary, encode_corpus, stratified_folds
from .distill import EmbeddingMatrix
from .engine import bce_loss, save_params, Adam
from .models import Model, ModelConfig, build_model
from .seeding import derive_seed, rng_for

METRIC_NAMES = ("f1", "accuracy", "precision", "recall", "specificity")

# Percentages are written with this many decimals everywhere (files and
# rendered tables).
PERCENT_DECIMALS = 2


class TrainingDivergedError(RuntimeError):
    """Non-finite loss encountered; the message names the epoch."""


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @staticmethod
    def from_pairs(y_true, y_pred) -> "ConfusionMatrix":
        y_true = np.asarray(y_true).astype(int)
        y_pred = np.asarray(y_pred).astype(int)
        if y_true.shape != y_pred.shape:
            raise ValueError(f"label/prediction shapes differ: {y_true.shape} vs {y_pred.shape}")
        tp = int(np.sum((y_true == 1) & (y_pred == 1)))
        tn = int(np.sum((y_true == 0) & (y_pred == 0)))
        fp = int(np.sum((y_true == 0) & (y_pred == 1)))
        fn = int(np.sum((y_true == 1) & (y_pred == 0)))
        return ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class MetricsReport:
    """Percent metrics for one evaluation (or a fold aggregate)."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    specificity: float | None
    confusion: ConfusionMatrix
    per_fold: tuple["MetricsReport", ...] | None = None
    aggregate_rule: str | None = None
    macro: dict | None = None

    def as_dict(self) -> dict:
        values = {name: getattr(self, name) for name in METRIC_NAMES}
        return {
            name: None if v is None else round(v, PERCENT_DECIMALS)
            for name, v in values.items()
        }


def metrics(confusion: ConfusionMatrix) -> MetricsReport:
    """Evaluate the five rates from one confusion matrix."""
    if confusion.total < 1:
        raise ValueError("confusion matrix is empty; metrics undefined")

    def rate(num: int, den: int) -> float | None:
        return None if den == 0 else 100.0 * num / den

    accuracy = rate(confusion.tp + confusion.tn, confusion.total)
    precision = rate(confusion.tp, confusion.tp + confusion.fp)
    recall = rate(confusion.tp, confusion.tp + confusion.fn)
    specificity = rate(confusion.tn, confusion.tn + confusion.fp)
    if precision is None or recall is None or precision + recall == 0.0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1, specificity=specificity, confusion=confusion)


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 100
    batch_size: int = 32
    patience: int = 10
    learning_rate: float = 1e-3
    min_improvement: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs, batch_size and patience must all be >= 1")


@dataclass
class TrainRecord:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = math.inf
    checkpoint_path: str | None = None


class EarlyStopper:
    """Track the best validation loss; signal a stop once the best epoch
    falls more than ``patience`` epochs behind.

    An epoch counts as an improvement only when it beats the best loss by
    at least ``min_improvement``.
    """

    def __init__(self, patience: int, min_improvement: float = 1e-5):
        self.patience = patience
        self.min_improvement = min_improvement
        self.best_epoch = 0
        self.best_loss = math.inf

    def update(self, epoch: int, loss: float) -> str:
        """Returns 'improved', 'continue' or 'stop'."""
        if self.best_loss - loss >= self.min_improvement or self.best_epoch == 0:
            self.best_epoch = epoch
            self.best_loss = loss
            return "improved"
        if epoch - self.best_epoch > self.patience:
            return "stop"
        return "continue"


def _epoch_losses(model: Model, X: np.ndarray, y: np.ndarray, batch_size: int) -> float:
    """Eval-mode mean BCE over a set (batched)."""
    total = 0.0
    for start in range(0, len(y), batch_size):
        xb, yb = X[start:start + batch_size], y[start:start + batch_size]
        loss = bce_loss(model.forward(xb), yb).item()
        total += loss * len(yb)
    return total / len(y)


def train(model: Model, train_set, val_set, schedule: TrainSchedule,
          checkpoint_path=None) -> TrainRecord:
    """Optimize the model with Adam, early stopping, and best-checkpoint
    restore.

    Both sets are (X indices, y labels) pairs. Training stops at the epoch
    budget or once validation loss has not improved (by at least
    ``min_improvement``) within the last ``patience`` epochs. The best
    parameters are restored onto the model and, when a path is given,
    written as a checkpoint file. Fully deterministic given the seed.
    """
    X_train, y_train = np.asarray(train_set[0]), np.asarray(train_set[1])
    X_val, y_val = np.asarray(val_set[0]), np.asarray(val_set[1])
    if len(y_train) == 0 or len(y_val) == 0:
        raise ValueError("train and validation sets must both be non-empty")

    params = [p for _, p in model.params()]
    optimizer = Adam(params, lr=schedule.learning_rate)
    shuffle_rng = rng_for(schedule.seed, "shuffle")
    dropout_rng = rng_for(schedule.seed, "dropout")
    stopper = EarlyStopper(schedule.patience, schedule.min_improvement)
    record = TrainRecord()
    best_state = model.state_dict()

    for epoch in range(1, schedule.epochs + 1):
        order = shuffle_rng.permutation(len(y_train))
        epoch_loss = 0.0
        for start in range(0, len(order), schedule.batch_size):
            batch = order[start:start + schedule.batch_size]
            xb, yb = X_train[batch], y_train[batch]
            loss = bce_loss(model.forward(xb, train=True, rng=dropout_rng), yb)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += value * len(yb)
        record.train_losses.append(epoch_loss / len(y_train))

        val_loss = _epoch_losses(model, X_val, y_val, schedule.batch_size)
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        record.val_losses.append(val_loss)
        record.stopped_epoch = epoch

        verdict = stopper.update(epoch, val_loss)
        if verdict == "improved":
            best_state = model.state_dict()
        elif verdict == "stop":
            break

    record.best_epoch = stopper.best_epoch
    record.best_val_loss = stopper.best_loss
    model.load_state(best_state)
    if checkpoint_path is not None:
        save_params(checkpoint_path, model.params(), seed=schedule.seed)
        record.checkpoint_path = str(checkpoint_path)
    return record


def _stratified_holdout(labels: np.ndarray, fraction: float, seed: int):
    """Split indices into (rest, holdout) keeping class proportions; every
    class contributes at least one example to each side."""
    rng = rng_for(seed, "holdout")
    holdout: list[int] = []
    for label in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == label)
        if len(members) < 2:
            raise ValueError(f"class {label} has {len(members)} member(s); cannot hold out")
        take = min(max(1, round(fraction * len(members))), len(members) - 1)
        picked = rng.permutation(len(members))[:take]
        holdout.extend(members[picked].tolist())
    holdout_set = set(holdout)
    rest = [i for i in range(len(labels)) if i not in holdout_set]
    return np.array(rest, dtype=np.int64), np.array(sorted(holdout), dtype=np.int64)


def run_kfold(
    examples: list[LabeledExample],
    vocab: Vocabulary,
    matrix: EmbeddingMatrix,
    config: ModelConfig,
    k: int = 10,
    seed: int = 0,
    schedule: TrainSchedule | None = None,
    out_dir=None,
    jobs: int = 1,
    model_factory=None,
    val_fraction: float = 0.1,
) -> MetricsReport:
    """Stratified k-fold protocol.

    Each fold trains a fresh model on the other k-1 folds (with a stratified
    ``val_fraction`` of that portion held out for early stopping) and is
    evaluated on the held-out fold. Per-fold seeds derive from
    (seed, fold id), so folds are independent and may run in parallel.
    """
    schedule = schedule or TrainSchedule(seed=seed)
    factory = model_factory or build_model
    X, y = encode_corpus(examples, vocab, config.max_len)
    plan = stratified_folds(y.tolist(), k=k, seed=seed)
    assignments = np.array(plan.assignments)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        write_resolved_config(out_path / "resolved-config", config, schedule, k=k, seed=seed)
        plan.write(out_path / "fold-plan")

    def run_fold(fold: int) -> tuple[MetricsReport, TrainRecord]:
        test_idx = np.flatnonzero(assignments == fold)
        pool_idx = np.flatnonzero(assignments != fold)
        fold_seed = derive_seed(seed, "fold", fold)
        rest, holdout = _stratified_holdout(y[pool_idx], val_fraction, fold_seed)
        train_idx, val_idx = pool_idx[rest], pool_idx[holdout]
        model = factory(config.with_overrides(seed=fold_seed), matrix)
        fold_schedule = TrainSchedule(
            epochs=schedule.epochs, batch_size=schedule.batch_size,
            patience=schedule.patience, learning_rate=schedule.learning_rate,
            min_improvement=schedule.min_improvement, seed=fold_seed,
        )
        checkpoint = None
        if out_path is not None:
            fold_dir = out_path / f"fold-{fold}"
            fold_dir.mkdir(exist_ok=True)
            checkpoint = fold_dir / "checkpoint"
        record = train(model, (X[train_idx], y[train_idx]), (X[val_idx], y[val_idx]),
                       fold_schedule, checkpoint_path=checkpoint)
        probs = model.predict_proba(X[test_idx])
        confusion = ConfusionMatrix.from_pairs(y[test_idx], (probs >= 0.5).astype(int))
        report = metrics(confusion)
        if out_path is not None:
            write_metrics_file(out_path / f"fold-{fold}" / "metrics", report)
        return report, record

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fold_results = list(pool.map(run_fold, range(k)))
    else:
        fold_results = [run_fold(fold) for fold in range(k)]

    fold_reports = tuple(report for report, _ in fold_results)
    total_confusion = ConfusionMatrix()
    for report in fold_reports:
        total_confusion = total_confusion + report.confusion
    micro = metrics(total_confusion)
    macro = {
        name: _mean_defined([getattr(r, name) for r in fold_reports])
        for name in METRIC_NAMES
    }
    aggregate = MetricsReport(
        accuracy=micro.accuracy, precision=micro.precision, recall=micro.recall,
        f1=micro.f1, specificity=micro.specificity, confusion=total_confusion,
        per_fold=fold_reports, aggregate_rule="micro", macro=macro,
    )
    if out_path is not None:
        write_metrics_file(out_path / "aggregate-metrics", aggregate, k=k, seed=seed)
    return aggregate


def _mean_defined(values) -> float | None:
    defined = [v for v in values if v is not None]
    return None if not defined else float(np.mean(defined))


# ---------------------------------------------------------------------------
# run-directory files
# ---------------------------------------------------------------------------

def write_resolved_config(path, config: ModelConfig, schedule: TrainSchedule,
                          k: int, seed: int) -> None:
    """Key-value text mirror of every resolved setting, for provenance."""
    lines = {}
    lines.update(config.as_dict())
    lines.update({
        "epochs": schedule.epochs, "batch_size": schedule.batch_size,
        "patience": schedule.patience, "learning_rate": schedule.learning_rate,
        "min_improvement": schedule.min_improvement,
        "folds": k, "global_seed": seed,
    })
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(lines):
            fh.write(f"{key} = {lines[key]}\n")


def read_resolved_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.split("=", 1)
                out[key.strip()] = value.strip()
    return out


def write_metrics_file(path, report: MetricsReport, k: int | None = None,
                       seed: int | None = None) -> None:
    payload: dict = dict(report.as_dict())
    payload["confusion"] = report.confusion.as_dict()
    if report.aggregate_rule is not None:
        payload["aggregate_rule"] = report.aggregate_rule
    if report.macro is not None:
        payload["macro"] = {
            name: None if v is None else round(v, PERCENT_DECIMALS)
            for name, v in report.macro.items()
        }
    if k is not None:
        payload["folds"] = k
    if seed is not None:
        payload["seed"] = seed
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_metrics_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# comparison report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    """One evaluated run: a display name, its pairing keys, its metrics."""

    name: str
    architecture: str
    embedding: str
    metrics: dict

    def metric(self, name: str) -> float | None:
        return self.metrics.get(name)


@dataclass(frozen=True)
class DeltaRow:
    architecture: str
    baseline: str
    static: str
    deltas: dict


@dataclass(frozen=True)
class ComparisonReport:
    runs: tuple[RunSummary, ...]
    deltas: tuple[DeltaRow, ...]
    average_deltas: dict

    def to_markdown(self) -> str:
        header = "| Model | " + " | ".join(n.capitalize() for n in METRIC_NAMES) + " |"
        rule = "|---" * (len(METRIC_NAMES) + 1) + "|"
        maxima = {
            name: max((r.metric(name) for r in self.runs if r.metric(name) is not None),
                      default=None)
            for name in METRIC_NAMES
        }
        lines = [header, rule]
        for run in self.runs:
            cells = []
            for name in METRIC_NAMES:
                value = run.metric(name)
                if value is None:
                    cells.append("-")
                elif maxima[name] is not None and value == maxima[name]:
                    cells.append(f"**{value:.{PERCENT_DECIMALS}f}**")
                else:
                    cells.append(f"{value:.{PERCENT_DECIMALS}f}")
            lines.append(f"| {run.name} | " + " | ".join(cells) + " |")
        if self.deltas:
            lines.append("")
            lines.append("Paired deltas (static-embedding run minus its baseline):")
            lines.append("")
            lines.append("| Architecture | " + " | ".join(n.capitalize() for n in METRIC_NAMES) + " |")
            lines.append(rule)
            for row in self.deltas:
                cells = [_format_delta(row.deltas.get(name)) for name in METRIC_NAMES]
                lines.append(f"| {row.architecture} | " + " | ".join(cells) + " |")
            avg_cells = [_format_delta(self.average_deltas.get(name)) for name in METRIC_NAMES]
            lines.append("| average | " + " | ".join(avg_cells) + " |")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["kind,name,architecture,embedding," + ",".join(METRIC_NAMES)]
        for run in self.runs:
            values = ",".join(_format_csv(run.metric(name)) for name in METRIC_NAMES)
            lines.append(f"run,{run.name},{run.architecture},{run.embedding},{values}")
        for row in self.deltas:
            values = ",".join(_format_csv(row.deltas.get(name)) for name in METRIC_NAMES)
            lines.append(f"delta,{row.static} vs {row.baseline},{row.architecture},,{values}")
        if self.deltas:
            values = ",".join(_format_csv(self.average_deltas.get(name)) for name in METRIC_NAMES)
            lines.append(f"average_delta,average,,,{values}")
        return "\n".join(lines) + "\n"


def _format_delta(value) -> str:
    return "-" if value is None else f"{value:+.{PERCENT_DECIMALS}f}"


def _format_csv(value) -> str:
    return "" if value is None else f"{value:.{PERCENT_DECIMALS}f}"


def comparison_report(runs: list[RunSummary]) -> ComparisonReport:
    """Rows for every run plus a delta section pairing runs of the same
    architecture that differ in embedding source; the per-metric average of
    the paired differences is appended."""
    if not runs:
        raise ValueError("comparison report needs at least one run")
    statics: dict[str, RunSummary] = {}
    for run in runs:
        if run.embedding == "static_be" and run.architecture not in statics:
            statics[run.architecture] = run
    deltas: list[DeltaRow] = []
    for run in runs:
        if run.embedding == "static_be":
            continue
        partner = statics.get(run.architecture)
        if partner is None:
            continue
        row = {}
        for name in METRIC_NAMES:
            base, static = run.metric(name), partner.metric(name)
            row[name] = None if base is None or static is None else static - base
        deltas.append(DeltaRow(architecture=run.architecture, baseline=run.name,
                               static=partner.name, deltas=row))
    average = {
        name: _mean_defined([d.deltas.get(name) for d in deltas])
        for name in METRIC_NAMES
    }
    return ComparisonReport(runs=tuple(runs), deltas=tuple(deltas), average_deltas=average)
