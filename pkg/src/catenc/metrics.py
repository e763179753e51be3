"""Scoring, sample-per-level ratios, and relative performance tables."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import ColumnKind, DataTable

HIGHER_BETTER = frozenset({"f1", "accuracy"})
LOWER_BETTER = frozenset({"rmse", "mse"})


def f1_score(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    """Binary F1 with the zero conventions: empty precision or recall counts as 0,
    and P + R = 0 gives F1 = 0."""
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("length mismatch")
    bad = (set(np.unique(t)) | set(np.unique(p))) - {0.0, 1.0}
    if bad:
        raise ValueError(f"labels must be 0/1, got extras {sorted(bad)}")
    tp = float(np.sum((t == 1) & (p == 1)))
    fp = float(np.sum((t == 0) & (p == 1)))
    fn = float(np.sum((t == 1) & (p == 0)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def mse(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("length mismatch")
    return float(np.mean((t - p) ** 2))


def rmse(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    return float(np.sqrt(mse(y_true, y_pred)))


def accuracy(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    t = np.asarray(y_true, dtype=float)
    p = np.asarray(y_pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("length mismatch")
    return float(np.mean(t == p))


def aspl(n_rows: int, cardinality: int) -> float:
    """Average samples per level: n / c."""
    if cardinality < 1:
        raise ValueError("cardinality must be positive")
    if n_rows < 0:
        raise ValueError("negative row count")
    return n_rows / cardinality


def minaspl(table: DataTable) -> float:
    """n over the largest categorical cardinality: the binding per-level budget."""
    cards = []
    for name in table.categorical_names():
        levels = {v for v in table.column(name)}
        cards.append(len(levels))
    if not cards:
        raise ValueError("table has no categorical feature columns")
    return table.row_count / max(cards)


@dataclass(frozen=True)
class MetricRecord:
    """One grid cell: dataset x encoder x model x seed, scored once."""

    dataset: str
    encoder: str
    model: str
    seed: int
    metric: str
    value: float
    encode_time: float = 0.0
    train_time: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"metric value must be finite, got {self.value}")


RECORD_FIELDS = tuple(f.name for f in fields(MetricRecord))


def write_records_csv(records: Iterable[MetricRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow(
                [
                    r.dataset,
                    r.encoder,
                    r.model,
                    r.seed,
                    r.metric,
                    repr(r.value),
                    repr(r.encode_time),
                    repr(r.train_time),
                ]
            )


def read_records_csv(path: str) -> list[MetricRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                MetricRecord(
                    dataset=row["dataset"],
                    encoder=row["encoder"],
                    model=row["model"],
                    seed=int(row["seed"]),
                    metric=row["metric"],
                    value=float(row["value"]),
                    encode_time=float(row["encode_time"]),
                    train_time=float(row["train_time"]),
                )
            )
    return out


@dataclass(frozen=True)
class RelPerfRow:
    """Relative performance differences for one dataset x model slice."""

    dataset: str
    model: str
    metric: str
    best_encoder: str
    best_mean: float
    diffs: Mapping[str, float]
    flagged: tuple[str, ...] = ()


def relative_perf_diff(records: Sequence[MetricRecord]) -> RelPerfRow:
    """|mean_e - mean_best| / |mean_best| per encoder, within one dataset x model.

    The reference is the best per-encoder mean across seeds: max for f1/accuracy,
    min for rmse/mse. A zero best mean leaves the other encoders' entries NaN and
    flags them instead of dividing by zero.
    """
    if not records:
        raise ValueError("no records")
    datasets = {r.dataset for r in records}
    model_names = {r.model for r in records}
    metric_names = {r.metric for r in records}
    if len(datasets) != 1 or len(model_names) != 1 or len(metric_names) != 1:
        raise ValueError(
            "records must cover exactly one dataset, model, and metric; got "
            f"{sorted(datasets)} x {sorted(model_names)} x {sorted(metric_names)}"
        )
    metric = metric_names.pop()
    if metric in HIGHER_BETTER:
        better = max
    elif metric in LOWER_BETTER:
        better = min
    else:
        raise ValueError(f"no orientation known for metric {metric!r}")
    by_encoder: dict[str, list[float]] = {}
    for r in records:
        by_encoder.setdefault(r.encoder, []).append(r.value)
    means = {e: float(np.mean(vals)) for e, vals in by_encoder.items()}
    best_mean = better(means.values())
    best_encoder = better(means, key=means.get)
    diffs = {}
    flagged = []
    for e, m in means.items():
        if best_mean == 0.0:
            if m == 0.0:
                diffs[e] = 0.0
            else:
                diffs[e] = float("nan")
                flagged.append(e)
        else:
            diffs[e] = abs(m - best_mean) / abs(best_mean)
    return RelPerfRow(
        dataset=datasets.pop(),
        model=model_names.pop(),
        metric=metric,
        best_encoder=best_encoder,
        best_mean=best_mean,
        diffs=diffs,
        flagged=tuple(flagged),
    )
