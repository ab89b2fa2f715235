"""Safety-centric evaluation: reliability bins, ECE, Brier, ranking metrics,
and subject-level bootstrap confidence intervals.

Record-level operations wrap array-level implementations so the bootstrap
can resample cheaply; both routes share the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateLabels,
    EmptyInput,
    MetricUndefinedOnResample,
    MissingProbs,
)
from .records import CLASSES, PredictionRecord


@dataclass(frozen=True)
class ReliabilityBin:
    """One confidence bin of a reliability diagram.

    Bin m covers ((m-1)/M, m/M], except the first bin which also includes 0.
    Empty bins report zero count with mean_conf and accuracy of 0.
    """

    lo: float
    hi: float
    count: int
    mean_conf: float
    accuracy: float


@dataclass(frozen=True)
class CalibrationReport:
    ece: float
    brier: float
    bins: tuple[ReliabilityBin, ...]
    per_class_auroc: Mapping[int, float | None]
    per_class_aupr: Mapping[int, float | None]
    n: int
    ci: Mapping[str, tuple[float, float, float]] | None = None


# --- array-level metric cores --------------------------------------------------

def bin_indices(conf: np.ndarray, m: int) -> np.ndarray:
    """0-based bin index per confidence; lower-closed first bin."""
    idx = np.ceil(conf * m).astype(np.int64)
    np.clip(idx, 1, m, out=idx)
    return idx - 1


def _bin_stats(conf: np.ndarray, correct: np.ndarray, m: int):
    idx = bin_indices(conf, m)
    counts = np.bincount(idx, minlength=m)
    conf_sums = np.bincount(idx, weights=conf, minlength=m)
    acc_sums = np.bincount(idx, weights=correct.astype(np.float64), minlength=m)
    return counts, conf_sums, acc_sums


def ece_arrays(conf: np.ndarray, correct: np.ndarray, m: int = 10) -> float:
    if conf.size == 0:
        raise EmptyInput("no records")
    counts, conf_sums, acc_sums = _bin_stats(conf, correct, m)
    nz = counts > 0
    gaps = np.abs(acc_sums[nz] / counts[nz] - conf_sums[nz] / counts[nz])
    return float(np.sum(counts[nz] / conf.size * gaps))


def brier_arrays(probs: np.ndarray, true_class: np.ndarray) -> float:
    if probs.size == 0:
        raise EmptyInput("no records")
    onehot = np.zeros_like(probs)
    onehot[np.arange(probs.shape[0]), true_class] = 1.0
    return float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))


def auroc_arrays(scores: np.ndarray, labels: np.ndarray) -> float:
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative")
    # average ranks over tied score groups (Mann-Whitney half-credit)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg_ranks = (ends - counts + 1 + ends) / 2.0
    rank_sum_pos = float(avg_ranks[inverse][labels].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def pr_curve_arrays(scores: np.ndarray, labels: np.ndarray):
    """Precision/recall at each distinct score threshold, descending.

    Tied scores form a single step. Returns (thresholds, precision, recall).
    """
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise DegenerateLabels("need at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # inclusive end index of each tied group
    last = np.nonzero(np.diff(sorted_scores))[0]
    ends = np.append(last, scores.size - 1)
    tp = np.cumsum(sorted_labels)[ends]
    predicted = ends + 1
    precision = tp / predicted
    recall = tp / n_pos
    return sorted_scores[ends], precision, recall


def aupr_arrays(scores: np.ndarray, labels: np.ndarray) -> float:
    """Average precision over the descending-score sweep (step interpolation)."""
    _, precision, recall = pr_curve_arrays(scores, labels)
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * precision))


# --- record-level operations ----------------------------------------------------

def _conf_correct(records: Sequence[PredictionRecord]):
    conf = np.array([r.confidence for r in records], dtype=np.float64)
    correct = np.array([r.correct for r in records], dtype=bool)
    return conf, correct


def _probs_true(records: Sequence[PredictionRecord]):
    if not records:
        raise EmptyInput("no records")
    if any(not r.probs for r in records):
        raise MissingProbs("record without probability vector")
    probs = np.array([r.probs for r in records], dtype=np.float64)
    true = np.array([r.true_class for r in records], dtype=np.int64)
    return probs, true


def reliability_bins(
    records: Sequence[PredictionRecord], m: int = 10
) -> list[ReliabilityBin]:
    if not records:
        raise EmptyInput("no records")
    if m < 1:
        raise ValueError("m must be >= 1")
    conf, correct = _conf_correct(records)
    counts, conf_sums, acc_sums = _bin_stats(conf, correct, m)
    bins = []
    for i in range(m):
        count = int(counts[i])
        bins.append(
            ReliabilityBin(
                lo=i / m,
                hi=(i + 1) / m,
                count=count,
                mean_conf=float(conf_sums[i] / count) if count else 0.0,
                accuracy=float(acc_sums[i] / count) if count else 0.0,
            )
        )
    return bins


def ece(records: Sequence[PredictionRecord], m: int = 10) -> float:
    """Bin-weighted mean absolute gap between confidence and accuracy."""
    if not records:
        raise EmptyInput("no records")
    if m < 1:
        raise ValueError("m must be >= 1")
    conf, correct = _conf_correct(records)
    return ece_arrays(conf, correct, m)


def brier(records: Sequence[PredictionRecord]) -> float:
    """Mean squared distance between probability vectors and one-hot labels."""
    probs, true = _probs_true(records)
    return brier_arrays(probs, true)


def accuracy(records: Sequence[PredictionRecord]) -> float:
    if not records:
        raise EmptyInput("no records")
    return float(np.mean([r.correct for r in records]))


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Probability a random positive outranks a random negative (ties half)."""
    return auroc_arrays(np.asarray(scores, dtype=np.float64), np.asarray(labels))


def aupr(scores: Sequence[float], labels: Sequence[bool]) -> float:
    return aupr_arrays(np.asarray(scores, dtype=np.float64), np.asarray(labels))


# --- subject-level bootstrap ------------------------------------------------------

MAX_ATTEMPT_FACTOR = 10


def _subject_groups(records: Sequence[PredictionRecord]):
    groups: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        groups.setdefault(r.subject_id, []).append(i)
    subjects = sorted(groups)
    return subjects, [np.array(groups[s], dtype=np.int64) for s in subjects]


def _resolve_metric(
    records: Sequence[PredictionRecord],
    metric: str | Callable[[Sequence[PredictionRecord]], float],
    bins: int,
    class_id: int | None,
) -> Callable[[np.ndarray], float]:
    """Bind a metric to index-array evaluation over `records`."""
    if callable(metric):
        return lambda idx: float(metric([records[i] for i in idx]))
    if metric == "ece":
        conf, correct = _conf_correct(records)
        return lambda idx: ece_arrays(conf[idx], correct[idx], bins)
    if metric == "brier":
        probs, true = _probs_true(records)
        return lambda idx: brier_arrays(probs[idx], true[idx])
    if metric == "accuracy":
        _, correct = _conf_correct(records)
        return lambda idx: float(np.mean(correct[idx]))
    if metric in ("auroc", "aupr"):
        if class_id is None:
            raise ValueError(f"{metric} needs class_id")
        probs, true = _probs_true(records)
        scores = probs[:, class_id]
        labels = true == class_id
        fn = auroc_arrays if metric == "auroc" else aupr_arrays
        return lambda idx: fn(scores[idx], labels[idx])
    raise ValueError(f"unknown metric {metric!r}")


def bootstrap_ci(
    records: Sequence[PredictionRecord],
    metric: str | Callable[[Sequence[PredictionRecord]], float],
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
    bins: int = 10,
    class_id: int | None = None,
) -> tuple[float, float]:
    """Percentile interval from resampling subjects with replacement.

    All of a subject's records travel together. Resample k draws from the
    deterministic substream ``default_rng([seed, k])`` where k counts
    attempts, so results are bit-reproducible and order-independent.
    Resamples on which the metric is undefined (e.g. no positives for AUPR)
    are skipped and replaced, up to 10x n_resamples attempts.
    """
    if not records:
        raise EmptyInput("no records")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0,1)")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    subjects, groups = _subject_groups(records)
    eval_metric = _resolve_metric(records, metric, bins, class_id)
    n_subjects = len(subjects)

    values = np.empty(n_resamples, dtype=np.float64)
    got = 0
    max_attempts = MAX_ATTEMPT_FACTOR * n_resamples
    for attempt in range(max_attempts):
        if got == n_resamples:
            break
        rng = np.random.default_rng([seed, attempt])
        draw = rng.integers(0, n_subjects, size=n_subjects)
        idx = np.concatenate([groups[d] for d in draw])
        try:
            values[got] = eval_metric(idx)
        except (DegenerateLabels, EmptyInput, MissingProbs):
            continue
        got += 1
    if got < n_resamples:
        raise MetricUndefinedOnResample(
            f"only {got}/{n_resamples} defined resamples after {max_attempts} attempts"
        )
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(values, [alpha, 1.0 - alpha], method="linear")
    return float(lo), float(hi)


def per_class_ranking(
    records: Sequence[PredictionRecord], class_ids: Sequence[int] | None = None
) -> tuple[dict[int, float | None], dict[int, float | None]]:
    """One-vs-rest AUROC and AUPR per class; None where undefined."""
    probs, true = _probs_true(records)
    ids = list(class_ids) if class_ids is not None else list(range(probs.shape[1]))
    aurocs: dict[int, float | None] = {}
    auprs: dict[int, float | None] = {}
    for k in ids:
        scores = probs[:, k]
        labels = true == k
        try:
            aurocs[k] = auroc_arrays(scores, labels)
        except DegenerateLabels:
            aurocs[k] = None
        try:
            auprs[k] = aupr_arrays(scores, labels)
        except DegenerateLabels:
            auprs[k] = None
    return aurocs, auprs


def calibration_report(
    records: Sequence[PredictionRecord],
    bins: int = 10,
    ci_metrics: Sequence[str] | None = None,
    n_resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> CalibrationReport:
    """Full calibration summary, optionally with bootstrap CIs.

    ci_metrics entries are "ece", "brier", "accuracy", or "aupr:<class_id>" /
    "auroc:<class_id>" for one-vs-rest ranking CIs.
    """
    if not records:
        raise EmptyInput("no records")
    bin_list = reliability_bins(records, bins)
    aurocs, auprs = per_class_ranking(records)
    ci = None
    if ci_metrics:
        ci = {}
        for name in ci_metrics:
            metric, _, class_part = name.partition(":")
            class_id = int(class_part) if class_part else None
            lo, hi = bootstrap_ci(
                records,
                metric,
                n_resamples=n_resamples,
                level=level,
                seed=seed,
                bins=bins,
                class_id=class_id,
            )
            ci[name] = (lo, hi, level)
    return CalibrationReport(
        ece=ece(records, bins),
        brier=brier(records),
        bins=tuple(bin_list),
        per_class_auroc=aurocs,
        per_class_aupr=auprs,
        n=len(records),
        ci=ci,
    )


def class_name(class_id: int) -> str:
    return CLASSES[class_id].name
