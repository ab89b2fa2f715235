"""End-to-end exercise rig: confidence simulator, LOSO splits, policy
experiment runner, and report persistence.

The simulator stands in for trained networks. Confidence draws follow the
per-class models, correctness follows the calibrated link, and enhancement
effects (accuracy uplift, hallucination) are synthetic and clearly labeled
as such in the scenario config. All randomness derives from explicit seeds:
the stream from `seed`, and each record's SR-effect draws from the
substream ``default_rng([seed, record_index])``, so results do not depend
on evaluation order or thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import calibration
from .calibration import CalibrationReport, calibration_report
from .config import (
    CONF_FLOOR,
    POLICIES,
    BehaviorConfidenceModel,
    ExperimentConfig,
    MixtureSpec,
    TruncatedNormalSpec,
    experiment_from_dict,
    experiment_to_dict,
)
from .costs import CostSummary, accumulate_cost
from .errors import (
    EmptyInput,
    IoFailure,
    MalformedRecord,
    SchemaMismatch,
    TooFewSubjects,
)
from .gating import gate, gate_adaptive
from .guard import apply_guard
from .records import (
    CLASSES,
    NUM_CLASSES,
    PredictionRecord,
    SRLevel,
    subjects_of,
    validate_record,
)

SCHEMA_VERSION = 1

CRITICAL_FP_DEFINITION = (
    "non-critical ground truth predicted as a critical class "
    "with final confidence > cut"
)

# Pinned reference scenario: ~10^4 records over 24 subjects.
PINNED_N_PER_CLASS = 1429
PINNED_SUBJECTS = 24
PINNED_SEED = 42


# --- sampling -------------------------------------------------------------------

def _draw_truncated(rng: np.random.Generator, mu: float, sigma: float) -> float:
    # rejection into the valid confidence support [1/K, 1]
    while True:
        x = rng.normal(mu, sigma)
        if CONF_FLOOR <= x <= 1.0:
            return x


def _draw_confidence(rng: np.random.Generator, dist) -> float:
    if isinstance(dist, TruncatedNormalSpec):
        return _draw_truncated(rng, dist.mu, dist.sigma)
    assert isinstance(dist, MixtureSpec)
    comp = dist.first if rng.random() < dist.weight_first else dist.second
    return _draw_truncated(rng, comp.mu, comp.sigma)


def _build_probs(pred: int, confidence: float) -> tuple[float, ...]:
    rest = (1.0 - confidence) / (NUM_CLASSES - 1)
    return tuple(confidence if k == pred else rest for k in range(NUM_CLASSES))


def sample_stream(
    model: BehaviorConfidenceModel,
    n_per_class: int,
    n_subjects: int,
    seed: int,
) -> list[PredictionRecord]:
    """Deterministic synthetic prediction stream.

    Classes are balanced (n_per_class each) and spread round-robin over
    subjects. Confidence comes from the class model, correctness from the
    calibrated link, and wrong predictions land uniformly on the other
    classes. The criticality flag follows the *predicted* class, matching
    what an inference-time estimator could know.
    """
    if n_per_class < 1 or n_subjects < 1:
        raise ValueError("n_per_class and n_subjects must be >= 1")
    rng = np.random.default_rng(seed)
    records: list[PredictionRecord] = []
    for class_id in range(NUM_CLASSES):
        dist = model.distributions[class_id]
        for i in range(n_per_class):
            subject = f"S{(i % n_subjects) + 1:02d}"
            p = float(_draw_confidence(rng, dist))
            correct = rng.random() < model.p_correct(p)
            if correct:
                pred = class_id
            else:
                pred = int((class_id + 1 + rng.integers(0, NUM_CLASSES - 1)) % NUM_CLASSES)
            records.append(
                PredictionRecord(
                    subject_id=subject,
                    clip_id=f"{subject}_k{class_id}_{i:05d}",
                    true_class=class_id,
                    probs=_build_probs(pred, p),
                    confidence=p,
                    criticality=int(CLASSES[pred].critical),
                    blur=float(rng.uniform()),
                    lighting=float(rng.uniform()),
                )
            )
    return records


# --- LOSO splitting ----------------------------------------------------------------

@dataclass(frozen=True)
class LosoFold:
    test_subject: str
    train_subjects: tuple[str, ...]


def loso_splits(records: Sequence[PredictionRecord]) -> list[LosoFold]:
    """One fold per subject, ordered by subject id."""
    subjects = subjects_of(records)
    if len(subjects) < 2:
        raise TooFewSubjects(f"need >= 2 subjects, got {len(subjects)}")
    return [
        LosoFold(s, tuple(t for t in subjects if t != s)) for s in subjects
    ]


# --- policy evaluation ----------------------------------------------------------------

@dataclass(frozen=True)
class EvalOutcome:
    """Final state of one record after gating, SR effect, and guard."""

    final: PredictionRecord
    level: SRLevel
    used_sr: bool
    triggered: bool
    p_artifact: float | None


def _rebuild(
    r: PredictionRecord, pred: int, confidence: float, p_artifact: float | None
) -> PredictionRecord:
    # After a guard discount the scalar confidence can fall below the 1/K
    # probability floor; keep the vector's argmax on the prediction anyway.
    mass = max(confidence, CONF_FLOOR + 1e-9)
    return PredictionRecord(
        subject_id=r.subject_id,
        clip_id=r.clip_id,
        true_class=r.true_class,
        probs=_build_probs(pred, mass),
        confidence=confidence,
        criticality=int(CLASSES[pred].critical),
        blur=r.blur,
        lighting=r.lighting,
        artifact_score=p_artifact,
    )


def _evaluate_record(
    r: PredictionRecord, index: int, policy: str, config: ExperimentConfig, seed: int
) -> EvalOutcome:
    if policy == "fixed_none":
        level = SRLevel.NONE
    elif policy == "fixed_4x":
        level = SRLevel.X4
    elif policy == "gate":
        level = gate(r.confidence, r.criticality, config.thresholds).level
    elif policy == "gate_adaptive":
        level = gate_adaptive(
            r, config.thresholds, config.adaptive, config.utility, config.costs
        ).level
    else:
        raise ValueError(f"unknown policy {policy!r}; choose one of {POLICIES}")

    if level == SRLevel.NONE:
        return EvalOutcome(final=r, level=level, used_sr=False, triggered=False, p_artifact=None)

    effect = config.scenario.sr_effect
    model = config.scenario.model

    if not effect.hallucination_enabled and not effect.uplift_enabled:
        # log-driven mode: score the record as it stands, guarding on any
        # artifact probability the upstream detector recorded
        p_artifact = r.artifact_score
        if not config.guard_enabled or p_artifact is None:
            return EvalOutcome(
                final=r, level=level, used_sr=True, triggered=False, p_artifact=p_artifact
            )
        outcome = apply_guard(
            p_artifact,
            level,
            r.confidence,
            threshold=config.guard_threshold,
            discount=config.guard_discount,
            relative_discount=config.guard_relative,
        )
        final = (
            _rebuild(r, r.predicted_class, outcome.final_confidence, p_artifact)
            if outcome.triggered
            else r
        )
        return EvalOutcome(
            final=final,
            level=level,
            used_sr=outcome.used_sr,
            triggered=outcome.triggered,
            p_artifact=p_artifact,
        )

    rng = np.random.default_rng([seed, index])

    hallucinated = rng.random() < effect.hallucination_rate(level)
    if hallucinated:
        target = int(
            effect.hallucination_targets[rng.integers(0, len(effect.hallucination_targets))]
        )
        sr_conf = min(1.0, r.confidence + float(rng.uniform(*effect.inflation_range)))
        sr_pred = target
        p_artifact = float(rng.uniform(*effect.hallucinated_score_range))
    else:
        p_artifact = float(rng.uniform(*effect.clean_score_range))
        sr_pred = r.predicted_class
        sr_conf = r.confidence
        if effect.uplift_enabled and not r.correct:
            q = model.p_correct(r.confidence)
            u = effect.uplift(level, r.true_class)
            flip_p = q * (u - 1.0) / (1.0 - q + u * q)
            if rng.random() < flip_p:
                sr_pred = r.true_class

    if not config.guard_enabled:
        return EvalOutcome(
            final=_rebuild(r, sr_pred, sr_conf, p_artifact),
            level=level,
            used_sr=True,
            triggered=False,
            p_artifact=p_artifact,
        )

    # On revert the pipeline classifies the LR input again, so the discount
    # applies to the original confidence, not the enhanced one.
    probe = apply_guard(
        p_artifact,
        level,
        r.confidence,
        threshold=config.guard_threshold,
        discount=config.guard_discount,
        relative_discount=config.guard_relative,
    )
    if probe.triggered:
        final = _rebuild(r, r.predicted_class, probe.final_confidence, p_artifact)
        return EvalOutcome(
            final=final, level=level, used_sr=False, triggered=True, p_artifact=p_artifact
        )
    return EvalOutcome(
        final=_rebuild(r, sr_pred, sr_conf, p_artifact),
        level=level,
        used_sr=True,
        triggered=False,
        p_artifact=p_artifact,
    )


def evaluate_records(
    records: Sequence[PredictionRecord],
    policy: str,
    config: ExperimentConfig,
    seed: int,
    threads: int = 1,
) -> list[EvalOutcome]:
    """Run the policy pipeline over every record.

    Output order matches input order and is independent of `threads`:
    each record's stochastic effects draw from a substream keyed by its
    position alone.
    """
    def chunk_eval(bounds):
        lo, hi = bounds
        return [
            _evaluate_record(records[i], i, policy, config, seed) for i in range(lo, hi)
        ]

    if threads <= 1 or len(records) < 2 * threads:
        return chunk_eval((0, len(records)))
    edges = np.linspace(0, len(records), threads + 1).astype(int)
    chunks = [(int(edges[k]), int(edges[k + 1])) for k in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(chunk_eval, chunks))
    return [o for part in parts for o in part]


def count_critical_fp(
    outcomes: Sequence[EvalOutcome], conf_cut: float = 0.5
) -> int:
    """Non-critical truths confidently predicted as a critical class."""
    n = 0
    for o in outcomes:
        truth_critical = CLASSES[o.final.true_class].critical
        pred_critical = CLASSES[o.final.predicted_class].critical
        if not truth_critical and pred_critical and o.final.confidence > conf_cut:
            n += 1
    return n


# --- experiment report ------------------------------------------------------------------

@dataclass(frozen=True)
class GuardStats:
    n_sr: int
    n_triggered: int
    trigger_rate: float
    critical_false_positives: int
    critical_fp_conf_cut: float
    critical_fp_definition: str = CRITICAL_FP_DEFINITION


@dataclass(frozen=True)
class FoldResult:
    test_subject: str
    n: int
    accuracy: float
    ece: float
    brier: float
    mean_gflops: float
    guard_triggers: int
    critical_false_positives: int


@dataclass(frozen=True)
class ExperimentReport:
    policy: str
    seed: int
    n: int
    calibration: CalibrationReport
    cost: CostSummary
    guard: GuardStats
    folds: tuple[FoldResult, ...]
    config: dict
    schema_version: int = SCHEMA_VERSION


def run_experiment(
    records: Sequence[PredictionRecord],
    policy: str,
    config: ExperimentConfig,
    seed: int,
    threads: int = 1,
) -> ExperimentReport:
    report, _ = run_experiment_with_outcomes(records, policy, config, seed, threads)
    return report


def run_experiment_with_outcomes(
    records: Sequence[PredictionRecord],
    policy: str,
    config: ExperimentConfig,
    seed: int,
    threads: int = 1,
) -> tuple[ExperimentReport, list[EvalOutcome]]:
    """Gate, apply synthetic SR effects and the guard, and score per LOSO fold.

    Nothing is fitted on training folds (the policies are closed-form), so
    each record is evaluated once and grouped by its test subject. The
    pooled calibration report carries subject-level bootstrap CIs for ECE
    and for AUPR of each critical class. Also returns the per-record
    outcomes for audit emission.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose one of {POLICIES}")
    if not records:
        raise EmptyInput("no records")
    for i, r in enumerate(records):
        violations = validate_record(r)
        if violations:
            raise MalformedRecord(i + 1, "; ".join(str(v) for v in violations))

    folds = loso_splits(records)
    outcomes = evaluate_records(records, policy, config, seed, threads)

    final_records = [o.final for o in outcomes]
    levels = [o.level for o in outcomes]
    cost = accumulate_cost(levels, config.costs)

    n_sr = sum(1 for o in outcomes if o.level != SRLevel.NONE)
    n_triggered = sum(1 for o in outcomes if o.triggered)
    guard = GuardStats(
        n_sr=n_sr,
        n_triggered=n_triggered,
        trigger_rate=(n_triggered / n_sr) if n_sr else 0.0,
        critical_false_positives=count_critical_fp(outcomes, config.critical_fp_conf_cut),
        critical_fp_conf_cut=config.critical_fp_conf_cut,
    )

    critical_ids = sorted(c.id for c in CLASSES if c.critical)
    ci_metrics = ["ece"] + [f"aupr:{k}" for k in critical_ids]
    pooled = calibration_report(
        final_records,
        bins=config.bins,
        ci_metrics=ci_metrics if config.resamples > 0 else None,
        n_resamples=max(config.resamples, 1),
        level=config.ci_level,
        seed=seed,
    )

    by_subject: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        by_subject.setdefault(r.subject_id, []).append(i)
    fold_results = []
    for fold in folds:
        idx = by_subject[fold.test_subject]
        fold_outcomes = [outcomes[i] for i in idx]
        fold_finals = [o.final for o in fold_outcomes]
        fold_cost = accumulate_cost([o.level for o in fold_outcomes], config.costs)
        fold_results.append(
            FoldResult(
                test_subject=fold.test_subject,
                n=len(idx),
                accuracy=calibration.accuracy(fold_finals),
                ece=calibration.ece(fold_finals, config.bins),
                brier=calibration.brier(fold_finals),
                mean_gflops=fold_cost.mean_gflops,
                guard_triggers=sum(1 for o in fold_outcomes if o.triggered),
                critical_false_positives=count_critical_fp(
                    fold_outcomes, config.critical_fp_conf_cut
                ),
            )
        )

    report = ExperimentReport(
        policy=policy,
        seed=seed,
        n=len(records),
        calibration=pooled,
        cost=cost,
        guard=guard,
        folds=tuple(fold_results),
        config={"policy": policy, "seed": seed, **experiment_to_dict(config)},
    )
    return report, outcomes


# --- persistence ------------------------------------------------------------------------

def _calibration_to_dict(c: CalibrationReport) -> dict:
    return {
        "ece": c.ece,
        "brier": c.brier,
        "n": c.n,
        "bins": [
            {
                "lo": b.lo,
                "hi": b.hi,
                "count": b.count,
                "mean_conf": b.mean_conf,
                "accuracy": b.accuracy,
            }
            for b in c.bins
        ],
        "per_class_auroc": {str(k): v for k, v in c.per_class_auroc.items()},
        "per_class_aupr": {str(k): v for k, v in c.per_class_aupr.items()},
        "ci": None
        if c.ci is None
        else {name: list(bounds) for name, bounds in c.ci.items()},
    }


def _calibration_from_dict(d: dict) -> CalibrationReport:
    return CalibrationReport(
        ece=d["ece"],
        brier=d["brier"],
        bins=tuple(
            calibration.ReliabilityBin(
                lo=b["lo"],
                hi=b["hi"],
                count=b["count"],
                mean_conf=b["mean_conf"],
                accuracy=b["accuracy"],
            )
            for b in d["bins"]
        ),
        per_class_auroc={int(k): v for k, v in d["per_class_auroc"].items()},
        per_class_aupr={int(k): v for k, v in d["per_class_aupr"].items()},
        n=d["n"],
        ci=None if d["ci"] is None else {k: tuple(v) for k, v in d["ci"].items()},
    )


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "schema_version": report.schema_version,
        "policy": report.policy,
        "seed": report.seed,
        "n": report.n,
        "calibration": _calibration_to_dict(report.calibration),
        "cost": {
            "n": report.cost.n,
            "histogram": list(report.cost.histogram),
            "total_gflops": report.cost.total_gflops,
            "total_latency_ms": report.cost.total_latency_ms,
            "total_power_w": report.cost.total_power_w,
        },
        "guard": {
            "n_sr": report.guard.n_sr,
            "n_triggered": report.guard.n_triggered,
            "trigger_rate": report.guard.trigger_rate,
            "critical_false_positives": report.guard.critical_false_positives,
            "critical_fp_conf_cut": report.guard.critical_fp_conf_cut,
            "critical_fp_definition": report.guard.critical_fp_definition,
        },
        "folds": [
            {
                "test_subject": f.test_subject,
                "n": f.n,
                "accuracy": f.accuracy,
                "ece": f.ece,
                "brier": f.brier,
                "mean_gflops": f.mean_gflops,
                "guard_triggers": f.guard_triggers,
                "critical_false_positives": f.critical_false_positives,
            }
            for f in report.folds
        ],
        "config": report.config,
    }


def report_from_dict(d: dict) -> ExperimentReport:
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"schema version {version!r}, expected {SCHEMA_VERSION}")
    return ExperimentReport(
        policy=d["policy"],
        seed=d["seed"],
        n=d["n"],
        calibration=_calibration_from_dict(d["calibration"]),
        cost=CostSummary(
            n=d["cost"]["n"],
            histogram=tuple(d["cost"]["histogram"]),
            total_gflops=d["cost"]["total_gflops"],
            total_latency_ms=d["cost"]["total_latency_ms"],
            total_power_w=d["cost"]["total_power_w"],
        ),
        guard=GuardStats(
            n_sr=d["guard"]["n_sr"],
            n_triggered=d["guard"]["n_triggered"],
            trigger_rate=d["guard"]["trigger_rate"],
            critical_false_positives=d["guard"]["critical_false_positives"],
            critical_fp_conf_cut=d["guard"]["critical_fp_conf_cut"],
            critical_fp_definition=d["guard"]["critical_fp_definition"],
        ),
        folds=tuple(
            FoldResult(
                test_subject=f["test_subject"],
                n=f["n"],
                accuracy=f["accuracy"],
                ece=f["ece"],
                brier=f["brier"],
                mean_gflops=f["mean_gflops"],
                guard_triggers=f["guard_triggers"],
                critical_false_positives=f["critical_false_positives"],
            )
            for f in d["folds"]
        ),
        config=d["config"],
        schema_version=version,
    )


def render_report(report: ExperimentReport) -> str:
    """Deterministic JSON body (no timestamps, stable key order)."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=1) + "\n"


def write_report(report: ExperimentReport, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_report(report))
    except OSError as exc:
        raise IoFailure(f"cannot write report to {path}: {exc}") from exc


def read_report(path: str) -> ExperimentReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read report from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path} is not a JSON report: {exc}") from exc
    return report_from_dict(data)


def experiment_config_from_file(path: str) -> tuple[ExperimentConfig, dict]:
    """Load an effective-config echo (or hand-written config) file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return experiment_from_dict(data), data
