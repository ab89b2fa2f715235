"""Core domain types and prediction-log ingestion.

A prediction log is a UTF-8 text file with one JSON object per line, keys
matching :class:`PredictionRecord` field names (snake_case). Records are
immutable value objects; validation is explicit (`validate_record`) rather
than baked into construction, so downstream stages can build derived rows
(e.g. confidence-discounted outcomes) without fighting the constructor.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import EmptyLog, MalformedRecord, MissingTableEntry, ProbSumViolation

log = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-9
CONF_TOP1_TOL = 1e-9


class SRLevel(enum.IntEnum):
    """Super-resolution enhancement level, ordered by increasing cost."""

    NONE = 0
    X2 = 1
    X4 = 2

    @property
    def label(self) -> str:
        return {SRLevel.NONE: "none", SRLevel.X2: "2x", SRLevel.X4: "4x"}[self]


class GateReason(str, enum.Enum):
    """Which branch of the gating policy produced a decision."""

    HIGH_CONF_SKIP = "high_conf_skip"
    MID_CONF_2X = "mid_conf_2x"
    LOW_CONF_4X = "low_conf_4x"
    CRITICAL_4X = "critical_4x"
    UNCOVERED_DEFAULT = "uncovered_default"


@dataclass(frozen=True)
class BehaviorClass:
    id: int
    name: str
    critical: bool


CLASS_NAMES = (
    "normal_driving",
    "texting",
    "phone_call",
    "reaching_behind",
    "adjusting_radio",
    "drinking",
    "drowsiness",
)

DEFAULT_CRITICAL = frozenset({"drowsiness", "phone_call", "texting"})

NUM_CLASSES = len(CLASS_NAMES)


def make_classes(critical: Iterable[str] = DEFAULT_CRITICAL) -> tuple[BehaviorClass, ...]:
    """Build the 7-class taxonomy with a configurable critical set.

    The critical set may be changed but never emptied: safety weighting
    without critical classes is a configuration error.
    """
    crit = frozenset(critical)
    if not crit:
        raise ValueError("critical class set must not be empty")
    unknown = crit - set(CLASS_NAMES)
    if unknown:
        raise ValueError(f"unknown class names in critical set: {sorted(unknown)}")
    return tuple(
        BehaviorClass(i, name, name in crit) for i, name in enumerate(CLASS_NAMES)
    )


CLASSES = make_classes()
CRITICAL_IDS = frozenset(c.id for c in CLASSES if c.critical)


def class_by_name(name: str, classes: Sequence[BehaviorClass] = CLASSES) -> BehaviorClass:
    for c in classes:
        if c.name == name:
            return c
    raise KeyError(name)


@dataclass(frozen=True)
class PredictionRecord:
    """One observation from the upstream classifier.

    `confidence` is the top-1 probability and `criticality` is the critical
    flag of the *predicted* class (the true class is unknown at inference
    time). Optional fields stay ``None`` when the upstream stage did not
    produce them; operations that need them raise rather than default.
    """

    subject_id: str
    clip_id: str
    true_class: int
    probs: tuple[float, ...]
    confidence: float
    criticality: int
    blur: float
    lighting: float
    artifact_score: float | None = None
    perceptual_loss: float | None = None
    ssim_vs_hr: float | None = None

    @property
    def predicted_class(self) -> int:
        return max(range(len(self.probs)), key=self.probs.__getitem__)

    @property
    def correct(self) -> bool:
        return self.predicted_class == self.true_class


@dataclass(frozen=True)
class Violation:
    """A named invariant breach found by validate_record."""

    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


def validate_record(
    r: PredictionRecord, classes: Sequence[BehaviorClass] = CLASSES
) -> list[Violation]:
    """Check every type invariant; an empty list means the record is valid.

    Violations are data, not faults: callers decide whether to raise.
    """
    out: list[Violation] = []
    k = len(classes)
    if not r.subject_id:
        out.append(Violation("subject_id", "must be non-empty"))
    if not isinstance(r.true_class, int) or not 0 <= r.true_class < k:
        out.append(Violation("true_class", f"not a class id in 0..{k - 1}"))
    if len(r.probs) != k:
        out.append(Violation("probs", f"expected {k} entries, got {len(r.probs)}"))
    if any((not math.isfinite(p)) or p < 0.0 or p > 1.0 for p in r.probs):
        out.append(Violation("probs", "entries must lie in [0,1]"))
    elif abs(sum(r.probs) - 1.0) > PROB_SUM_TOL:
        out.append(Violation("probs", f"sum {sum(r.probs):.12f} != 1 within {PROB_SUM_TOL}"))
    if not math.isfinite(r.confidence) or not 0.0 <= r.confidence <= 1.0:
        out.append(Violation("confidence", "must lie in [0,1]"))
    elif r.probs and abs(r.confidence - max(r.probs)) > CONF_TOP1_TOL:
        out.append(Violation("confidence", "confidence != top-1 probability"))
    if r.criticality not in (0, 1):
        out.append(Violation("criticality", "criticality not in {0,1}"))
    if not math.isfinite(r.blur) or r.blur < 0.0:
        out.append(Violation("blur", "must be >= 0"))
    if not math.isfinite(r.lighting) or not 0.0 <= r.lighting <= 1.0:
        out.append(Violation("lighting", "must lie in [0,1]"))
    if r.artifact_score is not None and not 0.0 <= r.artifact_score <= 1.0:
        out.append(Violation("artifact_score", "must lie in [0,1]"))
    if r.perceptual_loss is not None and r.perceptual_loss < 0.0:
        out.append(Violation("perceptual_loss", "must be >= 0"))
    if r.ssim_vs_hr is not None and not -1.0 <= r.ssim_vs_hr <= 1.0:
        out.append(Violation("ssim_vs_hr", "must lie in [-1,1]"))
    return out


_REQUIRED_KEYS = (
    "subject_id",
    "clip_id",
    "true_class",
    "probs",
    "confidence",
    "criticality",
    "blur",
    "lighting",
)
_OPTIONAL_KEYS = ("artifact_score", "perceptual_loss", "ssim_vs_hr")


def _record_from_obj(obj: Mapping, line_no: int, strict: bool) -> PredictionRecord:
    missing = [k for k in _REQUIRED_KEYS if k not in obj]
    if missing:
        raise MalformedRecord(line_no, f"missing keys: {missing}")
    unknown = set(obj) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS)
    if unknown:
        if strict:
            raise MalformedRecord(line_no, f"unknown keys: {sorted(unknown)}")
        log.warning("line %d: ignoring unknown keys %s", line_no, sorted(unknown))
    try:
        rec = PredictionRecord(
            subject_id=str(obj["subject_id"]),
            clip_id=str(obj["clip_id"]),
            true_class=int(obj["true_class"]),
            probs=tuple(float(p) for p in obj["probs"]),
            confidence=float(obj["confidence"]),
            criticality=int(obj["criticality"]),
            blur=float(obj["blur"]),
            lighting=float(obj["lighting"]),
            artifact_score=None if obj.get("artifact_score") is None else float(obj["artifact_score"]),
            perceptual_loss=None if obj.get("perceptual_loss") is None else float(obj["perceptual_loss"]),
            ssim_vs_hr=None if obj.get("ssim_vs_hr") is None else float(obj["ssim_vs_hr"]),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, f"bad field value: {exc}") from exc
    violations = validate_record(rec)
    if violations:
        first = violations[0]
        if first.field == "probs" and "sum" in first.rule:
            raise ProbSumViolation(line_no, str(first))
        raise MalformedRecord(line_no, "; ".join(str(v) for v in violations))
    return rec


def ingest_log(path: str, strict: bool = False) -> list[PredictionRecord]:
    """Read a line-delimited prediction log, validating every record.

    Returns records in file order. Raises MalformedRecord/ProbSumViolation
    with the 1-based line number on the first bad line, EmptyLog if no
    records remain.
    """
    records: list[PredictionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(line_no, "record is not an object")
            records.append(_record_from_obj(obj, line_no, strict))
    if not records:
        raise EmptyLog(path)
    return records


def record_to_obj(r: PredictionRecord) -> dict:
    obj = {
        "subject_id": r.subject_id,
        "clip_id": r.clip_id,
        "true_class": r.true_class,
        "probs": list(r.probs),
        "confidence": r.confidence,
        "criticality": r.criticality,
        "blur": r.blur,
        "lighting": r.lighting,
    }
    for key in _OPTIONAL_KEYS:
        val = getattr(r, key)
        if val is not None:
            obj[key] = val
    return obj


def write_log(records: Iterable[PredictionRecord], path: str) -> None:
    """Serialize records one JSON object per line (ingest round-trips)."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_obj(r)) + "\n")


def subjects_of(records: Sequence[PredictionRecord]) -> list[str]:
    """Distinct subject ids in sorted order."""
    return sorted({r.subject_id for r in records})


@dataclass(frozen=True)
class GateDecision:
    """Chosen SR level plus the evidence that produced it.

    `utility_by_level` is audit data (one entry per SRLevel, NONE first);
    the plain threshold gate fills zeros, the utility-aware path fills the
    per-level expected utilities actually computed.
    """

    level: SRLevel
    tau_used: float
    utility_by_level: tuple[float, float, float]
    reason: GateReason


# Per-class top-1 accuracy gain of 4x enhancement, in class-id order.
# The 2x column is scaled from the 4x column by the overall 2x/4x
# enhancement gain ratio ((35.61-21.84)/(35.87-21.84)); per-class 2x
# measurements are not available.
DELTA_ACC_4X = (0.064, 0.197, 0.172, 0.141, 0.171, 0.155, 0.263)
_X2_SCALE = (35.61 - 21.84) / (35.87 - 21.84)


def default_delta_acc_table() -> dict[tuple[int, SRLevel], float]:
    table: dict[tuple[int, SRLevel], float] = {}
    for cid in range(NUM_CLASSES):
        table[(cid, SRLevel.NONE)] = 0.0
        table[(cid, SRLevel.X2)] = DELTA_ACC_4X[cid] * _X2_SCALE
        table[(cid, SRLevel.X4)] = DELTA_ACC_4X[cid]
    return table


@dataclass(frozen=True)
class UtilityParams:
    """Weights of the expected-utility tradeoff.

    lam trades accuracy gain against compute; w_crit multiplies gains on
    records flagged safety-critical; delta_acc_table maps (class id, level)
    to the expected accuracy improvement of enhancing at that level.
    """

    lam: float = 0.3
    w_crit: float = 2.5
    w_normal: float = 1.0
    delta_acc_table: Mapping[tuple[int, SRLevel], float] = field(
        default_factory=default_delta_acc_table
    )

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.w_crit < 1.0:
            raise ValueError("w_crit must be >= 1")
        for cid in range(NUM_CLASSES):
            for level in SRLevel:
                if (cid, level) not in self.delta_acc_table:
                    raise MissingTableEntry(f"no entry for (class {cid}, {level.label})")
            if self.delta_acc_table[(cid, SRLevel.NONE)] != 0.0:
                raise ValueError("no-enhancement gain must be 0 for every class")

    def gain(self, class_id: int, level: SRLevel) -> float:
        try:
            return self.delta_acc_table[(class_id, level)]
        except KeyError as exc:
            raise MissingTableEntry(f"no entry for (class {class_id}, {level.label})") from exc

    def weight(self, criticality: int) -> float:
        return self.w_crit if criticality == 1 else self.w_normal

    def with_overrides(self, **kw) -> "UtilityParams":
        return replace(self, **kw)
