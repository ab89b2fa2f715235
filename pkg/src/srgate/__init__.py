"""Resource-aware super-resolution gating and safety-calibration toolkit.

Selects an enhancement level per input from classifier confidence and
behavior criticality, audits the decision with an expected-utility model,
guards against enhancement-induced hallucinations, and evaluates the whole
policy with calibration metrics under a subject-level statistical protocol.
"""

from .calibration import (
    CalibrationReport,
    ReliabilityBin,
    aupr,
    auroc,
    bootstrap_ci,
    brier,
    calibration_report,
    ece,
    reliability_bins,
)
from .config import (
    BehaviorConfidenceModel,
    ExperimentConfig,
    MixtureSpec,
    ScenarioConfig,
    SrEffectConfig,
    TruncatedNormalSpec,
)
from .costs import (
    CostProfile,
    CostSummary,
    LevelCost,
    MethodPoint,
    accumulate_cost,
    pareto_frontier,
    relative_efficiency,
)
from .errors import SrgateError
from .gating import (
    AdaptiveTauConfig,
    Thresholds,
    adaptive_tau,
    delta_acc_estimate,
    expected_utility,
    gate,
    gate_adaptive,
    optimize_thresholds,
    sensitivity_sweep,
)
from .guard import GuardOutcome, apply_guard, artifact_score_heuristic, label_artifact
from .quality import (
    Clip,
    GrayImage,
    laplacian_variance,
    load_pgm,
    mean_intensity,
    ssim,
    temporal_inconsistency,
)
from .records import (
    BehaviorClass,
    GateDecision,
    GateReason,
    PredictionRecord,
    SRLevel,
    UtilityParams,
    ingest_log,
    validate_record,
    write_log,
)
from .simulate import (
    ExperimentReport,
    loso_splits,
    read_report,
    run_experiment,
    sample_stream,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveTauConfig",
    "BehaviorClass",
    "BehaviorConfidenceModel",
    "CalibrationReport",
    "Clip",
    "CostProfile",
    "CostSummary",
    "ExperimentConfig",
    "ExperimentReport",
    "GateDecision",
    "GateReason",
    "GrayImage",
    "GuardOutcome",
    "LevelCost",
    "MethodPoint",
    "MixtureSpec",
    "PredictionRecord",
    "ReliabilityBin",
    "SRLevel",
    "ScenarioConfig",
    "SrEffectConfig",
    "SrgateError",
    "Thresholds",
    "TruncatedNormalSpec",
    "UtilityParams",
    "accumulate_cost",
    "adaptive_tau",
    "apply_guard",
    "artifact_score_heuristic",
    "aupr",
    "auroc",
    "bootstrap_ci",
    "brier",
    "calibration_report",
    "delta_acc_estimate",
    "ece",
    "expected_utility",
    "gate",
    "gate_adaptive",
    "ingest_log",
    "label_artifact",
    "laplacian_variance",
    "load_pgm",
    "loso_splits",
    "mean_intensity",
    "optimize_thresholds",
    "pareto_frontier",
    "read_report",
    "relative_efficiency",
    "reliability_bins",
    "run_experiment",
    "sample_stream",
    "sensitivity_sweep",
    "ssim",
    "temporal_inconsistency",
    "validate_record",
    "write_log",
    "write_report",
]
