"""Utility-based SR-level selection and threshold analysis.

The policy maps (confidence p, criticality c) to an enhancement level:
skip when confident and non-critical, 2x in the mid band, 4x when unsure
or when a critical behavior is predicted below the critical cut. The 4x
conditions take precedence (safety first), and the corner the piecewise
policy leaves open (critical but very confident) resolves to no
enhancement tagged `uncovered_default` so audits can find those records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .costs import CostProfile
from .errors import EmptyInput
from .records import (
    GateDecision,
    GateReason,
    PredictionRecord,
    SRLevel,
    UtilityParams,
)

_REASONS = (
    GateReason.HIGH_CONF_SKIP,
    GateReason.MID_CONF_2X,
    GateReason.LOW_CONF_4X,
    GateReason.CRITICAL_4X,
    GateReason.UNCOVERED_DEFAULT,
)
_LEVELS = (SRLevel.NONE, SRLevel.X2, SRLevel.X4)


@dataclass(frozen=True)
class Thresholds:
    tau_low: float = 0.60
    tau_high: float = 0.85
    critical_cut: float = 0.70

    def __post_init__(self):
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ValueError(
                f"need 0 <= tau_low < tau_high <= 1, got ({self.tau_low}, {self.tau_high})"
            )
        if not 0.0 <= self.critical_cut <= 1.0:
            raise ValueError("critical_cut must lie in [0,1]")


@dataclass(frozen=True)
class AdaptiveTauConfig:
    """Quality-conditioned adjustment of the high-confidence threshold.

    Signed defaults raise the threshold on degraded imagery (blurry or
    dark frames trigger more enhancement). blur_ref bounds the blur term:
    raw Laplacian variance is divided by blur_ref and clamped at 1.
    """

    tau_base: float = 0.85
    alpha_blur: float = 0.05
    alpha_light: float = -0.05
    clamp: tuple[float, float] = (0.0, 1.0)
    blur_ref: float = 0.05

    def __post_init__(self):
        lo, hi = self.clamp
        if lo > hi:
            raise ValueError("clamp bounds out of order")
        if self.blur_ref <= 0:
            raise ValueError("blur_ref must be positive")


def expected_utility(delta_acc: float, w: float, cost: float, lam: float) -> float:
    """Expected utility of an enhancement: weighted accuracy gain minus
    lam-scaled compute cost."""
    return delta_acc * w - lam * cost


def delta_acc_estimate(
    params: UtilityParams, class_id: int, level: SRLevel, p: float
) -> float:
    """Expected accuracy improvement: the per-class gain shrinks as
    confidence rises (nothing left to fix at p=1)."""
    if level == SRLevel.NONE:
        return 0.0
    return params.gain(class_id, level) * (1.0 - p)


def normalize_blur(blur: float, blur_ref: float) -> float:
    """Map raw Laplacian variance onto [0,1] relative to blur_ref."""
    return min(blur / blur_ref, 1.0)


def adaptive_tau(cfg: AdaptiveTauConfig, blur_norm: float, light: float) -> float:
    value = cfg.tau_base + cfg.alpha_blur * blur_norm + cfg.alpha_light * light
    lo, hi = cfg.clamp
    return min(hi, max(lo, value))


def _gate_scalar(
    p: float, c: int, tau_low: float, tau_high: float, critical_cut: float
) -> tuple[SRLevel, GateReason]:
    if p <= tau_low:
        return SRLevel.X4, GateReason.LOW_CONF_4X
    if c == 1 and p < critical_cut:
        return SRLevel.X4, GateReason.CRITICAL_4X
    if p > tau_high:
        if c == 0:
            return SRLevel.NONE, GateReason.HIGH_CONF_SKIP
        return SRLevel.NONE, GateReason.UNCOVERED_DEFAULT
    return SRLevel.X2, GateReason.MID_CONF_2X


def gate(p: float, c: int, t: Thresholds) -> GateDecision:
    """Apply the threshold policy to one record.

    Utility audit entries are zero here; use gate_adaptive (or
    utilities_by_level) when the expected-utility evidence is wanted.
    """
    level, reason = _gate_scalar(p, c, t.tau_low, t.tau_high, t.critical_cut)
    return GateDecision(level=level, tau_used=t.tau_high, utility_by_level=(0.0, 0.0, 0.0), reason=reason)


def utilities_by_level(
    class_id: int, p: float, c: int, params: UtilityParams, costs: CostProfile
) -> tuple[float, float, float]:
    """Per-level expected utility for the audit trail (NONE is always 0)."""
    w = params.weight(c)
    return tuple(
        expected_utility(
            delta_acc_estimate(params, class_id, level, p),
            w,
            costs.utility_cost(level),
            params.lam,
        )
        for level in _LEVELS
    )


def gate_adaptive(
    r: PredictionRecord,
    t: Thresholds,
    cfg: AdaptiveTauConfig,
    params: UtilityParams,
    costs: CostProfile,
) -> GateDecision:
    """Threshold gate with the quality-adaptive high threshold and a filled
    utility audit trail."""
    tau_eff = adaptive_tau(cfg, normalize_blur(r.blur, cfg.blur_ref), r.lighting)
    level, reason = _gate_scalar(
        r.confidence, r.criticality, t.tau_low, tau_eff, t.critical_cut
    )
    utils = utilities_by_level(r.predicted_class, r.confidence, r.criticality, params, costs)
    return GateDecision(level=level, tau_used=tau_eff, utility_by_level=utils, reason=reason)


def gate_records(
    records: Sequence[PredictionRecord],
    t: Thresholds,
    cfg: AdaptiveTauConfig | None = None,
    params: UtilityParams | None = None,
    costs: CostProfile | None = None,
) -> list[GateDecision]:
    """Batch gate; with cfg/params/costs given this is the adaptive path."""
    if cfg is None:
        return [gate(r.confidence, r.criticality, t) for r in records]
    if params is None or costs is None:
        raise ValueError("adaptive gating needs utility params and a cost profile")
    return [gate_adaptive(r, t, cfg, params, costs) for r in records]


# --- realized-utility objective over threshold grids --------------------------

def _record_arrays(records: Sequence[PredictionRecord]):
    p = np.array([r.confidence for r in records], dtype=np.float64)
    c = np.array([r.criticality for r in records], dtype=np.uint8)
    pred = np.array([r.predicted_class for r in records], dtype=np.int64)
    correct = np.array([r.correct for r in records], dtype=bool)
    return p, c, pred, correct


def utility_matrix(
    records: Sequence[PredictionRecord],
    params: UtilityParams,
    costs: CostProfile,
    objective: str = "outcome",
) -> np.ndarray:
    """(n, 3) matrix of realized per-record utility at each level.

    objective='outcome' scores the accuracy-gain term by the record's
    realized error (labels are known here); 'heuristic' falls back to the
    1-p expectation for label-free logs.
    """
    if objective not in ("outcome", "heuristic"):
        raise ValueError(f"unknown objective {objective!r}")
    p, c, pred, correct = _record_arrays(records)
    factor = (1.0 - correct.astype(np.float64)) if objective == "outcome" else 1.0 - p
    w = np.where(c == 1, params.w_crit, params.w_normal)
    gains = np.array(
        [[params.gain(int(k), level) for level in _LEVELS] for k in pred],
        dtype=np.float64,
    )
    cost_norm = np.array(costs.utility_costs(), dtype=np.float64)
    return gains * (factor * w)[:, None] - params.lam * cost_norm[None, :]


@dataclass(frozen=True)
class SurfacePoint:
    tau_low: float
    tau_high: float
    mean_utility: float


@dataclass(frozen=True)
class OptimizeResult:
    tau_low: float
    tau_high: float
    mean_utility: float
    surface: tuple[SurfacePoint, ...]


def threshold_grid(grid_step: float) -> list[float]:
    """Multiples of grid_step inside [0,1]."""
    count = int(math.floor(1.0 / grid_step + 1e-9))
    return [i * grid_step for i in range(count + 1)]


def optimize_thresholds(
    records: Sequence[PredictionRecord],
    params: UtilityParams,
    costs: CostProfile,
    grid_step: float = 0.05,
    critical_cut: float = 0.70,
    objective: str = "outcome",
) -> OptimizeResult:
    """Exhaustive grid search maximizing mean realized utility.

    The surface is piecewise-constant in the thresholds, so the grid search
    is exact at grid resolution. Ties break toward larger tau_high, then
    larger tau_low.
    """
    if not records:
        raise EmptyInput("no records")
    if not 0.0 < grid_step <= 0.25:
        raise ValueError("grid_step must lie in (0, 0.25]")
    grid = threshold_grid(grid_step)
    pairs = [(lo, hi) for lo in grid for hi in grid if lo < hi]
    lo_arr = np.array([pr[0] for pr in pairs])
    hi_arr = np.array([pr[1] for pr in pairs])
    p, c, _, _ = _record_arrays(records)
    util = utility_matrix(records, params, costs, objective)
    means, _ = kernels.utility_surface(p, c, util, lo_arr, hi_arr, critical_cut)
    surface = tuple(
        SurfacePoint(lo, hi, float(u)) for (lo, hi), u in zip(pairs, means)
    )
    best = max(surface, key=lambda s: (s.mean_utility, s.tau_high, s.tau_low))
    return OptimizeResult(best.tau_low, best.tau_high, best.mean_utility, surface)


@dataclass(frozen=True)
class SweepRow:
    scale_low: float
    scale_high: float
    mean_utility: float
    mean_cost_gflops: float
    n_none: int
    n_2x: int
    n_4x: int


def sensitivity_sweep(
    records: Sequence[PredictionRecord],
    t: Thresholds,
    params: UtilityParams,
    costs: CostProfile,
    rel_range: float = 0.25,
    steps: int = 5,
    objective: str = "outcome",
) -> list[SweepRow]:
    """Policy behavior under multiplicative threshold perturbation.

    Each threshold is scaled by factors spanning [1-rel_range, 1+rel_range]
    (clamped back into [0,1]); one row per (scale_low, scale_high) grid
    point. rel_range=0 degenerates to the single unperturbed row.
    """
    if not records:
        raise EmptyInput("no records")
    if not 0.0 <= rel_range < 1.0:
        raise ValueError("rel_range must lie in [0, 1)")
    if rel_range == 0.0:
        scales = np.array([1.0])
    else:
        if steps < 2:
            raise ValueError("steps must be >= 2")
        scales = np.linspace(1.0 - rel_range, 1.0 + rel_range, steps)
    combos = [(sl, sh) for sl in scales for sh in scales]
    lo_arr = np.clip(np.array([sl * t.tau_low for sl, _ in combos]), 0.0, 1.0)
    hi_arr = np.clip(np.array([sh * t.tau_high for _, sh in combos]), 0.0, 1.0)
    p, c, _, _ = _record_arrays(records)
    util = utility_matrix(records, params, costs, objective)
    means, hist = kernels.utility_surface(p, c, util, lo_arr, hi_arr, t.critical_cut)
    n = len(records)
    gflops = np.array([costs.total(level, "gflops") for level in _LEVELS])
    rows = []
    for j, (sl, sh) in enumerate(combos):
        mean_cost = float(hist[j].astype(np.float64) @ gflops) / n
        rows.append(
            SweepRow(
                scale_low=float(sl),
                scale_high=float(sh),
                mean_utility=float(means[j]),
                mean_cost_gflops=mean_cost,
                n_none=int(hist[j, 0]),
                n_2x=int(hist[j, 1]),
                n_4x=int(hist[j, 2]),
            )
        )
    return rows

