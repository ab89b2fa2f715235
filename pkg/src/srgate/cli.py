"""Operator CLI: reproducible runs of the gating/calibration toolkit.

Subcommands: quality, gate, calibrate, guard, sweep, pareto, simulate,
loso-eval. Flags mirror config-file keys one-to-one (dashes become
underscores); flags win over file values, file values win over defaults.
Every run writes its resolved configuration to ``effective_config.json``
in the output directory; feeding that file back via ``--config``
reproduces the run. All randomness flows from ``--seed``.

Exit codes: 0 success, 2 usage error, 3 data validation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import calibration as cal
from . import config as cfgmod
from . import costs as costmod
from . import errors as err
from . import gating, guard, quality, records, simulate

USAGE_EXIT = 2
DATA_EXIT = 3
IO_EXIT = 4

_VALIDATION_ERRORS = (
    err.MalformedRecord,
    err.EmptyLog,
    err.UnsupportedFormat,
    err.TruncatedFile,
    err.DimensionOverflow,
    err.ImageTooSmall,
    err.DimensionMismatch,
    err.TooFewFrames,
    err.MissingTableEntry,
    err.EmptyInput,
    err.MissingProbs,
    err.DegenerateLabels,
    err.MetricUndefinedOnResample,
    err.GuardOnNonSR,
    err.ZeroNormalizer,
    err.TooFewSubjects,
    err.InvalidModelParams,
    err.SchemaMismatch,
)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise err.SchemaMismatch(f"{path}: config file must hold a JSON object")
    return data


def _pick(args: argparse.Namespace, filecfg: dict, key: str, default):
    """Flag > config file > default. Flag defaults are None sentinels."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in filecfg:
        return filecfg[key]
    return default


def _experiment_config(args, filecfg: dict) -> cfgmod.ExperimentConfig:
    """Assemble an ExperimentConfig from defaults, config file, and flags."""
    if "thresholds" in filecfg:
        config = cfgmod.experiment_from_dict(filecfg)
    else:
        config = cfgmod.ExperimentConfig()

    t = config.thresholds
    t = gating.Thresholds(
        tau_low=_pick(args, filecfg, "tau_low", t.tau_low),
        tau_high=_pick(args, filecfg, "tau_high", t.tau_high),
        critical_cut=_pick(args, filecfg, "critical_cut", t.critical_cut),
    )
    a = config.adaptive
    a = replace(
        a,
        tau_base=_pick(args, filecfg, "tau_base", a.tau_base),
        alpha_blur=_pick(args, filecfg, "alpha_blur", a.alpha_blur),
        alpha_light=_pick(args, filecfg, "alpha_light", a.alpha_light),
        blur_ref=_pick(args, filecfg, "blur_ref", a.blur_ref),
    )
    u = config.utility
    u = replace(
        u,
        lam=_pick(args, filecfg, "lambda", u.lam),
        w_crit=_pick(args, filecfg, "w_crit", u.w_crit),
    )
    effect = config.scenario.sr_effect
    effect = replace(
        effect,
        uplift_enabled=_pick(args, filecfg, "uplift", effect.uplift_enabled),
        hallucination_enabled=_pick(
            args, filecfg, "hallucination", effect.hallucination_enabled
        ),
    )
    return config.with_overrides(
        thresholds=t,
        adaptive=a,
        utility=u,
        scenario=replace(config.scenario, sr_effect=effect),
        guard_enabled=_pick(args, filecfg, "guard", config.guard_enabled),
        guard_threshold=_pick(args, filecfg, "guard_threshold", config.guard_threshold),
        guard_discount=_pick(args, filecfg, "guard_discount", config.guard_discount),
        guard_relative=not _pick(
            args, filecfg, "guard_absolute", not config.guard_relative
        ),
        bins=_pick(args, filecfg, "bins", config.bins),
        resamples=_pick(args, filecfg, "resamples", config.resamples),
        ci_level=_pick(args, filecfg, "ci_level", config.ci_level),
    )


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _echo_config(out: str, effective: dict) -> None:
    _write_json(os.path.join(out, "effective_config.json"), effective)


# --- subcommand bodies ------------------------------------------------------------

def _cmd_quality(args) -> int:
    out = _outdir(args)
    ref = quality.load_pgm(args.ssim_ref) if args.ssim_ref else None
    header = ["path", "width", "height", "laplacian_variance", "mean_intensity"]
    if ref is not None:
        header.append("ssim_vs_ref")
    rows = []
    images = []
    for path in args.images:
        img = quality.load_pgm(path)
        images.append(img)
        row = [
            path,
            img.width,
            img.height,
            quality.laplacian_variance(img),
            quality.mean_intensity(img),
        ]
        if ref is not None:
            row.append(quality.ssim(img, ref))
        rows.append(row)
    _write_csv(os.path.join(out, "quality.csv"), header, rows)
    if args.clip:
        clip = quality.Clip(tuple(images))
        _write_csv(
            os.path.join(out, "temporal.csv"),
            ["n_frames", "temporal_inconsistency"],
            [[len(clip), quality.temporal_inconsistency(clip)]],
        )
    _echo_config(
        out,
        {
            "subcommand": "quality",
            "images": list(args.images),
            "ssim_ref": args.ssim_ref,
            "clip": bool(args.clip),
        },
    )
    return 0


def _decision_rows(recs, config, adaptive: bool):
    rows = []
    for r in recs:
        if adaptive:
            d = gating.gate_adaptive(
                r, config.thresholds, config.adaptive, config.utility, config.costs
            )
        else:
            d = gating.gate(r.confidence, r.criticality, config.thresholds)
        rows.append(
            [
                r.clip_id,
                r.subject_id,
                r.confidence,
                r.criticality,
                d.level.label,
                d.reason.value,
                d.tau_used,
                d.utility_by_level[0],
                d.utility_by_level[1],
                d.utility_by_level[2],
            ]
        )
    return rows


def _cmd_gate(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    recs = records.ingest_log(args.log, strict=args.strict)
    out = _outdir(args)
    adaptive = bool(_pick(args, filecfg, "adaptive", False))
    _write_csv(
        os.path.join(out, "decisions.csv"),
        [
            "clip_id",
            "subject_id",
            "confidence",
            "criticality",
            "level",
            "reason",
            "tau_used",
            "utility_none",
            "utility_2x",
            "utility_4x",
        ],
        _decision_rows(recs, config, adaptive),
    )
    _echo_config(
        out,
        {
            "subcommand": "gate",
            "log": args.log,
            "adaptive": adaptive,
            **cfgmod.experiment_to_dict(config),
        },
    )
    return 0


def _cmd_calibrate(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    seed = _pick(args, filecfg, "seed", None)
    if config.resamples > 0 and seed is None:
        raise ValueError("--seed is required when bootstrap resamples > 0")
    recs = records.ingest_log(args.log, strict=args.strict)
    out = _outdir(args)

    critical_ids = sorted(c.id for c in records.CLASSES if c.critical)
    ci_metrics = ["ece"] + [f"aupr:{k}" for k in critical_ids]
    report = cal.calibration_report(
        recs,
        bins=config.bins,
        ci_metrics=ci_metrics if config.resamples > 0 else None,
        n_resamples=max(config.resamples, 1),
        level=config.ci_level,
        seed=int(seed) if seed is not None else 0,
    )

    effective = {
        "subcommand": "calibrate",
        "log": args.log,
        "seed": seed,
        **cfgmod.experiment_to_dict(config),
    }
    fmt = args.format or "both"
    if fmt in ("report", "both"):
        _write_json(
            os.path.join(out, "calibration_report.json"),
            {
                "schema_version": simulate.SCHEMA_VERSION,
                "calibration": simulate._calibration_to_dict(report),
                "config": effective,
            },
        )
    if fmt in ("csv", "both"):
        _write_csv(
            os.path.join(out, "reliability.csv"),
            ["bin_lo", "bin_hi", "count", "mean_conf", "accuracy"],
            [[b.lo, b.hi, b.count, b.mean_conf, b.accuracy] for b in report.bins],
        )
        # full PR curves for the critical classes, one file each
        probs = np.array([r.probs for r in recs])
        true = np.array([r.true_class for r in recs])
        for k in critical_ids:
            labels = true == k
            if not labels.any():
                continue
            thresholds, precision, recall = cal.pr_curve_arrays(probs[:, k], labels)
            _write_csv(
                os.path.join(out, f"pr_{records.CLASSES[k].name}.csv"),
                ["threshold", "precision", "recall"],
                [
                    [float(t), float(p), float(r)]
                    for t, p, r in zip(thresholds, precision, recall)
                ],
            )
    _echo_config(out, effective)
    return 0


def _cmd_guard(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    recs = records.ingest_log(args.log, strict=args.strict)
    out = _outdir(args)
    rows = []
    for r in recs:
        d = gating.gate(r.confidence, r.criticality, config.thresholds)
        label = (
            guard.label_artifact(r.ssim_vs_hr, r.perceptual_loss)
            if r.ssim_vs_hr is not None and r.perceptual_loss is not None
            else None
        )
        if d.level == records.SRLevel.NONE or r.artifact_score is None:
            rows.append(
                [r.clip_id, r.artifact_score, d.level.label, False, d.level != records.SRLevel.NONE, r.confidence, label]
            )
            continue
        outcome = guard.apply_guard(
            r.artifact_score,
            d,
            r.confidence,
            threshold=config.guard_threshold,
            discount=config.guard_discount,
            relative_discount=config.guard_relative,
        )
        rows.append(
            [
                r.clip_id,
                outcome.p_artifact,
                d.level.label,
                outcome.triggered,
                outcome.used_sr,
                outcome.final_confidence,
                label,
            ]
        )
    _write_csv(
        os.path.join(out, "guard.csv"),
        ["clip_id", "p_artifact", "level", "triggered", "used_sr", "final_confidence", "artifact_label"],
        rows,
    )
    _echo_config(
        out,
        {
            "subcommand": "guard",
            "log": args.log,
            **cfgmod.experiment_to_dict(config),
        },
    )
    return 0


def _cmd_sweep(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    recs = records.ingest_log(args.log, strict=args.strict)
    out = _outdir(args)
    rel_range = _pick(args, filecfg, "rel_range", 0.25)
    steps = _pick(args, filecfg, "steps", 5)
    objective = _pick(args, filecfg, "objective", "outcome")
    rows = gating.sensitivity_sweep(
        recs,
        config.thresholds,
        config.utility,
        config.costs,
        rel_range=rel_range,
        steps=steps,
        objective=objective,
    )
    _write_csv(
        os.path.join(out, "sweep.csv"),
        ["scale_low", "scale_high", "mean_utility", "mean_cost_gflops", "n_none", "n_2x", "n_4x"],
        [
            [r.scale_low, r.scale_high, r.mean_utility, r.mean_cost_gflops, r.n_none, r.n_2x, r.n_4x]
            for r in rows
        ],
    )
    _echo_config(
        out,
        {
            "subcommand": "sweep",
            "log": args.log,
            "rel_range": rel_range,
            "steps": steps,
            "objective": objective,
            **cfgmod.experiment_to_dict(config),
        },
    )
    return 0


def _read_points(path: str) -> list[costmod.MethodPoint]:
    points = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=2):
            try:
                points.append(
                    costmod.MethodPoint(
                        name=row["name"],
                        accuracy=float(row["accuracy"]),
                        cost=float(row["cost"]),
                        fps=float(row["fps"]),
                        power_w=float(row.get("power") or row["power_w"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise err.MalformedRecord(i, f"bad method point: {exc}") from exc
    if not points:
        raise err.EmptyInput(f"{path}: no method points")
    return points


def _cmd_pareto(args) -> int:
    points = _read_points(args.points)
    out = _outdir(args)
    by_name = {p.name: p for p in points}
    baseline_name = args.baseline or points[0].name
    if baseline_name not in by_name:
        raise err.EmptyInput(f"baseline {baseline_name!r} not among points")
    baseline = by_name[baseline_name]
    if args.ref:
        if args.ref not in by_name:
            raise err.EmptyInput(f"ref {args.ref!r} not among points")
        ref = by_name[args.ref]
    else:
        # first non-baseline method with nonzero efficiency, input order
        ref = next(
            (p for p in points if p != baseline and costmod.efficiency(p, baseline) != 0.0),
            None,
        )
    frontier = set(id(p) for p in costmod.pareto_frontier(points))
    rows = []
    for p in points:
        if p == baseline:
            rel = 1.0
        elif ref is None:
            rel = 0.0
        else:
            rel = costmod.relative_efficiency(p, baseline, ref)
        rows.append(
            [p.name, p.accuracy, p.cost, p.fps, p.power_w, id(p) in frontier, rel]
        )
    _write_csv(
        os.path.join(out, "pareto.csv"),
        ["name", "accuracy", "cost", "fps", "power", "on_frontier", "rel_efficiency"],
        rows,
    )
    _echo_config(
        out,
        {
            "subcommand": "pareto",
            "points": args.points,
            "baseline": baseline.name,
            "ref": ref.name if ref is not None else None,
        },
    )
    return 0


def _write_experiment_outputs(out: str, report, outcomes, effective: dict, fmt: str) -> None:
    if fmt in ("report", "both"):
        simulate.write_report(report, os.path.join(out, "report.json"))
    if fmt in ("csv", "both"):
        _write_csv(
            os.path.join(out, "reliability.csv"),
            ["bin_lo", "bin_hi", "count", "mean_conf", "accuracy"],
            [
                [b.lo, b.hi, b.count, b.mean_conf, b.accuracy]
                for b in report.calibration.bins
            ],
        )
        _write_csv(
            os.path.join(out, "guard_outcomes.csv"),
            ["clip_id", "p_artifact", "triggered", "used_sr", "final_confidence"],
            [
                [o.final.clip_id, o.p_artifact, o.triggered, o.used_sr, o.final.confidence]
                for o in outcomes
            ],
        )
    _echo_config(out, effective)


def _cmd_simulate(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    seed = _pick(args, filecfg, "seed", None)
    if seed is None:
        raise ValueError("--seed is required for simulate")
    seed = int(seed)
    policy = _pick(args, filecfg, "policy", "gate_adaptive")
    n_per_class = int(_pick(args, filecfg, "n_per_class", 200))
    subjects = int(_pick(args, filecfg, "subjects", simulate.PINNED_SUBJECTS))
    threads = args.threads or 1
    out = _outdir(args)

    recs = simulate.sample_stream(config.scenario.model, n_per_class, subjects, seed)
    records.write_log(recs, os.path.join(out, "stream.log"))
    report, outcomes = simulate.run_experiment_with_outcomes(
        recs, policy, config, seed, threads=threads
    )
    effective = {
        "subcommand": "simulate",
        "policy": policy,
        "seed": seed,
        "n_per_class": n_per_class,
        "subjects": subjects,
        **cfgmod.experiment_to_dict(config),
    }
    _write_experiment_outputs(out, report, outcomes, effective, args.format or "both")
    return 0


def _cmd_loso_eval(args) -> int:
    filecfg = _load_config_file(args.config)
    config = _experiment_config(args, filecfg)
    if "uplift" not in filecfg and args.uplift is None:
        # log evaluation scores records as they stand; synthetic SR effects
        # are opt-in here, unlike simulate
        effect = replace(
            config.scenario.sr_effect, uplift_enabled=False, hallucination_enabled=False
        )
        config = config.with_overrides(
            scenario=replace(config.scenario, sr_effect=effect)
        )
    seed = _pick(args, filecfg, "seed", None)
    if seed is None:
        raise ValueError("--seed is required for loso-eval")
    seed = int(seed)
    policy = _pick(args, filecfg, "policy", "gate_adaptive")
    threads = args.threads or 1
    recs = records.ingest_log(args.log, strict=args.strict)
    out = _outdir(args)
    report, outcomes = simulate.run_experiment_with_outcomes(
        recs, policy, config, seed, threads=threads
    )
    effective = {
        "subcommand": "loso-eval",
        "log": args.log,
        "policy": policy,
        "seed": seed,
        **cfgmod.experiment_to_dict(config),
    }
    _write_experiment_outputs(out, report, outcomes, effective, args.format or "both")
    return 0


# --- parser ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default: current)")
    p.add_argument("--config", help="JSON config file; flags win over its values")
    p.add_argument("--strict", action="store_true", help="reject unknown log keys")


def _add_threshold_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-low", type=float, dest="tau_low")
    p.add_argument("--tau-high", type=float, dest="tau_high")
    p.add_argument("--critical-cut", type=float, dest="critical_cut")


def _add_utility_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", type=float, dest="lambda")
    p.add_argument("--w-crit", type=float, dest="w_crit")


def _add_adaptive_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-base", type=float, dest="tau_base")
    p.add_argument("--alpha-blur", type=float, dest="alpha_blur")
    p.add_argument("--alpha-light", type=float, dest="alpha_light")
    p.add_argument("--blur-ref", type=float, dest="blur_ref")


def _add_guard_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--guard", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--guard-threshold", type=float, dest="guard_threshold")
    p.add_argument("--guard-discount", type=float, dest="guard_discount")
    p.add_argument(
        "--guard-absolute",
        action=argparse.BooleanOptionalAction,
        default=None,
        dest="guard_absolute",
        help="subtract the discount instead of scaling by it",
    )


def _add_metric_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bins", type=int)
    p.add_argument("--resamples", type=int)
    p.add_argument("--ci-level", type=float, dest="ci_level")
    p.add_argument(
        "--format",
        choices=("csv", "report", "both"),
        default=None,
        help="emit plot-data CSVs, the full report, or both (default)",
    )


def _add_scenario_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--uplift", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument(
        "--hallucination", action=argparse.BooleanOptionalAction, default=None
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srgate",
        description="Resource-aware SR gating, calibration, and guard toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("quality", help="pixel statistics for PGM images")
    p.add_argument("images", nargs="+", help="P2/P5 PGM files")
    p.add_argument("--ssim-ref", dest="ssim_ref", help="reference image for SSIM")
    p.add_argument("--clip", action="store_true", help="treat inputs as one ordered clip")
    _add_common(p)
    p.set_defaults(fn=_cmd_quality)

    p = sub.add_parser("gate", help="per-record SR-level decisions")
    p.add_argument("--log", required=True)
    p.add_argument("--adaptive", action=argparse.BooleanOptionalAction, default=None)
    _add_threshold_opts(p)
    _add_adaptive_opts(p)
    _add_utility_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_gate)

    p = sub.add_parser("calibrate", help="calibration report with bootstrap CIs")
    p.add_argument("--log", required=True)
    p.add_argument("--seed", type=int)
    _add_metric_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("guard", help="artifact-guard outcomes per record")
    p.add_argument("--log", required=True)
    _add_threshold_opts(p)
    _add_guard_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_guard)

    p = sub.add_parser("sweep", help="threshold sensitivity sweep")
    p.add_argument("--log", required=True)
    p.add_argument("--rel-range", type=float, dest="rel_range")
    p.add_argument("--steps", type=int)
    p.add_argument("--objective", choices=("outcome", "heuristic"))
    _add_threshold_opts(p)
    _add_utility_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("pareto", help="frontier and relative efficiency table")
    p.add_argument("--points", required=True, help="CSV: name,accuracy,cost,fps,power")
    p.add_argument("--baseline", help="baseline method name (default: first row)")
    p.add_argument("--ref", help="normalization reference (default: first non-baseline with nonzero efficiency)")
    _add_common(p)
    p.set_defaults(fn=_cmd_pareto)

    p = sub.add_parser("simulate", help="synthetic stream + policy experiment")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=cfgmod.POLICIES)
    p.add_argument("--n-per-class", type=int, dest="n_per_class")
    p.add_argument("--subjects", type=int)
    p.add_argument("--threads", type=int, default=1)
    _add_threshold_opts(p)
    _add_adaptive_opts(p)
    _add_utility_opts(p)
    _add_guard_opts(p)
    _add_metric_opts(p)
    _add_scenario_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("loso-eval", help="policy experiment over an ingested log")
    p.add_argument("--log", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=cfgmod.POLICIES)
    p.add_argument("--threads", type=int, default=1)
    _add_threshold_opts(p)
    _add_adaptive_opts(p)
    _add_utility_opts(p)
    _add_guard_opts(p)
    _add_metric_opts(p)
    _add_scenario_opts(p)
    _add_common(p)
    p.set_defaults(fn=_cmd_loso_eval)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.fn(args)
    except ValueError as exc:
        print(f"srgate: invalid option value: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _VALIDATION_ERRORS as exc:
        print(f"srgate: data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except (err.IoFailure, OSError) as exc:
        print(f"srgate: i/o error: {exc}", file=sys.stderr)
        return IO_EXIT


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
