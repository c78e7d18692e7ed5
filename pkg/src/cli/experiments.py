"""Command orchestration: resolve a RunConfig into module inputs, run, and write outputs.

Each ``run_*`` function is a pure function of the config and its seeds; the only
run-dependent values go to the ``.meta.json`` sidecar written next to the primary output.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from src.config import ChannelKind, RunConfig
from src.errors import ConfigError, OracleDisagreementError
from src.models.reports import OperatingPointModel, OracleReport, RegionQueryReport, TrialRow
from src.oracle.exact import ExactOracle, exact_bhattacharyya
from src.polar.codec import run_trials
from src.polar.construction import (
    ConstructionMode,
    PolarSpec,
    construct_sets,
    polarization_spectrum,
    select_sets,
)
from src.polar.spec_io import load_spec, save_spec
from src.polar.timeshare import (
    TimeSharePlan,
    convex_hull,
    evaluate_frozen_ensemble,
    select_plan,
)
from src.source.model import DistortionMetric, ForwardChannel, JointSource, target_point
from src.source.region import (
    FrontierPoint,
    RegionFrontier,
    min_rate_at,
    sweep_region,
    write_frontier_csv,
)
from src.utils import derive_output_name, write_csv, write_json, write_metadata

logger = logging.getLogger(__name__)

REVALIDATION_TOLERANCE = 1e-9


class CommandResult(BaseModel):
    """Files a command wrote and the summary lines the CLI prints."""

    primary: Path
    outputs: list[Path] = Field(default_factory=list)
    summary: list[str] = Field(default_factory=list)


@dataclass(frozen=True)
class Problem:
    """Validated module inputs for one config."""

    source: JointSource
    distortion: DistortionMetric
    channel: ForwardChannel
    query: FrontierPoint | None = None


def effective_threads(threads: int | None) -> int:
    return threads or os.cpu_count() or 1


def resolve_problem(
    cfg: RunConfig, threads: int | None = None, frontier: RegionFrontier | None = None
) -> Problem:
    """Build the source, distortion and test channel, running the region query if asked."""
    src = cfg.build_source()
    d = cfg.build_distortion(src)
    channel = cfg.explicit_channel(src)
    if channel is not None:
        return Problem(source=src, distortion=d, channel=channel)

    region = cfg.channel
    assert region.d_max is not None and region.delta_min is not None
    if frontier is None:
        frontier = sweep_region(src, d, region.grid_res, region.refine_iters, threads=threads)
    point = min_rate_at(src, d, region.d_max, region.delta_min, frontier)
    return Problem(source=src, distortion=d, channel=point.channel, query=point)


def _target_model(problem: Problem) -> OperatingPointModel:
    op = target_point(problem.source, problem.channel, problem.distortion)
    return OperatingPointModel(R_star=op.R_star, D_star=op.D_star, Delta_star=op.Delta_star)


def _finish(
    result: CommandResult,
    cfg: RunConfig,
    command: str,
    threads: int | None,
    config_path: Path | None,
) -> CommandResult:
    sidecar = write_metadata(
        result.primary,
        command,
        seed=cfg.seed,
        threads=effective_threads(threads),
        outputs=result.outputs,
        config_path=config_path,
    )
    result.outputs.append(sidecar)
    return result


def revalidate_frontier(frontier: RegionFrontier) -> float:
    """Recompute every frontier row with ``target_point``; returns the largest deviation.

    Raises:
        OracleDisagreementError: If a row deviates by more than the revalidation tolerance
    """
    worst = 0.0
    for point in frontier.points:
        op = target_point(frontier.source, point.channel, frontier.distortion)
        gap = float(np.max(np.abs(np.subtract(op.as_tuple(), point.op.as_tuple()))))
        worst = max(worst, gap)
    if worst > REVALIDATION_TOLERANCE:
        raise OracleDisagreementError(
            f"Frontier row disagrees with a direct evaluation by {worst:.3g}"
        )
    return worst


def run_region(
    cfg: RunConfig, config_path: Path | None = None, threads: int | None = None
) -> CommandResult:
    """Sweep the region frontier; answer the minimal-rate query when the channel asks for one.

    The query is resolved before anything is written, so an infeasible request leaves no
    output behind.
    """
    src = cfg.build_source()
    d = cfg.build_distortion(src)
    name = derive_output_name(config_path)
    frontier = sweep_region(
        src, d, cfg.channel.grid_res, cfg.channel.refine_iters, threads=threads
    )
    worst = revalidate_frontier(frontier)
    query: RegionQueryReport | None = None
    if cfg.channel.kind is ChannelKind.REGION:
        problem = resolve_problem(cfg, threads, frontier)
        assert problem.query is not None and cfg.channel.d_max is not None
        assert cfg.channel.delta_min is not None
        query = RegionQueryReport(
            d_max=cfg.channel.d_max,
            delta_min=cfg.channel.delta_min,
            point=_target_model(problem),
            channel=[float(v) for v in problem.channel.conditional.ravel()],
            rate_trajectory=list(problem.query.trajectory),
        )

    csv_path = cfg.output_dir / f"{name}.frontier.csv"
    write_frontier_csv(frontier, csv_path)
    result = CommandResult(primary=csv_path, outputs=[csv_path])
    result.summary.append(
        f"✓ Frontier: {len(frontier.points)} points from {frontier.grid_size} grid channels "
        + f"(max revalidation gap {worst:.2g})"
    )
    if query is not None:
        query_path = cfg.output_dir / f"{name}.query.json"
        write_json(query_path, query)
        result.outputs.append(query_path)
        result.summary.append(
            f"✓ Minimal rate {query.point.R_star:.6f} at D={query.point.D_star:.6f}, "
            + f"Delta={query.point.Delta_star:.6f}"
        )
    return _finish(result, cfg, "region", threads, config_path)


def _target_rate(cfg: RunConfig, problem: Problem) -> float | None:
    if cfg.polar.mode is not ConstructionMode.RANK or cfg.polar.target_rate is not None:
        return cfg.polar.target_rate
    rate = min(1.0, target_point(problem.source, problem.channel, problem.distortion).R_star)
    logger.info("No target_rate given; using R* = %.6f", rate)
    return rate


def build_spec(cfg: RunConfig, problem: Problem, threads: int | None = None) -> PolarSpec:
    """Monte-Carlo construction at the configured block length."""
    return construct_sets(
        problem.source,
        problem.channel,
        cfg.polar.n,
        beta=cfg.polar.beta,
        mode=cfg.polar.mode,
        num_samples=cfg.polar.num_samples,
        seed=cfg.seed,
        target_rate=_target_rate(cfg, problem),
        computable_size=cfg.polar.computable_size,
        threads=threads,
    )


def build_exact_spec(cfg: RunConfig, problem: Problem) -> PolarSpec:
    """Construction from exact Z values, for block lengths small enough to enumerate."""
    z_cond, z_marg = exact_bhattacharyya(problem.source, problem.channel, cfg.polar.n)
    frozen, computable = select_sets(
        z_cond,
        z_marg,
        cfg.polar.beta,
        cfg.polar.mode,
        _target_rate(cfg, problem),
        cfg.polar.computable_size,
    )
    spec = PolarSpec.with_sets(
        problem.source,
        problem.channel,
        cfg.polar.n,
        frozen,
        computable,
        z_cond=z_cond,
        z_marg=z_marg,
        beta=cfg.polar.beta,
    )
    if cfg.frozen_values is not None:
        spec = spec.with_frozen_values(cfg.frozen_values)
    return spec


def _spec_for(
    cfg: RunConfig, spec_path: Path | None, threads: int | None
) -> tuple[PolarSpec, Problem]:
    if spec_path is not None:
        spec = load_spec(spec_path)
        src = spec.source
        problem = Problem(source=src, distortion=cfg.build_distortion(src), channel=spec.channel)
    else:
        problem = resolve_problem(cfg, threads)
        spec = build_exact_spec(cfg, problem)
    if problem.distortion.q != spec.q or problem.distortion.matrix.shape[0] != spec.source.nx:
        raise ConfigError(
            f"Distortion matrix shape {problem.distortion.matrix.shape} does not fit the "
            + f"spec (|X|={spec.source.nx}, q={spec.q})"
        )
    return spec, problem


def run_construct(
    cfg: RunConfig, config_path: Path | None = None, threads: int | None = None
) -> CommandResult:
    """Choose F, D and I and write the spec with its polarization spectrum."""
    problem = resolve_problem(cfg, threads)
    spec = build_spec(cfg, problem, threads)
    if cfg.frozen_values is not None:
        spec = spec.with_frozen_values(cfg.frozen_values)
    name = derive_output_name(config_path)

    spec_path = cfg.output_dir / f"{name}.spec"
    save_spec(spec, spec_path)
    spectrum_path = cfg.output_dir / f"{name}.spectrum.csv"
    _ = write_csv(
        spectrum_path,
        ["index", "z_cond", "z_marg", "role"],
        (
            [row["index"], row["z_cond"], row["z_marg"], _role(spec, row["index"])]
            for row in polarization_spectrum(spec)
        ),
        comment=f"privpolar polarization spectrum n={spec.n} q={spec.q}",
    )
    result = CommandResult(primary=spec_path, outputs=[spec_path, spectrum_path])
    result.summary.append(
        f"✓ Constructed n={spec.n} code: R_n={spec.rate:.4f} "
        + f"(|I|={len(spec.info)}, |F|={len(spec.frozen)}, |D|={len(spec.computable)})"
    )
    return _finish(result, cfg, "construct", threads, config_path)


def _role(spec: PolarSpec, index: int) -> str:
    if index in spec.frozen:
        return "F"
    if index in spec.computable:
        return "D"
    return "I"


def run_simulate(
    cfg: RunConfig,
    spec_path: Path,
    config_path: Path | None = None,
    threads: int | None = None,
) -> CommandResult:
    """Run encode/decode trials for a spec file; per-trial rows are written when requested."""
    spec, problem = _spec_for(cfg, spec_path, threads)
    report, records = run_trials(
        spec,
        problem.distortion,
        policy=cfg.frozen_policy,
        trials=cfg.trials,
        seed=cfg.seed,
        frozen_values=cfg.frozen_values,
        confidence=cfg.confidence,
        threads=threads,
        spec_reference=spec_path.name,
    )
    name = derive_output_name(config_path)
    report_path = cfg.output_dir / f"{name}.simulate.json"
    write_json(report_path, report)
    result = CommandResult(primary=report_path, outputs=[report_path])
    if cfg.per_trial_csv:
        trials_path = cfg.output_dir / f"{name}.trials.csv"
        rows = (
            TrialRow(trial=r.trial, distortion=r.distortion, decode_mismatch=r.decode_mismatch)
            for r in records
        )
        _ = write_csv(
            trials_path,
            list(TrialRow.model_fields),
            (list(row.model_dump().values()) for row in rows),
        )
        result.outputs.append(trials_path)
    result.summary.append(
        f"✓ {report.trials} trials: D_n={report.mean_distortion:.5f} "
        + f"± {report.distortion_half_width:.5f}, P_e={report.error_rate:.5f} "
        + f"(bound {report.error_bound:.3g})"
    )
    return _finish(result, cfg, "simulate", threads, config_path)


def run_oracle(
    cfg: RunConfig,
    spec_path: Path | None = None,
    config_path: Path | None = None,
    threads: int | None = None,
) -> tuple[CommandResult, OracleReport]:
    """Exact quantities and inequality checks; outputs are written even when a check fails."""
    spec, problem = _spec_for(cfg, spec_path, threads)
    oracle = ExactOracle(spec, problem.distortion, threads=threads)
    report = oracle.report(cfg.oracle_mode, cfg.frozen_values)
    name = derive_output_name(config_path)

    report_path = cfg.output_dir / f"{name}.oracle.json"
    write_json(report_path, report)
    checks_path = cfg.output_dir / f"{name}.checks.csv"
    _ = write_csv(
        checks_path,
        ["name", "lhs", "rhs", "status", "asserted"],
        ([c.name, c.lhs, c.rhs, c.status, c.asserted] for c in report.checks),
    )
    result = CommandResult(primary=report_path, outputs=[report_path, checks_path])
    result.summary.extend(
        f"{c.status:>4}  {c.name}: {c.lhs:.6g} <= {c.rhs:.6g}"
        + ("" if c.asserted else "  (reported only)")
        for c in report.checks
    )
    return _finish(result, cfg, "oracle", threads, config_path), report


def run_timeshare(
    cfg: RunConfig,
    spec_path: Path | None = None,
    config_path: Path | None = None,
    threads: int | None = None,
) -> tuple[CommandResult, TimeSharePlan]:
    """Evaluate every frozen vector exactly and pick a plan meeting (D* + eps, Delta* - eps).

    Raises:
        GuardError: If q^|F| exceeds the frozen limit
        ConfigError: If the ensemble average is outside the target quadrant
    """
    spec, problem = _spec_for(cfg, spec_path, threads)
    points = evaluate_frozen_ensemble(
        spec, problem.distortion, limit=cfg.frozen_limit, threads=threads
    )
    op = target_point(spec.source, spec.channel, problem.distortion)
    d_target = op.D_star + cfg.epsilon
    delta_target = op.Delta_star - cfg.epsilon
    plan = select_plan(points, d_target, delta_target)
    hull = set(convex_hull([(p.distortion, p.equivocation) for p in points]))
    name = derive_output_name(config_path)

    plan_path = cfg.output_dir / f"{name}.plan.json"
    write_json(plan_path, plan.to_model(d_target, delta_target))
    points_path = cfg.output_dir / f"{name}.frozen.csv"
    _ = write_csv(
        points_path,
        ["frozen_values", "distortion", "equivocation", "on_hull"],
        (
            [
                "".join(str(v) for v in p.frozen_values),
                p.distortion,
                p.equivocation,
                int(k in hull),
            ]
            for k, p in enumerate(points)
        ),
        comment=f"privpolar frozen ensemble n={spec.n} q={spec.q}; "
        + f"target D <= {d_target!r}, Delta >= {delta_target!r}",
    )
    result = CommandResult(primary=plan_path, outputs=[plan_path, points_path])
    result.summary.append(
        f"✓ {plan.kind.value} plan over {len(points)} frozen vectors: "
        + f"D={plan.distortion:.6f}, Delta={plan.equivocation:.6f}, alpha={plan.alpha:.4f}"
    )
    return _finish(result, cfg, "timeshare", threads, config_path), plan
