"""Derandomizing the frozen symbols: one frozen vector, or two time-shared.

Every frozen vector u_F gives a point (D_n(u_F), Delta_n(u_F)). Their uniform average is
the averaged-mode performance, so when that average meets the target some vertex or some
edge of the convex hull of the points does too.
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.errors import ConfigError, GuardError, OracleDisagreementError
from src.gfq.transform import all_vectors
from src.models.reports import FrozenPoint, TimeSharePlanModel
from src.oracle.exact import ExactOracle
from src.polar.construction import PolarSpec
from src.source.model import DistortionMetric

logger = logging.getLogger(__name__)

DEFAULT_FROZEN_LIMIT = 4096
DEFAULT_EPSILON = 1e-3
QUADRANT_TOLERANCE = 1e-12


class PlanKind(str, Enum):
    SINGLE = "single"
    PAIR = "pair"


class TimeSharePlan(BaseModel):
    """Use ``first`` for a fraction ``alpha`` of the blocks and ``second`` for the rest."""

    model_config = ConfigDict(frozen=True)

    kind: PlanKind
    first: FrozenPoint
    second: FrozenPoint | None = None
    alpha: float = Field(1.0, ge=0.0, le=1.0)

    @property
    def distortion(self) -> float:
        if self.second is None:
            return self.first.distortion
        return self.alpha * self.first.distortion + (1.0 - self.alpha) * self.second.distortion

    @property
    def equivocation(self) -> float:
        if self.second is None:
            return self.first.equivocation
        return (
            self.alpha * self.first.equivocation
            + (1.0 - self.alpha) * self.second.equivocation
        )

    def satisfies(self, d_target: float, delta_target: float, tol: float = QUADRANT_TOLERANCE) -> bool:
        return in_quadrant(self.distortion, self.equivocation, d_target, delta_target, tol)

    def to_model(self, d_target: float, delta_target: float) -> TimeSharePlanModel:
        return TimeSharePlanModel(
            kind=self.kind.value,
            first=self.first,
            second=self.second,
            alpha=self.alpha,
            distortion=self.distortion,
            equivocation=self.equivocation,
            target_distortion=d_target,
            target_equivocation=delta_target,
        )


def in_quadrant(
    distortion: float, equivocation: float, d_target: float, delta_target: float,
    tol: float = QUADRANT_TOLERANCE,
) -> bool:
    """Closed second quadrant around the target: D <= D_target and Delta >= Delta_target."""
    return distortion <= d_target + tol and equivocation >= delta_target - tol


def evaluate_frozen_ensemble(
    spec: PolarSpec,
    d: DistortionMetric,
    limit: int = DEFAULT_FROZEN_LIMIT,
    oracle: ExactOracle | None = None,
    threads: int | None = None,
) -> list[FrozenPoint]:
    """Exact (D_n, Delta_n) for every frozen vector, in lexicographic order of u_F.

    Raises:
        GuardError: If q^|F| exceeds ``limit``
    """
    count = spec.q ** len(spec.frozen)
    if count > limit:
        raise GuardError(f"Frozen ensemble has q^|F| = {count} vectors, limit is {limit}")
    exact = oracle or ExactOracle(spec, d, threads=threads)
    vectors = [tuple(int(s) for s in v) for v in all_vectors(spec.q, len(spec.frozen))]
    logger.info("Evaluating %d frozen vectors exactly at n=%d", count, spec.n)

    def evaluate(values: tuple[int, ...]) -> FrozenPoint:
        distortion, equivocation = exact.frozen_metrics(values)
        return FrozenPoint(frozen_values=values, distortion=distortion, equivocation=equivocation)

    workers = max(1, min(threads or os.cpu_count() or 1, count))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate, vectors))


def average_point(points: Sequence[FrozenPoint]) -> tuple[float, float]:
    """Uniform average of the ensemble, equal to the averaged-frozen-mode performance.

    Args:
        points: One entry per frozen vector

    Returns:
        (mean D_n, mean Delta_n)
    """
    return (
        math.fsum(p.distortion for p in points) / len(points),
        math.fsum(p.equivocation for p in points) / len(points),
    )


def _cross(o: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(coords: Sequence[tuple[float, float]]) -> list[int]:
    """Indices of the hull vertices in counter-clockwise order (monotone chain).

    Args:
        coords: (distortion, equivocation) pairs

    Returns:
        Vertex indices into ``coords``. Duplicate coordinates keep their first index, and
        collinear points are not vertices. Two or fewer distinct points are returned as is.
    """
    order = sorted(range(len(coords)), key=lambda i: coords[i])
    unique: list[int] = []
    for i in order:
        if not unique or coords[unique[-1]] != coords[i]:
            unique.append(i)
    if len(unique) <= 2:
        return unique

    def chain(indices: Sequence[int]) -> list[int]:
        out: list[int] = []
        for i in indices:
            while len(out) >= 2 and _cross(coords[out[-2]], coords[out[-1]], coords[i]) <= 0.0:
                out.pop()
            out.append(i)
        return out

    lower = chain(unique)
    upper = chain(unique[::-1])
    return lower[:-1] + upper[:-1]


def _alpha_interval(start: float, end: float, bound: float, upper: bool) -> tuple[float, float]:
    """Values of alpha in [0, 1] with alpha*start + (1-alpha)*end <= bound (or >= if not upper)."""
    slope = start - end
    rhs = bound - end
    if not upper:
        slope, rhs = -slope, -rhs
    rhs += QUADRANT_TOLERANCE
    if slope == 0.0:
        return (0.0, 1.0) if rhs >= 0.0 else (1.0, 0.0)
    root = rhs / slope
    return (0.0, min(1.0, root)) if slope > 0.0 else (max(0.0, root), 1.0)


def select_plan(
    points: Sequence[FrozenPoint], d_target: float, delta_target: float
) -> TimeSharePlan:
    """Pick one frozen vector inside the target quadrant, or a hull edge crossing it.

    The target is (D* + eps, Delta* - eps), supplied by the caller.

    Raises:
        ConfigError: If the uniform average of the points is outside the quadrant
        OracleDisagreementError: If the chosen plan fails its own quadrant check
    """
    if not points:
        raise ConfigError("Cannot select a plan from an empty frozen ensemble")
    avg_d, avg_delta = average_point(points)
    if not in_quadrant(avg_d, avg_delta, d_target, delta_target):
        raise ConfigError(
            f"Average point (D={avg_d:.6g}, Delta={avg_delta:.6g}) is outside the target "
            + f"quadrant (D <= {d_target:.6g}, Delta >= {delta_target:.6g}); "
            + "the ensemble does not meet the target at this block length"
        )

    inside = [p for p in points if in_quadrant(p.distortion, p.equivocation, d_target, delta_target)]
    if inside:
        best = min(inside, key=lambda p: (p.distortion, -p.equivocation))
        plan = TimeSharePlan(kind=PlanKind.SINGLE, first=best)
    else:
        coords = [(p.distortion, p.equivocation) for p in points]
        hull = convex_hull(coords)
        if len(hull) < 2:
            raise OracleDisagreementError("Degenerate hull with its average outside the quadrant")
        plan = None
        for k, i in enumerate(hull):
            j = hull[(k + 1) % len(hull)]
            if i == j:
                continue
            p, r = points[i], points[j]
            lo_d, hi_d = _alpha_interval(p.distortion, r.distortion, d_target, upper=True)
            lo_e, hi_e = _alpha_interval(p.equivocation, r.equivocation, delta_target, upper=False)
            lo, hi = max(lo_d, lo_e), min(hi_d, hi_e)
            if lo <= hi:
                plan = TimeSharePlan(kind=PlanKind.PAIR, first=p, second=r, alpha=lo)
                break
        if plan is None:
            raise OracleDisagreementError("No hull edge crosses the target quadrant")

    if not plan.satisfies(d_target, delta_target, tol=2 * QUADRANT_TOLERANCE):
        raise OracleDisagreementError(
            f"Plan (D={plan.distortion:.12g}, Delta={plan.equivocation:.12g}) misses the target"
        )
    logger.info(
        "Selected %s plan: D=%.6g, Delta=%.6g, alpha=%.4g",
        plan.kind.value, plan.distortion, plan.equivocation, plan.alpha,
    )
    return plan


def ensemble_spread(points: Sequence[FrozenPoint]) -> tuple[float, float]:
    """Spread of the ensemble around its average.

    Args:
        points: One entry per frozen vector

    Returns:
        (max - min of D_n, max - min of Delta_n)
    """
    d = np.array([p.distortion for p in points])
    e = np.array([p.equivocation for p in points])
    return float(np.ptp(d)), float(np.ptp(e))
