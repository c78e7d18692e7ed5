"""Numerical frontier of the rate-distortion-equivocation region.

Test channels P(x_hat | x, y) are enumerated on a simplex grid (one simplex per support
row of Q), every grid channel is evaluated with ``target_point_batch``, the
non-dominated set (lower R, lower D, higher Delta) is kept, and kept channels are refined
by perturbation descent on R with their own (D, Delta) as constraints.
"""

from __future__ import annotations

import bisect
import csv
import itertools
import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
from scipy.special import comb

from src.errors import GuardError, InfeasibleRequestError
from src.source.entropy import FloatArray
from src.source.model import (
    DistortionMetric,
    ForwardChannel,
    JointSource,
    OperatingPoint,
    target_point,
    target_point_batch,
)
from src.utils import write_csv

logger = logging.getLogger(__name__)

DEFAULT_GRID_RES = 20
DEFAULT_REFINE_ITERS = 12
DOMINANCE_TOLERANCE = 1e-9
CONSTRAINT_TOLERANCE = 1e-12
MAX_SOURCE_PAIRS = 16
MAX_Q = 5
MAX_GRID_SIZE = 2_000_000
# grid channels evaluated per chunk
EVAL_CHUNK = 4096
# starting points refined per minimal-rate query
QUERY_CANDIDATES = 5
# accepted moves per step size before halving
MAX_MOVES_PER_STEP = 200


@dataclass(frozen=True)
class FrontierPoint:
    """A region point together with the test channel attaining it."""

    op: OperatingPoint
    channel: ForwardChannel
    trajectory: tuple[float, ...] = ()


@dataclass(frozen=True)
class RegionFrontier:
    """Non-dominated points of one sweep."""

    source: JointSource
    distortion: DistortionMetric
    points: tuple[FrontierPoint, ...]
    grid_res: int
    refine_iters: int
    grid_size: int = 0

    def ops(self) -> FloatArray:
        """Stacked (R, D, Delta) rows."""
        return np.array([p.op.as_tuple() for p in self.points]).reshape(-1, 3)


def simplex_grid(q: int, res: int) -> FloatArray:
    """All points of the q-simplex with coordinates in multiples of 1/res."""
    rows = [
        (*bars, res - sum(bars))
        for bars in itertools.product(range(res + 1), repeat=q - 1)
        if sum(bars) <= res
    ]
    return np.array(rows, dtype=np.float64) / res


def grid_size(src: JointSource, q: int, res: int) -> int:
    """Number of channels on the grid: one simplex point per supported (x, y) row."""
    rows = int(np.count_nonzero(src.pmf > 0.0))
    return int(comb(res + q - 1, q - 1, exact=True)) ** rows


def _check_limits(src: JointSource, d: DistortionMetric, res: int, max_grid: int) -> int:
    q = d.q
    if src.nx * src.ny > MAX_SOURCE_PAIRS or q > MAX_Q:
        raise GuardError(
            f"Region sweep supports |X||Y| <= {MAX_SOURCE_PAIRS} and q <= {MAX_Q}, "
            + f"got |X||Y| = {src.nx * src.ny}, q = {q}"
        )
    if res < 1:
        raise GuardError(f"grid_res must be >= 1, got {res}")
    size = grid_size(src, q, res)
    if size > max_grid:
        raise GuardError(f"Region grid has {size} channels, limit is {max_grid}")
    return size


def _grid_channels(
    src: JointSource, simplex: FloatArray, flat: npt.NDArray[np.int64]
) -> FloatArray:
    """Conditionals (len(flat), |X|, |Y|, q) for flat mixed-radix grid indices."""
    q = simplex.shape[1]
    support = np.argwhere(src.pmf > 0.0)
    digits = np.unravel_index(flat, (simplex.shape[0],) * len(support))
    cond = np.full((flat.size, src.nx, src.ny, q), 1.0 / q)
    for (x, y), digit in zip(support, digits, strict=True):
        cond[:, x, y, :] = simplex[digit]
    return cond


def _operating_point(row: Sequence[float] | FloatArray) -> OperatingPoint:
    rate, distortion, equivocation = (float(v) for v in row)
    return OperatingPoint(R_star=rate, D_star=distortion, Delta_star=equivocation)


def pareto_mask(ops: FloatArray, tol: float = DOMINANCE_TOLERANCE) -> npt.NDArray[np.bool_]:
    """Mark rows of (R, D, Delta) not dominated by any other row.

    Rows are visited by increasing R; a row is dropped when an earlier row has
    D <= D + tol and Delta >= Delta - tol. A Fenwick tree over the D ranks holds the best
    Delta seen so far, so near-duplicates keep only their first representative.
    """
    n = ops.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    order = np.lexsort((-ops[:, 2], ops[:, 1], ops[:, 0])).tolist()
    rows = ops.tolist()
    d_sorted = np.unique(ops[:, 1]).tolist()
    tree = [-math.inf] * (len(d_sorted) + 1)
    for idx in order:
        _, dist, equiv = rows[idx]
        # prefix max over D ranks <= D + tol
        pos = bisect.bisect_right(d_sorted, dist + tol)
        best = -math.inf
        while pos > 0:
            best = max(best, tree[pos])
            pos -= pos & -pos
        if best >= equiv - tol:
            continue
        keep[idx] = True
        pos = bisect.bisect_left(d_sorted, dist) + 1
        while pos <= len(d_sorted):
            tree[pos] = max(tree[pos], equiv)
            pos += pos & -pos
    return keep


def _single_moves(
    cond: FloatArray, rows: Sequence[tuple[int, int]], step: float
) -> tuple[FloatArray, list[int]]:
    """Every transfer of min(step, mass) between two symbols of one row, with its row."""
    q = cond.shape[-1]
    moves: list[FloatArray] = []
    owners: list[int] = []
    for r, (x, y) in enumerate(rows):
        for a, b in itertools.permutations(range(q), 2):
            amount = min(step, float(cond[x, y, a]))
            if amount <= 0.0:
                continue
            delta = np.zeros_like(cond)
            delta[x, y, a] -= amount
            delta[x, y, b] += amount
            moves.append(delta)
            owners.append(r)
    return np.array(moves).reshape(-1, *cond.shape), owners


def _pair_moves(singles: FloatArray, owners: Sequence[int]) -> FloatArray:
    """Sums of two single moves in different rows, the second scaled by 2^-k."""
    moves = [
        singles[i] + scale * singles[j]
        for i, j in itertools.permutations(range(len(singles)), 2)
        if owners[i] != owners[j]
        for scale in (1.0, 0.5, 0.25, 0.125)
    ]
    return np.array(moves).reshape(-1, *singles.shape[1:])


def refine(
    src: JointSource,
    d: DistortionMetric,
    channel: ForwardChannel,
    iters: int = DEFAULT_REFINE_ITERS,
    d_max: float | None = None,
    delta_min: float | None = None,
    pair_moves: bool = False,
) -> FrontierPoint:
    """Perturbation descent on R subject to D <= d_max and Delta >= delta_min.

    The constraints default to the channel's own (D, Delta). Step sizes are 0.5^t for
    t = 1..iters; at each size the best rate-decreasing feasible move is taken until none
    remains. ``trajectory`` lists R after every accepted move and is nonincreasing.
    """
    cond = np.array(channel.conditional, dtype=np.float64)
    start = target_point(src, channel, d)
    d_cap = start.D_star if d_max is None else d_max
    delta_floor = start.Delta_star if delta_min is None else delta_min
    rows = [(int(x), int(y)) for x, y in np.argwhere(src.pmf > 0.0)]
    rate = start.R_star
    trajectory = [rate]
    for t in range(1, iters + 1):
        step = 0.5**t
        for _ in range(MAX_MOVES_PER_STEP):
            singles, owners = _single_moves(cond, rows, step)
            moves = singles
            if pair_moves and len(rows) > 1 and singles.shape[0]:
                moves = np.concatenate([singles, _pair_moves(singles, owners)])
            if not moves.shape[0]:
                break
            candidates = np.clip(cond[None] + moves, 0.0, 1.0)
            candidates /= candidates.sum(axis=-1, keepdims=True)
            r, dist, equiv = target_point_batch(src, candidates, d)
            feasible = (dist <= d_cap + CONSTRAINT_TOLERANCE) & (
                equiv >= delta_floor - CONSTRAINT_TOLERANCE
            )
            r = np.where(feasible, r, np.inf)
            best = int(np.argmin(r))
            if not r[best] < rate - CONSTRAINT_TOLERANCE:
                break
            cond = candidates[best]
            rate = float(r[best])
            trajectory.append(rate)
    refined = ForwardChannel(cond)
    return FrontierPoint(
        op=target_point(src, refined, d), channel=refined, trajectory=tuple(trajectory)
    )


def _evaluate_grid(
    src: JointSource, d: DistortionMetric, simplex: FloatArray, size: int, threads: int | None
) -> FloatArray:
    chunks = [np.arange(s, min(s + EVAL_CHUNK, size)) for s in range(0, size, EVAL_CHUNK)]

    def evaluate(flat: npt.NDArray[np.int64]) -> FloatArray:
        r, dist, equiv = target_point_batch(src, _grid_channels(src, simplex, flat), d)
        return np.stack([r, dist, equiv], axis=-1)

    workers = max(1, min(threads or os.cpu_count() or 1, len(chunks)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(evaluate, chunks)))


def sweep_region(
    src: JointSource,
    d: DistortionMetric,
    grid_res: int = DEFAULT_GRID_RES,
    refine_iters: int = DEFAULT_REFINE_ITERS,
    max_grid: int = MAX_GRID_SIZE,
    threads: int | None = None,
) -> RegionFrontier:
    """Grid sweep, Pareto filter and per-point refinement.

    Raises:
        GuardError: If the alphabets or the grid exceed the configured limits
    """
    size = _check_limits(src, d, grid_res, max_grid)
    simplex = simplex_grid(d.q, grid_res)
    logger.info("Sweeping %d grid channels (resolution %d)", size, grid_res)
    ops = _evaluate_grid(src, d, simplex, size, threads)
    kept = np.flatnonzero(pareto_mask(ops))
    logger.info("%d of %d grid channels are non-dominated", kept.size, size)

    channels = _grid_channels(src, simplex, kept)
    points = [
        FrontierPoint(op=_operating_point(ops[k]), channel=ForwardChannel(c))
        for k, c in zip(kept, channels, strict=True)
    ]
    if refine_iters > 0:
        workers = max(1, min(threads or os.cpu_count() or 1, len(points)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(lambda p: refine(src, d, p.channel, refine_iters), points))
        refined_ops = np.array([p.op.as_tuple() for p in points]).reshape(-1, 3)
        points = [p for p, k in zip(points, pareto_mask(refined_ops), strict=True) if k]
    return RegionFrontier(
        source=src,
        distortion=d,
        points=tuple(points),
        grid_res=grid_res,
        refine_iters=refine_iters,
        grid_size=size,
    )


def min_rate_at(
    src: JointSource,
    d: DistortionMetric,
    d_max: float,
    delta_min: float,
    frontier: RegionFrontier,
    refine_iters: int | None = None,
) -> FrontierPoint:
    """Minimal-rate channel with D <= d_max and Delta >= delta_min.

    The best few qualifying frontier points are refined against the query constraints
    and the lowest-rate result is returned.

    Raises:
        InfeasibleRequestError: ``out_of_range`` when the request leaves the attainable
            range, ``no_point`` when no frontier point qualifies
    """
    q = d.q
    h_y = src.entropy_y(q)
    if delta_min > h_y + CONSTRAINT_TOLERANCE or d_max < 0.0:
        raise InfeasibleRequestError(
            f"Request (D <= {d_max}, Delta >= {delta_min}) is outside [0, d_max] x [., H(Y)]"
            + f" with H(Y) = {h_y:.6g}",
            reason="out_of_range",
        )
    ops = frontier.ops()
    ok = (ops[:, 1] <= d_max + DOMINANCE_TOLERANCE) & (ops[:, 2] >= delta_min - DOMINANCE_TOLERANCE)
    if not np.any(ok):
        raise InfeasibleRequestError(
            f"No frontier point has D <= {d_max} and Delta >= {delta_min}", reason="no_point"
        )
    candidates = np.flatnonzero(ok)
    order = candidates[np.lexsort((-ops[candidates, 2], ops[candidates, 1], ops[candidates, 0]))]
    iters = frontier.refine_iters if refine_iters is None else refine_iters
    best: FrontierPoint | None = None
    for idx in order[:QUERY_CANDIDATES]:
        start = frontier.points[int(idx)]
        point = (
            refine(src, d, start.channel, iters, d_max, delta_min, pair_moves=True)
            if iters > 0
            else FrontierPoint(op=start.op, channel=start.channel, trajectory=(start.op.R_star,))
        )
        if best is None or point.op.R_star < best.op.R_star:
            best = point
    assert best is not None
    logger.info(
        "Minimal rate %.6f at D=%.6f, Delta=%.6f", best.op.R_star, best.op.D_star,
        best.op.Delta_star,
    )
    return best


def channel_columns(src: JointSource, q: int) -> list[str]:
    return [f"p_{x}_{y}_{z}" for x in range(src.nx) for y in range(src.ny) for z in range(q)]


def write_frontier_csv(frontier: RegionFrontier, path: Path) -> None:
    """Write R, D, Delta and the channel entries P(x_hat | x, y) of every frontier point."""
    q = frontier.distortion.q
    _ = write_csv(
        path,
        ["R", "D", "Delta", *channel_columns(frontier.source, q)],
        (
            [*point.op.as_tuple(), *(float(v) for v in point.channel.conditional.ravel())]
            for point in frontier.points
        ),
        comment="privpolar region frontier: R, D, Delta in base-q units; "
        + "p_x_y_z = P(x_hat=z | x, y)",
    )


def read_frontier_csv(path: Path, src: JointSource, d: DistortionMetric) -> list[FrontierPoint]:
    """Parse a frontier CSV written by ``write_frontier_csv``."""
    points: list[FrontierPoint] = []
    with open(path, newline="") as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        _ = next(rows)
        for row in rows:
            values = [float(v) for v in row]
            cond = np.array(values[3:]).reshape(src.nx, src.ny, d.q)
            points.append(
                FrontierPoint(op=_operating_point(values[:3]), channel=ForwardChannel(cond))
            )
    return points
