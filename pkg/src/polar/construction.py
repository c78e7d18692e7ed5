"""Successive-cancellation probability recursion over GF(q) and code construction.

The recursion works in natural index order against ``x_hat = polar_transform(u)``.
Writing u = (a, b) as its two halves, x_hat = (T(a) + T(b), T(b)) where T is the
half-length transform, so leaf pairs (j, j + n/2) are combined:

- the "minus" combination of leaf j with leaf j + n/2 gives the leaves of the
  sub-problem for a;
- once a is decided, alpha = T(a) is known and the "plus" combination with alpha_j
  gives the leaves of the sub-problem for b.

All recursion helpers accept arbitrary leading batch axes, so Monte-Carlo samples and
oracle enumerations run as one vectorized pass.
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TypedDict

import numpy as np
import numpy.typing as npt

from src.errors import ConfigError, ImpossiblePathError
from src.gfq.transform import PrimeModulus, log2_length
from src.source.entropy import FloatArray
from src.source.model import ForwardChannel, JointSource, check_dimensions, sample_source

logger = logging.getLogger(__name__)

DEFAULT_NUM_SAMPLES = 10_000
DEFAULT_BETA = 0.2
# Upper bound on floats held by one Monte-Carlo batch at the top recursion level
BATCH_FLOAT_BUDGET = 1 << 21

type IntArray = npt.NDArray[np.int64]
type Decider = Callable[[int, FloatArray], IntArray]


@dataclass(frozen=True)
class WeightVector:
    """Normalized length-q weights with the log of the discarded scale."""

    w: FloatArray
    log_scale: float = 0.0

    @classmethod
    def from_weights(cls, weights: npt.ArrayLike, log_scale: float = 0.0) -> WeightVector:
        """Normalize raw nonnegative weights.

        Raises:
            ImpossiblePathError: If the weights sum to zero
        """
        raw = np.asarray(weights, dtype=np.float64)
        total = float(raw.sum())
        if not total > 0.0:
            raise ImpossiblePathError("Weight vector sums to zero (impossible conditioning path)")
        return cls(w=raw / total, log_scale=log_scale + math.log(total))

    @property
    def q(self) -> int:
        return int(self.w.shape[-1])


def _sum_index(q: int) -> IntArray:
    """Table of (u1 + u2) mod q indexed [u1, u2]."""
    return (np.arange(q)[:, None] + np.arange(q)[None, :]) % q


def combine_minus(a: FloatArray, b: FloatArray) -> FloatArray:
    """out(u1) = sum_{u2} a(u1 + u2) b(u2), unnormalized, over the last axis."""
    q = a.shape[-1]
    return np.einsum("...uv,...v->...u", a[..., _sum_index(q)], b)


def combine_plus(a: FloatArray, b: FloatArray, u1: npt.ArrayLike) -> FloatArray:
    """out(u2) = a(u1 + u2) b(u2), unnormalized, over the last axis."""
    q = a.shape[-1]
    u1_arr = np.asarray(u1, dtype=np.int64)
    batch = np.broadcast_shapes(a.shape[:-1], b.shape[:-1], u1_arr.shape)
    idx = (u1_arr[..., None] + np.arange(q)) % q
    gathered = np.take_along_axis(
        np.broadcast_to(a, (*batch, q)), np.broadcast_to(idx, (*batch, q)), axis=-1
    )
    return gathered * b


def normalize_rows(weights: FloatArray) -> FloatArray:
    """Scale every length-q row to sum 1; all-zero rows stay zero."""
    totals = weights.sum(axis=-1, keepdims=True)
    return weights / np.where(totals > 0.0, totals, 1.0)


def sc_combine_minus(a: WeightVector, b: WeightVector) -> WeightVector:
    """Minus branch of the recursion on single weight vectors."""
    return WeightVector.from_weights(combine_minus(a.w, b.w), a.log_scale + b.log_scale)


def sc_combine_plus(a: WeightVector, b: WeightVector, u1: int) -> WeightVector:
    """Plus branch of the recursion given the decided symbol ``u1``.

    Raises:
        ImpossiblePathError: If u1 has zero probability under the minus branch
    """
    return WeightVector.from_weights(combine_plus(a.w, b.w, u1), a.log_scale + b.log_scale)


def successive_cancellation(
    leaves: FloatArray, decide: Decider, strict: bool = True
) -> tuple[IntArray, IntArray]:
    """Run one SC pass, calling ``decide(i, weights)`` for every index in order.

    Args:
        leaves: Leaf weights of shape (..., n, q)
        decide: Returns the decided symbol(s) for index i given the normalized
            conditional weights of shape (..., q); the result must broadcast against
            the batch axes
        strict: Raise on an all-zero conditional instead of passing it through

    Returns:
        Tuple of (u, x_hat) with x_hat = polar_transform(u), both shaped (..., n)

    Raises:
        ImpossiblePathError: If ``strict`` and a conditional has zero total weight
    """
    n = leaves.shape[-2]
    _ = log2_length(n)
    q = leaves.shape[-1]

    def recurse(level: FloatArray, offset: int) -> tuple[IntArray, IntArray]:
        m = level.shape[-2]
        if m == 1:
            weights = level[..., 0, :]
            totals = weights.sum(axis=-1)
            if strict and np.any(totals <= 0.0):
                raise ImpossiblePathError(
                    f"Conditioning prefix of index {offset} has probability zero", index=offset
                )
            symbol = np.asarray(decide(offset, normalize_rows(weights)), dtype=np.int64)
            return symbol[..., None], symbol[..., None]
        half = m // 2
        left, right = level[..., :half, :], level[..., half:, :]
        u_a, alpha = recurse(normalize_rows(combine_minus(left, right)), offset)
        u_b, beta = recurse(normalize_rows(combine_plus(left, right, alpha)), offset + half)
        u_a, u_b = np.broadcast_arrays(u_a, u_b)
        alpha, beta = np.broadcast_arrays(alpha, beta)
        return (
            np.concatenate([u_a, u_b], axis=-1),
            np.concatenate([(alpha + beta) % q, beta], axis=-1),
        )

    return recurse(normalize_rows(np.asarray(leaves, dtype=np.float64)), 0)


class _Halt(Exception):
    def __init__(self, weights: FloatArray):
        super().__init__()
        self.weights = weights


def sc_conditionals(leaf_weights: npt.ArrayLike, path: Sequence[int]) -> WeightVector:
    """Conditional law of U_i given U^{i-1} = ``path`` (i = len(path)) under the leaf weights.

    Raises:
        ImpossiblePathError: If the prefix has probability zero
    """
    leaves = np.asarray(leaf_weights, dtype=np.float64)
    n = leaves.shape[-2]
    prefix = np.asarray(path, dtype=np.int64)
    if prefix.size >= n:
        raise ConfigError(f"Path length {prefix.size} leaves no index to condition in n={n}")

    def decide(i: int, weights: FloatArray) -> IntArray:
        if i == prefix.size:
            raise _Halt(weights)
        return prefix[i]

    try:
        _ = successive_cancellation(leaves, decide)
    except _Halt as halt:
        return WeightVector(w=halt.weights)
    raise AssertionError("SC pass finished without reaching the requested index")


def conditional_table(
    leaves: FloatArray, u: npt.ArrayLike, strict: bool = True
) -> FloatArray:
    """All conditionals P(u_i | u^{i-1}) along the fixed path(s) ``u``, shape (..., n, q)."""
    path = np.asarray(u, dtype=np.int64)
    n = leaves.shape[-2]
    table: list[FloatArray] = [np.empty(0)] * n

    def decide(i: int, weights: FloatArray) -> IntArray:
        table[i] = weights
        return path[..., i]

    _ = successive_cancellation(leaves, decide, strict=strict)
    shapes = np.broadcast_shapes(*(t.shape for t in table))
    return np.stack([np.broadcast_to(t, shapes) for t in table], axis=-2)


def conditioned_leaves(ch: ForwardChannel, x: npt.ArrayLike, y: npt.ArrayLike) -> FloatArray:
    """Leaf weights V_j(x_hat) = P(x_hat | x_j, y_j), shape (..., n, q)."""
    return ch.conditional[np.asarray(x), np.asarray(y)]


def marginal_leaves(src: JointSource, ch: ForwardChannel, n: int) -> FloatArray:
    """Leaf weights V_j(x_hat) = P(x_hat), shape (n, q)."""
    return np.broadcast_to(ch.prior(src), (n, ch.q)).copy()


def draw_symbols(weights: FloatArray, rng: np.random.Generator) -> IntArray:
    """Sample one symbol per row of ``weights`` (rows need not be normalized)."""
    cumulative = np.cumsum(weights, axis=-1)
    r = rng.random((*weights.shape[:-1], 1)) * cumulative[..., -1:]
    return np.argmax(cumulative > r, axis=-1).astype(np.int64)


def bhattacharyya(joint: npt.ArrayLike) -> float:
    """Z(A | B) for a joint pmf with A on axis 0 (size q) and B on the remaining axes."""
    p = np.asarray(joint, dtype=np.float64)
    q = p.shape[0]
    if q < 2:
        return 0.0
    roots = np.sqrt(p.reshape(q, -1))
    pair_sum = float(np.sum(roots.sum(axis=0) ** 2 - (roots**2).sum(axis=0)))
    return min(max(pair_sum / (q - 1), 0.0), 1.0)


def bhattacharyya_rows(weights: FloatArray) -> FloatArray:
    """Per-row (1/(q-1)) sum_{a != a'} sqrt(w_a w_a') for normalized rows."""
    q = weights.shape[-1]
    roots = np.sqrt(weights)
    return np.clip((roots.sum(axis=-1) ** 2 - weights.sum(axis=-1)) / (q - 1), 0.0, 1.0)


class ConstructionMode(str, Enum):
    """How the frozen and computable sets are selected from the Z estimates."""

    THRESHOLD = "threshold"
    RANK = "rank"


@dataclass(frozen=True, eq=False)
class PolarSpec:
    """A constructed code: index partition, Z estimates and the law it was built for.

    Indices are 0-based. ``frozen_values`` is aligned with ``sorted(frozen)``.
    """

    n: int
    q: int
    frozen: tuple[int, ...]
    computable: tuple[int, ...]
    z_cond: FloatArray
    z_marg: FloatArray
    beta: float
    source: JointSource
    channel: ForwardChannel
    frozen_values: tuple[int, ...] = ()
    mode: ConstructionMode = ConstructionMode.RANK
    num_samples: int = 0
    seed: int = 0
    info: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        k = log2_length(self.n)
        _ = PrimeModulus(self.q)
        check_dimensions(self.source, self.channel)
        if self.channel.q != self.q:
            raise ConfigError(f"Channel alphabet {self.channel.q} does not match q={self.q}")
        frozen = tuple(sorted(self.frozen))
        computable = tuple(sorted(self.computable))
        if set(frozen) & set(computable):
            raise ConfigError("Frozen and computable sets must be disjoint")
        if any(not 0 <= i < self.n for i in (*frozen, *computable)):
            raise ConfigError(f"Indices must lie in [0, {self.n - 1}]")
        values = tuple(self.frozen_values) or (0,) * len(frozen)
        if len(values) != len(frozen) or any(not 0 <= v < self.q for v in values):
            raise ConfigError(f"Need {len(frozen)} frozen values in [0, {self.q - 1}]")
        for name in ("z_cond", "z_marg"):
            z = np.asarray(getattr(self, name), dtype=np.float64)
            if z.shape != (self.n,) or np.any(z < 0.0) or np.any(z > 1.0):
                raise ConfigError(f"{name} must hold {self.n} values in [0, 1]")
            z.setflags(write=False)
            object.__setattr__(self, name, z)
        taken = set(frozen) | set(computable)
        object.__setattr__(self, "frozen", frozen)
        object.__setattr__(self, "computable", computable)
        object.__setattr__(self, "frozen_values", values)
        object.__setattr__(self, "info", tuple(i for i in range(self.n) if i not in taken))
        logger.debug(
            "PolarSpec n=2^%d: |I|=%d |F|=%d |D|=%d",
            k, len(self.info), len(frozen), len(computable),
        )

    @property
    def k(self) -> int:
        return log2_length(self.n)

    @property
    def rate(self) -> float:
        """R_n = |I| / n."""
        return len(self.info) / self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolarSpec):
            return NotImplemented
        return (
            (self.n, self.q, self.frozen, self.computable, self.frozen_values)
            == (other.n, other.q, other.frozen, other.computable, other.frozen_values)
            and (self.beta, self.mode, self.num_samples, self.seed)
            == (other.beta, other.mode, other.num_samples, other.seed)
            and np.array_equal(self.z_cond, other.z_cond)
            and np.array_equal(self.z_marg, other.z_marg)
            and np.allclose(self.source.pmf, other.source.pmf, rtol=0.0, atol=1e-15)
            and np.allclose(
                self.channel.conditional, other.channel.conditional, rtol=0.0, atol=1e-15
            )
        )

    __hash__ = None  # pyright: ignore[reportAssignmentType]

    def with_frozen_values(self, values: Sequence[int]) -> PolarSpec:
        return replace(self, frozen_values=tuple(int(v) for v in values))

    @classmethod
    def with_sets(
        cls,
        src: JointSource,
        ch: ForwardChannel,
        n: int,
        frozen: Sequence[int] = (),
        computable: Sequence[int] = (),
        z_cond: npt.ArrayLike | None = None,
        z_marg: npt.ArrayLike | None = None,
        beta: float = DEFAULT_BETA,
    ) -> PolarSpec:
        """Build a spec from a caller-chosen partition.

        Missing Z estimates are filled with the exact values from full enumeration.
        """
        if z_cond is None or z_marg is None:
            from src.oracle.exact import exact_bhattacharyya

            exact_cond, exact_marg = exact_bhattacharyya(src, ch, n)
            z_cond = exact_cond if z_cond is None else z_cond
            z_marg = exact_marg if z_marg is None else z_marg
        return cls(
            n=n,
            q=ch.q,
            frozen=tuple(frozen),
            computable=tuple(computable),
            z_cond=np.asarray(z_cond, dtype=np.float64),
            z_marg=np.asarray(z_marg, dtype=np.float64),
            beta=beta,
            source=src,
            channel=ch,
        )


def _batch_sizes(total: int, n: int, q: int) -> list[int]:
    per_batch = max(1, min(total, BATCH_FLOAT_BUDGET // (2 * n * q)))
    sizes = [per_batch] * (total // per_batch)
    if total % per_batch:
        sizes.append(total % per_batch)
    return sizes


def _estimate_batch(
    src: JointSource, ch: ForwardChannel, n: int, batch: int, seed: int, task: int
) -> tuple[FloatArray, FloatArray]:
    """Sum of per-sample Bhattacharyya values over one batch of source realizations."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, task]))
    x, y = sample_source(src, n, rng, batch=batch)
    leaves = np.stack(
        [conditioned_leaves(ch, x, y), np.broadcast_to(marginal_leaves(src, ch, n), (batch, n, ch.q))],
        axis=1,
    )
    z_cond = np.zeros(n)
    z_marg = np.zeros(n)

    def decide(i: int, weights: FloatArray) -> IntArray:
        z = bhattacharyya_rows(weights)
        z_cond[i] = math.fsum(z[:, 0])
        z_marg[i] = math.fsum(z[:, 1])
        return draw_symbols(weights[:, 0, :], rng)[:, None]

    _ = successive_cancellation(leaves, decide)
    return z_cond, z_marg


def estimate_bhattacharyya(
    src: JointSource,
    ch: ForwardChannel,
    n: int,
    num_samples: int = DEFAULT_NUM_SAMPLES,
    seed: int = 0,
    threads: int | None = None,
) -> tuple[FloatArray, FloatArray]:
    """Monte-Carlo estimates of Z(U_i | U^{i-1}, X^n, Y^n) and Z(U_i | U^{i-1}).

    Each sample draws (x^n, y^n) from the source and u^n from P(u^n | x^n, y^n) by
    randomized SC, accumulating the Bhattacharyya value of both conditional variants
    along the same path. Batch t uses the generator stream SeedSequence([seed, t]).
    """
    _ = log2_length(n)
    check_dimensions(src, ch)
    if num_samples < 1:
        raise ConfigError(f"num_samples must be >= 1, got {num_samples}")
    sizes = _batch_sizes(num_samples, n, ch.q)
    workers = max(1, min(threads or os.cpu_count() or 1, len(sizes)))
    logger.info(
        "Estimating Bhattacharyya parameters: n=%d, %d samples in %d batches, %d threads",
        n, num_samples, len(sizes), workers,
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(lambda t: _estimate_batch(src, ch, n, sizes[t], seed, t), range(len(sizes)))
        )
    z_cond = np.sum([p[0] for p in parts], axis=0) / num_samples
    z_marg = np.sum([p[1] for p in parts], axis=0) / num_samples
    return np.clip(z_cond, 0.0, 1.0), np.clip(z_marg, 0.0, 1.0)


def threshold_delta(n: int, beta: float) -> float:
    """delta_n = 2^{-n^beta}."""
    return 2.0 ** (-(n**beta))


def select_sets(
    z_cond: FloatArray,
    z_marg: FloatArray,
    beta: float,
    mode: ConstructionMode,
    target_rate: float | None = None,
    computable_size: int | None = None,
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Choose (F, D) from the Z estimates.

    Threshold mode: F = {Z_cond >= 1 - delta_n}, D = {Z_marg <= delta_n} minus F.
    Rank mode: F is the |F| largest Z_cond, then D the |D| smallest Z_marg among the
    rest, with |I| = round(target_rate * n).
    """
    n = z_cond.shape[0]
    delta = threshold_delta(n, beta)
    if mode is ConstructionMode.THRESHOLD:
        frozen = {int(i) for i in np.flatnonzero(z_cond >= 1.0 - delta)}
        computable = {int(i) for i in np.flatnonzero(z_marg <= delta)} - frozen
        if not frozen:
            logger.warning(
                "Threshold 1 - 2^-n^beta = %.3g leaves F empty at n=%d; consider rank mode",
                1.0 - delta, n,
            )
        return tuple(sorted(frozen)), tuple(sorted(computable))

    if target_rate is None or not 0.0 <= target_rate <= 1.0:
        raise ConfigError(f"Rank mode needs target_rate in [0, 1], got {target_rate}")
    d_size = int(np.count_nonzero(z_marg <= delta)) if computable_size is None else computable_size
    if not 0 <= d_size <= n:
        raise ConfigError(f"computable_size must lie in [0, {n}], got {d_size}")
    info_size = min(max(int(round(target_rate * n)), 0), n - d_size)
    f_size = n - info_size - d_size
    # stable sorts keep lower indices first on ties
    by_cond = np.argsort(-z_cond, kind="stable")
    frozen = {int(i) for i in by_cond[:f_size]}
    rest = np.array([i for i in np.argsort(z_marg, kind="stable") if int(i) not in frozen])
    computable = {int(i) for i in rest[:d_size]}
    return tuple(sorted(frozen)), tuple(sorted(computable))


def construct_sets(
    src: JointSource,
    ch: ForwardChannel,
    n: int,
    beta: float = DEFAULT_BETA,
    mode: ConstructionMode | str = ConstructionMode.RANK,
    num_samples: int = DEFAULT_NUM_SAMPLES,
    seed: int = 0,
    target_rate: float | None = None,
    computable_size: int | None = None,
    threads: int | None = None,
) -> PolarSpec:
    """Estimate the Bhattacharyya parameters and select the sets F, D and I."""
    mode = ConstructionMode(mode)
    if not 0.0 < beta < 0.5:
        raise ConfigError(f"beta must lie in (0, 1/2), got {beta}")
    if mode is ConstructionMode.RANK and target_rate is None:
        raise ConfigError("Rank mode requires a target rate")
    z_cond, z_marg = estimate_bhattacharyya(src, ch, n, num_samples, seed, threads)
    frozen, computable = select_sets(z_cond, z_marg, beta, mode, target_rate, computable_size)
    spec = PolarSpec(
        n=n,
        q=ch.q,
        frozen=frozen,
        computable=computable,
        z_cond=z_cond,
        z_marg=z_marg,
        beta=beta,
        source=src,
        channel=ch,
        mode=mode,
        num_samples=num_samples,
        seed=seed,
    )
    logger.info(
        "Constructed n=%d code: R_n=%.4f (|I|=%d, |F|=%d, |D|=%d)",
        n, spec.rate, len(spec.info), len(spec.frozen), len(spec.computable),
    )
    return spec


class SpectrumRow(TypedDict):
    """One row of the polarization spectrum."""

    index: int
    z_cond: float
    z_marg: float


def polarization_spectrum(spec: PolarSpec) -> list[SpectrumRow]:
    """Per-index (Z_cond, Z_marg) rows sorted by index."""
    return [
        {"index": i, "z_cond": float(spec.z_cond[i]), "z_marg": float(spec.z_marg[i])}
        for i in range(spec.n)
    ]


def reconstruction_is_uniform(src: JointSource, ch: ForwardChannel, tol: float = 1e-12) -> bool:
    """True when P(x_hat) is uniform, the case where D is asymptotically negligible."""
    prior = ch.prior(src)
    return bool(np.all(np.abs(prior - 1.0 / ch.q) <= tol))
