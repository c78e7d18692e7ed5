"""Randomized SC encoder, SC decoder with argmax fill-in, and the batch trial runner.

Encoder: indices in I are drawn from P(u_i | u^{i-1}, x^n, y^n), indices in D from
P(u_i | u^{i-1}), indices in F are set to the frozen values. Decoder: I and F are copied,
D is filled with argmax P(u | u_hat^{i-1}) (ties to the smallest symbol), and the
reconstruction is polar_transform(u_hat).
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict
from scipy.stats import norm

from src.errors import ConfigError, GuardError
from src.gfq.transform import all_vectors, polar_transform
from src.models.reports import ExperimentReport, OperatingPointModel
from src.polar.construction import (
    BATCH_FLOAT_BUDGET,
    FloatArray,
    IntArray,
    PolarSpec,
    conditioned_leaves,
    marginal_leaves,
    successive_cancellation,
)
from src.source.entropy import entropy
from src.source.model import DistortionMetric, sample_source, target_point

logger = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.95
DEFAULT_CODEBOOK_LIMIT = 4096


class FrozenPolicy(str, Enum):
    """How frozen symbols are chosen for each trial."""

    ZERO = "zero"
    UNIFORM = "uniform"
    FIXED = "fixed"


@dataclass(frozen=True)
class Message:
    """The transmitted symbols u_I, in ascending index order."""

    u_info: IntArray

    @property
    def length(self) -> int:
        return int(self.u_info.shape[-1])


class TrialRecord(BaseModel):
    """Outcome of one encode/decode trial; ``trial`` indexes its generator stream."""

    model_config = ConfigDict(frozen=True)

    trial: int
    seed: int
    distortion: float
    decode_mismatch: bool


def _index_roles(spec: PolarSpec) -> tuple[dict[int, int], dict[int, int], frozenset[int]]:
    info_pos = {i: p for p, i in enumerate(spec.info)}
    frozen_pos = {i: p for p, i in enumerate(spec.frozen)}
    return info_pos, frozen_pos, frozenset(spec.computable)


def _frozen_array(spec: PolarSpec, frozen_values: npt.ArrayLike | None) -> IntArray:
    values = np.asarray(spec.frozen_values if frozen_values is None else frozen_values, np.int64)
    if values.shape[-1:] != (len(spec.frozen),):
        raise ConfigError(f"Expected {len(spec.frozen)} frozen values, got shape {values.shape}")
    if values.size and (values.min() < 0 or values.max() >= spec.q):
        raise ConfigError(f"Frozen values must lie in [0, {spec.q - 1}]")
    return values


def encode_with_uniforms(
    spec: PolarSpec,
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    frozen_values: npt.ArrayLike | None,
    uniforms: FloatArray,
) -> tuple[IntArray, Message]:
    """Encode with caller-supplied uniforms in [0, 1), one per index, shaped like ``x``.

    Index i is sampled by inverse CDF with ``uniforms[..., i]``, so a batch of trials
    encodes exactly as each trial would alone.
    """
    x_arr = np.asarray(x, dtype=np.int64)
    y_arr = np.asarray(y, dtype=np.int64)
    if x_arr.shape[-1] != spec.n or x_arr.shape != y_arr.shape:
        raise ConfigError(f"x and y must both have length n={spec.n}")
    frozen = _frozen_array(spec, frozen_values)
    info_pos, frozen_pos, computable = _index_roles(spec)
    batch = x_arr.shape[:-1]
    cond = conditioned_leaves(spec.channel, x_arr, y_arr)
    marg = np.broadcast_to(marginal_leaves(spec.source, spec.channel, spec.n), cond.shape)
    leaves = np.stack([cond, marg], axis=-3)

    def decide(i: int, weights: FloatArray) -> IntArray:
        if i in frozen_pos:
            return np.broadcast_to(frozen[..., frozen_pos[i]], batch)[..., None]
        row = weights[..., 1 if i in computable else 0, :]
        cumulative = np.cumsum(row, axis=-1)
        r = uniforms[..., i, None] * cumulative[..., -1:]
        return np.argmax(cumulative > r, axis=-1)[..., None]

    u, _ = successive_cancellation(leaves, decide)
    u = np.broadcast_to(u[..., 0, :], (*batch, spec.n)).copy()
    return u, Message(u_info=u[..., list(info_pos)])


def encode(
    spec: PolarSpec,
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    frozen_values: npt.ArrayLike | None = None,
    seed: int | np.random.Generator | None = None,
) -> tuple[IntArray, Message]:
    """Randomized successive encoding of (x^n, y^n); deterministic given ``seed``.

    Raises:
        ImpossiblePathError: If the frozen values make a prefix impossible
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = np.asarray(x).shape
    return encode_with_uniforms(spec, x, y, frozen_values, rng.random(shape))


def decode(
    spec: PolarSpec, msg: Message, frozen_values: npt.ArrayLike | None = None
) -> tuple[IntArray, IntArray]:
    """SC decoding of a message: returns (u_hat, x_hat)."""
    if msg.length != len(spec.info):
        raise ConfigError(f"Message has {msg.length} symbols, code transmits {len(spec.info)}")
    u_info = np.asarray(msg.u_info, dtype=np.int64)
    if u_info.size and (u_info.min() < 0 or u_info.max() >= spec.q):
        raise ConfigError(f"Message symbols must lie in [0, {spec.q - 1}]")
    frozen = _frozen_array(spec, frozen_values)
    info_pos, frozen_pos, _ = _index_roles(spec)
    batch = np.broadcast_shapes(u_info.shape[:-1], frozen.shape[:-1])

    def decide(i: int, weights: FloatArray) -> IntArray:
        if i in info_pos:
            return u_info[..., info_pos[i]]
        if i in frozen_pos:
            return frozen[..., frozen_pos[i]]
        return np.argmax(weights, axis=-1)

    leaves = marginal_leaves(spec.source, spec.channel, spec.n)
    u_hat, x_hat = successive_cancellation(leaves, decide, strict=False)
    return (
        np.broadcast_to(u_hat, (*batch, spec.n)).copy(),
        np.broadcast_to(x_hat, (*batch, spec.n)).copy(),
    )


def coset_codebook(
    spec: PolarSpec,
    frozen_values: npt.ArrayLike | None = None,
    limit: int = DEFAULT_CODEBOOK_LIMIT,
) -> IntArray:
    """All reconstructions {polar_transform(u) : u_I free, u_F fixed}, one per row.

    Raises:
        ConfigError: If D is not empty (the codebook is then not a coset)
        GuardError: If q^|I| exceeds ``limit``
    """
    if spec.computable:
        raise ConfigError("The coset view requires an empty computable set")
    size = spec.q ** len(spec.info)
    if size > limit:
        raise GuardError(f"Codebook has q^|I| = {size} words, limit is {limit}")
    frozen = _frozen_array(spec, frozen_values)
    u = np.zeros((size, spec.n), dtype=np.int64)
    u[:, list(spec.info)] = all_vectors(spec.q, len(spec.info))
    u[:, list(spec.frozen)] = frozen
    return polar_transform(u, spec.q)


@dataclass
class _BatchResult:
    records: list[TrialRecord]
    # joint counts of (y, x_hat) pooled over trials and letters
    counts: npt.NDArray[np.int64]


def _trial_batch(
    spec: PolarSpec,
    d: DistortionMetric,
    policy: FrozenPolicy,
    fixed: IntArray,
    seed: int,
    trials: Sequence[int],
) -> _BatchResult:
    xs, ys, frozen, uniforms = [], [], [], []
    for t in trials:
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        x, y = sample_source(spec.source, spec.n, rng)
        xs.append(x)
        ys.append(y)
        match policy:
            case FrozenPolicy.UNIFORM:
                frozen.append(rng.integers(0, spec.q, size=len(spec.frozen)))
            case FrozenPolicy.ZERO:
                frozen.append(np.zeros(len(spec.frozen), dtype=np.int64))
            case FrozenPolicy.FIXED:
                frozen.append(fixed)
        uniforms.append(rng.random(spec.n))
    x_b, y_b, f_b = np.stack(xs), np.stack(ys), np.stack(frozen).astype(np.int64)
    u, msg = encode_with_uniforms(spec, x_b, y_b, f_b, np.stack(uniforms))
    u_hat, x_hat = decode(spec, msg, f_b)
    distortion = d.block(x_b, x_hat)
    mismatch = np.any(u_hat != u, axis=-1)
    counts = np.zeros((spec.source.ny, spec.q), dtype=np.int64)
    np.add.at(counts, (y_b.ravel(), x_hat.ravel()), 1)
    records = [
        TrialRecord(trial=t, seed=seed, distortion=float(dist), decode_mismatch=bool(err))
        for t, dist, err in zip(trials, distortion, mismatch, strict=True)
    ]
    return _BatchResult(records=records, counts=counts)


def empirical_equivocation(counts: npt.ArrayLike, q: int) -> float:
    """Per-letter H(Y | X_hat) of the empirical joint counts[y, x_hat], base q."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    p = c / total
    return float(entropy(p, q) - entropy(p.sum(axis=0), q))


def half_width(values: npt.ArrayLike, confidence: float = DEFAULT_CONFIDENCE) -> float:
    """Normal-approximation confidence half-width of the mean of ``values``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    z = float(norm.ppf(0.5 + confidence / 2.0))
    return z * float(np.std(arr, ddof=1)) / math.sqrt(arr.size)


def run_trials(
    spec: PolarSpec,
    d: DistortionMetric,
    policy: FrozenPolicy | str = FrozenPolicy.UNIFORM,
    trials: int = 1000,
    seed: int = 0,
    frozen_values: Sequence[int] | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
    threads: int | None = None,
    spec_reference: str | None = None,
) -> tuple[ExperimentReport, list[TrialRecord]]:
    """Encode and decode ``trials`` independent source blocks.

    Trial t draws its source block, frozen values and encoder uniforms from the stream
    SeedSequence([seed, t]); batching and thread count do not change the results.
    """
    policy = FrozenPolicy(policy)
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if not 0.0 < confidence < 1.0:
        raise ConfigError(f"confidence must lie in (0, 1), got {confidence}")
    if policy is FrozenPolicy.FIXED and frozen_values is None:
        raise ConfigError("The fixed frozen policy needs frozen_values")
    fixed = _frozen_array(spec, frozen_values if frozen_values is not None else spec.frozen_values)

    per_batch = max(1, BATCH_FLOAT_BUDGET // (2 * spec.n * spec.q))
    batches = [range(s, min(s + per_batch, trials)) for s in range(0, trials, per_batch)]
    workers = max(1, min(threads or os.cpu_count() or 1, len(batches)))
    logger.info(
        "Running %d trials at n=%d in %d batches on %d threads (frozen policy %s)",
        trials, spec.n, len(batches), workers, policy.value,
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(lambda b: _trial_batch(spec, d, policy, fixed, seed, list(b)), batches)
        )

    records = [r for res in results for r in res.records]
    counts = np.sum([res.counts for res in results], axis=0)
    distortions = np.array([r.distortion for r in records])
    errors = np.array([r.decode_mismatch for r in records], dtype=np.float64)
    p_err = float(errors.mean())
    z = float(norm.ppf(0.5 + confidence / 2.0))
    op = target_point(spec.source, spec.channel, d)
    report = ExperimentReport(
        n=spec.n,
        q=spec.q,
        rate=spec.rate,
        info_size=len(spec.info),
        frozen_size=len(spec.frozen),
        computable_size=len(spec.computable),
        trials=trials,
        seed=seed,
        frozen_policy=policy.value,
        confidence=confidence,
        mean_distortion=math.fsum(distortions) / trials,
        distortion_half_width=half_width(distortions, confidence),
        error_rate=p_err,
        error_half_width=z * math.sqrt(p_err * (1.0 - p_err) / trials),
        error_bound=math.fsum(float(spec.z_marg[i]) for i in spec.computable),
        equivocation_proxy=empirical_equivocation(counts, spec.q),
        target=OperatingPointModel(R_star=op.R_star, D_star=op.D_star, Delta_star=op.Delta_star),
        spec_reference=spec_reference,
    )
    logger.info(
        "D_n=%.5f +- %.5f, P_e=%.5f, proxy equivocation=%.5f",
        report.mean_distortion, report.distortion_half_width, report.error_rate,
        report.equivocation_proxy,
    )
    return report, records
