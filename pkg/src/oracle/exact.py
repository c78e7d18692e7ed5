"""Exact small-n evaluation of the target law, the encoder-induced law and every bound on them.

Sequences are enumerated in lexicographic order (first letter slowest), so an array over
all u^n reshapes to (q,) * n and prefixes are contiguous blocks. Laws are stored as
``probs[x_index, y_index, u_index]``; x_hat^n is the deterministic function
polar_transform(u^n) and is never enumerated separately.

The encoder law factors per index: P(u_i | u^{i-1}, x, y) on I, P(u_i | u^{i-1}) on D and
the frozen weight on F. Those factors come from the SC recursion and are checked against
direct marginalization of the enumerated target law; a mismatch raises
``OracleDisagreementError``.
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt

from src.errors import ConfigError, GuardError, ImpossiblePathError, OracleDisagreementError
from src.gfq.transform import all_vectors, log2_length, polar_transform
from src.models.reports import (
    CheckResult,
    DistortionBreakdown,
    EquivocationBreakdown,
    OperatingPointModel,
    OracleReport,
)
from src.polar.codec import Message, decode
from src.polar.construction import (
    FloatArray,
    IntArray,
    PolarSpec,
    bhattacharyya,
    conditional_table,
    marginal_leaves,
)
from src.source.entropy import entropy
from src.source.model import DistortionMetric, ForwardChannel, JointSource, target_point

logger = logging.getLogger(__name__)

SUPPORT_LIMIT = 10**8
RECURSION_TOLERANCE = 1e-10
MASS_TOLERANCE = 1e-10
# floats per chunk of the enumeration
CHUNK_BUDGET = 1 << 22


class FrozenMode(str, Enum):
    """Frozen symbols averaged uniformly, or fixed to one vector."""

    UNIFORM = "uniform"
    FIXED = "fixed"


def check_support(nx: int, ny: int, q: int, n: int, limit: int = SUPPORT_LIMIT) -> int:
    """Return the support size (|X||Y|q)^n, raising GuardError above ``limit``."""
    size = (nx * ny * q) ** n
    if size > limit:
        raise GuardError(
            f"Exact enumeration needs (|X||Y|q)^n = ({nx}*{ny}*{q})^{n} = {size:.3g} entries, "
            + f"limit is {limit:.3g}"
        )
    return size


def _map_chunks[T](
    func: Callable[[range], T], total: int, size: int, threads: int | None
) -> list[T]:
    chunks = [range(s, min(s + size, total)) for s in range(0, total, size)]
    workers = max(1, min(threads or os.cpu_count() or 1, len(chunks)))
    if workers == 1:
        return [func(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, chunks))


@dataclass(frozen=True)
class ExactDistribution:
    """A law over (x^n, y^n, u^n) stored densely as probs[x, y, u]."""

    source: JointSource
    channel: ForwardChannel
    n: int
    x: IntArray
    y: IntArray
    u: IntArray
    probs: FloatArray

    @property
    def q(self) -> int:
        return self.channel.q

    @property
    def x_hat(self) -> IntArray:
        return polar_transform(self.u, self.q)

    @property
    def total(self) -> float:
        return float(np.sum(self.probs))

    def flat(self) -> FloatArray:
        """View as (x*y pairs, u)."""
        return self.probs.reshape(-1, self.u.shape[0])

    def marginal_u(self) -> FloatArray:
        return self.probs.sum(axis=(0, 1))

    def marginal_xy(self) -> FloatArray:
        return self.probs.sum(axis=2)


def enumerate_joint(
    src: JointSource,
    ch: ForwardChannel,
    n: int,
    limit: int = SUPPORT_LIMIT,
    threads: int | None = None,
) -> ExactDistribution:
    """The target law P(x^n, y^n, u^n) = prod_j Q(x_j, y_j) P(x_hat_j | x_j, y_j).

    Raises:
        GuardError: If the support exceeds ``limit``
    """
    _ = log2_length(n)
    _ = check_support(src.nx, src.ny, ch.q, n, limit)
    joint = ch.joint(src)
    xs = all_vectors(src.nx, n)
    ys = all_vectors(src.ny, n)
    us = all_vectors(ch.q, n)
    x_hat = polar_transform(us, ch.q)
    per_x = ys.shape[0] * us.shape[0] * n

    def chunk(rows: range) -> FloatArray:
        letters = joint[
            xs[rows.start : rows.stop, None, None, :], ys[None, :, None, :], x_hat[None, None, :, :]
        ]
        return np.prod(letters, axis=-1)

    parts = _map_chunks(chunk, xs.shape[0], max(1, CHUNK_BUDGET // per_x), threads)
    probs = np.concatenate(parts, axis=0)
    logger.debug("Enumerated %d support points at n=%d", probs.size, n)
    return ExactDistribution(source=src, channel=ch, n=n, x=xs, y=ys, u=us, probs=probs)


def _prefix_index(u: IntArray, q: int, i: int) -> IntArray:
    """Lexicographic index of u^{i-1} (the first i symbols) for every row of ``u``."""
    weights = q ** np.arange(i - 1, -1, -1, dtype=np.int64)
    return u[..., :i] @ weights if i else np.zeros(u.shape[:-1], dtype=np.int64)


def prefix_conditionals(weights_over_u: npt.ArrayLike, q: int, u: npt.ArrayLike) -> FloatArray:
    """P(u_i | u^{i-1}) for every i along path(s) ``u`` by direct marginalization.

    ``weights_over_u`` has shape (..., q^n) over all u^n in lexicographic order. Returns
    (..., m, n, q) for ``u`` of shape (m, n); rows of zero-probability prefixes are zero.
    """
    w = np.asarray(weights_over_u, dtype=np.float64)
    path = np.atleast_2d(np.asarray(u, dtype=np.int64))
    n = path.shape[-1]
    batch = w.shape[:-1]
    rows: list[FloatArray] = []
    for i in range(n):
        block = w.reshape(*batch, q**i, q, q ** (n - i - 1)).sum(axis=-1)
        totals = block.sum(axis=-1, keepdims=True)
        cond = block / np.where(totals > 0.0, totals, 1.0)
        rows.append(cond[..., _prefix_index(path, q, i), :])
    return np.stack(rows, axis=-2)


def brute_conditionals(leaf_weights: npt.ArrayLike, u: npt.ArrayLike) -> FloatArray:
    """Per-realization conditionals from the full q^n tensor prod_j V_j(x_hat_j(u)).

    Independent of the SC recursion; returns (n, q) for a single path ``u``.
    """
    leaves = np.asarray(leaf_weights, dtype=np.float64)
    n, q = leaves.shape[-2], leaves.shape[-1]
    x_hat = polar_transform(all_vectors(q, n), q)
    tensor = np.prod(leaves[np.arange(n), x_hat], axis=-1)
    return prefix_conditionals(tensor, q, u)[0]


@dataclass(frozen=True)
class IndexStatistics:
    """Exact per-index quantities of the target law, base q."""

    z_cond: FloatArray
    z_marg: FloatArray
    h_cond: FloatArray
    h_marg: FloatArray

    @property
    def mutual_information(self) -> FloatArray:
        """I(U_i; X^n Y^n | U^{i-1})."""
        return np.maximum(self.h_marg - self.h_cond, 0.0)


def index_statistics(dist: ExactDistribution) -> IndexStatistics:
    """Z(U_i | U^{i-1}, X^n, Y^n), Z(U_i | U^{i-1}) and the matching conditional entropies."""
    q, n = dist.q, dist.n
    flat = dist.flat()
    z_cond, z_marg, h_cond, h_marg = (np.zeros(n) for _ in range(4))
    for i in range(n):
        block = flat.reshape(flat.shape[0], q**i, q, q ** (n - i - 1)).sum(axis=-1)
        z_cond[i] = bhattacharyya(np.moveaxis(block, -1, 0))
        h_cond[i] = float(entropy(block, q) - entropy(block.sum(axis=-1), q))
        marg = block.sum(axis=0)
        z_marg[i] = bhattacharyya(marg.T)
        h_marg[i] = float(entropy(marg, q) - entropy(marg.sum(axis=-1), q))
    return IndexStatistics(z_cond=z_cond, z_marg=z_marg, h_cond=h_cond, h_marg=h_marg)


def exact_bhattacharyya(
    src: JointSource, ch: ForwardChannel, n: int, limit: int = SUPPORT_LIMIT
) -> tuple[FloatArray, FloatArray]:
    """Exact (Z_cond, Z_marg) for every index."""
    stats = index_statistics(enumerate_joint(src, ch, n, limit))
    return np.clip(stats.z_cond, 0.0, 1.0), np.clip(stats.z_marg, 0.0, 1.0)


def _conditional_entropy_grouped(
    table: FloatArray, groups: IntArray, num_groups: int, q: int
) -> float:
    """H(Y | G) for table[y, u] with the u columns merged into groups G(u)."""
    merged = np.zeros((num_groups, table.shape[0]))
    np.add.at(merged, groups, table.T)
    return float(entropy(merged, q) - entropy(merged.sum(axis=1), q))


def _ck_bound(theta: float, support: int, q: int) -> float | None:
    """-theta log(theta / |support|) in base q, defined for theta <= 1/2."""
    if theta > 0.5:
        return None
    if theta <= 0.0:
        return 0.0
    return -theta * math.log(theta / support) / math.log(q)


@dataclass(frozen=True)
class _Factors:
    # Q^n times the I and D factors, shape (pairs, u)
    base: FloatArray
    # first index in I or D whose conditional row is undefined (n when none)
    first_undefined: IntArray
    # mass of the I and D factors before that index
    prefix_mass: FloatArray
    max_disagreement: float


class ExactOracle:
    """Exact laws and metrics of one spec under every frozen mode.

    The target law, the encoder factors and the decoder output for every u^n are computed
    once; per-mode quantities reuse them.
    """

    def __init__(
        self,
        spec: PolarSpec,
        d: DistortionMetric,
        limit: int = SUPPORT_LIMIT,
        threads: int | None = None,
    ):
        self.spec = spec
        self.d = d
        self.threads = threads
        self.target = target_point(spec.source, spec.channel, d)
        self.dist = enumerate_joint(spec.source, spec.channel, spec.n, limit, threads)
        self.stats = index_statistics(self.dist)
        self._factors = self._encoder_factors()
        if self._factors.max_disagreement > RECURSION_TOLERANCE:
            raise OracleDisagreementError(
                "SC recursion disagrees with enumeration by "
                + f"{self._factors.max_disagreement:.3g} > {RECURSION_TOLERANCE}"
            )
        us = self.dist.u
        u_hat, x_hat_dec = decode(
            spec, Message(u_info=us[:, list(spec.info)]), us[:, list(spec.frozen)]
        )
        self.u_hat = u_hat
        self.errors = np.any(u_hat != us, axis=1)
        self._column_sums(x_hat_dec)

    @property
    def max_disagreement(self) -> float:
        """Largest |recursion - enumeration| over every conditional on the support."""
        return self._factors.max_disagreement

    def _encoder_factors(self) -> _Factors:
        spec, dist = self.spec, self.dist
        q, n = spec.q, spec.n
        us = dist.u
        ny = dist.y.shape[0]
        flat = dist.flat()
        q_n = np.prod(spec.source.pmf[dist.x[:, None, :], dist.y[None, :, :]], axis=-1).ravel()
        roles = np.zeros(n, dtype=np.int64)
        roles[list(spec.info)] = 1
        roles[list(spec.computable)] = 2

        marg_leaves = marginal_leaves(spec.source, spec.channel, n)
        marg_table = conditional_table(marg_leaves, us, strict=False)
        marg_brute = prefix_conditionals(flat.sum(axis=0), q, us)
        marg_support = marg_brute.sum(axis=-1, keepdims=True) > 0.0
        marg_diff = float(np.max(np.abs(np.where(marg_support, marg_table - marg_brute, 0.0))))
        marg_at = np.take_along_axis(marg_table, us[..., None], axis=-1)[..., 0]
        marg_defined = marg_table.sum(axis=-1) > 0.0

        def chunk(rows: range) -> tuple[FloatArray, IntArray, FloatArray, float]:
            pairs = np.arange(rows.start, rows.stop)
            x, y = dist.x[pairs // ny], dist.y[pairs % ny]
            leaves = spec.channel.conditional[x, y][:, None, :, :]
            table = conditional_table(leaves, us[None, :, :], strict=False)
            brute = prefix_conditionals(flat[pairs], q, us)
            support = brute.sum(axis=-1, keepdims=True) > 0.0
            diff = float(np.max(np.abs(np.where(support, table - brute, 0.0)), initial=0.0))
            index = np.broadcast_to(us[None, :, :, None], (*table.shape[:-1], 1))
            cond_at = np.take_along_axis(table, index, axis=-1)[..., 0]
            cond_defined = table.sum(axis=-1) > 0.0

            mass = np.broadcast_to(q_n[pairs][:, None], (len(pairs), us.shape[0])).copy()
            first = np.full(mass.shape, n, dtype=np.int64)
            prefix = np.zeros(mass.shape)
            for i in range(n):
                if roles[i] == 0:
                    continue
                defined = cond_defined[..., i] if roles[i] == 1 else marg_defined[None, :, i]
                fresh = (first == n) & ~defined
                first = np.where(fresh, i, first)
                prefix = np.where(fresh, mass, prefix)
                mass = mass * (cond_at[..., i] if roles[i] == 1 else marg_at[None, :, i])
            return mass, first, prefix, diff

        per_row = us.shape[0] * n * q * 4
        parts = _map_chunks(chunk, flat.shape[0], max(1, CHUNK_BUDGET // per_row), self.threads)
        return _Factors(
            base=np.concatenate([p[0] for p in parts]),
            first_undefined=np.concatenate([p[1] for p in parts]),
            prefix_mass=np.concatenate([p[2] for p in parts]),
            max_disagreement=max([marg_diff, *(p[3] for p in parts)]),
        )

    def _column_sums(self, x_hat_dec: IntArray) -> None:
        """Per-u sums over (x, y) of the encoder mass and its distortion weights."""
        ny = self.dist.y.shape[0]
        base = self._factors.base.reshape(-1, ny, self.dist.u.shape[0])
        base_x = base.sum(axis=1)
        self.base_y = base.sum(axis=0)
        self.mass_u = base_x.sum(axis=0)
        d_enc = self.d.matrix[self.dist.x[:, None, :], self.dist.x_hat[None, :, :]].mean(axis=-1)
        d_dec = self.d.matrix[self.dist.x[:, None, :], x_hat_dec[None, :, :]].mean(axis=-1)
        self.enc_distortion_u = (base_x * d_enc).sum(axis=0)
        self.dec_distortion_u = (base_x * d_dec).sum(axis=0)
        self.target_y = self.dist.probs.sum(axis=0)

    def frozen_weights(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> FloatArray:
        """Weight of every u^n contributed by the frozen positions; raises on impossible paths."""
        mode = FrozenMode(mode)
        spec = self.spec
        frozen = list(spec.frozen)
        us = self.dist.u
        if mode is FrozenMode.UNIFORM:
            weights = np.full(us.shape[0], float(spec.q) ** -len(frozen))
            reach = [weights > 0.0] * (spec.n + 1)
        else:
            values = np.asarray(
                spec.frozen_values if frozen_values is None else frozen_values, dtype=np.int64
            )
            if values.shape != (len(frozen),):
                raise ConfigError(f"Expected {len(frozen)} frozen values, got {values.tolist()}")
            match = us[:, frozen] == values[None, :]
            weights = np.all(match, axis=1).astype(np.float64)
            reach = [
                np.all(match[:, [k for k, f in enumerate(frozen) if f < i]], axis=1)
                for i in range(spec.n + 1)
            ]
        first, prefix = self._factors.first_undefined, self._factors.prefix_mass
        for i in range(spec.n):
            hit = (first == i) & (prefix > 0.0) & reach[i][None, :]
            if np.any(hit):
                raise ImpossiblePathError(
                    f"Encoder reaches an undefined conditional at index {i} with positive mass",
                    index=i,
                )
        return weights

    def pe(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> ExactDistribution:
        """The encoder-induced law under the given frozen mode."""
        weights = self.frozen_weights(mode, frozen_values)
        probs = (self._factors.base * weights[None, :]).reshape(self.dist.probs.shape)
        law = ExactDistribution(
            source=self.dist.source,
            channel=self.dist.channel,
            n=self.dist.n,
            x=self.dist.x,
            y=self.dist.y,
            u=self.dist.u,
            probs=probs,
        )
        if abs(law.total - 1.0) > MASS_TOLERANCE:
            raise OracleDisagreementError(f"Encoder law has total mass {law.total:.12g}")
        return law

    def variational_distance(self) -> tuple[float, float]:
        """(sum |P - P_e|, bound) with P_e in the uniform frozen mode.

        The bound adds one Pinsker term per frozen index, sqrt(2 ln q (1 - H(U_i | ...))),
        and one per computable index, sqrt(2 ln q I(U_i; X^n Y^n | U^{i-1})).
        """
        law = self.pe(FrozenMode.UNIFORM)
        distance = float(np.sum(np.abs(self.dist.probs - law.probs)))
        return distance, self.variational_bound()

    def variational_bound(self) -> float:
        spec, stats = self.spec, self.stats
        scale = 2.0 * math.log(spec.q)
        frozen_terms = [math.sqrt(scale * max(1.0 - stats.h_cond[i], 0.0)) for i in spec.frozen]
        computable_terms = [
            math.sqrt(scale * float(stats.mutual_information[i])) for i in spec.computable
        ]
        return math.fsum(frozen_terms) + math.fsum(computable_terms)

    def error_probability(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> float:
        weights = self.frozen_weights(mode, frozen_values)
        return math.fsum(weights * self.mass_u * self.errors)

    def error_bound(self) -> float:
        """Sum of exact Z(U_i | U^{i-1}) over the computable set."""
        return math.fsum(float(self.stats.z_marg[i]) for i in self.spec.computable)

    def distortion(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> DistortionBreakdown:
        """Per-letter distortion under the encoder law and after decoding."""
        weights = self.frozen_weights(mode, frozen_values)
        enc = math.fsum(weights * self.enc_distortion_u)
        dec = math.fsum(weights * self.dec_distortion_u)
        p_err = math.fsum(weights * self.mass_u * self.errors)
        dec_err = math.fsum(weights * self.dec_distortion_u * self.errors)
        dec_ok = dec - dec_err
        given_ok = dec_ok / (1.0 - p_err) if p_err < 1.0 else None
        given_err = dec_err / p_err if p_err > 0.0 else None
        recombined = (given_ok or 0.0) * (1.0 - p_err) + (given_err or 0.0) * p_err
        return DistortionBreakdown(
            encoder_distortion=enc,
            decoder_distortion=dec,
            error_probability=p_err,
            distortion_given_correct=given_ok,
            distortion_given_error=given_err,
            error_bound=self.error_bound(),
            identity_residual=abs(dec - recombined),
        )

    def equivocation(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> EquivocationBreakdown:
        """Delta_n = H(Y^n | U_I, U_F) / n under the encoder law, with the X_hat chain terms."""
        spec, q, n = self.spec, self.spec.q, self.spec.n
        weights = self.frozen_weights(mode, frozen_values)
        pe_y = self.base_y * weights[None, :]
        kept = sorted((*spec.info, *spec.frozen))
        groups = (
            self.dist.u[:, kept] @ (q ** np.arange(len(kept) - 1, -1, -1, dtype=np.int64))
            if kept
            else np.zeros(self.dist.u.shape[0], dtype=np.int64)
        )
        equivocation = _conditional_entropy_grouped(pe_y, groups, q ** len(kept), q) / n
        h_joint_p, h_joint_e = float(entropy(self.target_y, q)), float(entropy(pe_y, q))
        h_marg_p = float(entropy(self.target_y.sum(axis=0), q))
        h_marg_e = float(entropy(pe_y.sum(axis=0), q))
        return EquivocationBreakdown(
            equivocation=equivocation,
            encoder_conditional_entropy=(h_joint_e - h_marg_e) / n,
            target_conditional_entropy=(h_joint_p - h_marg_p) / n,
            joint_entropy_gap=abs(h_joint_p - h_joint_e),
            marginal_entropy_gap=abs(h_marg_p - h_marg_e),
        )

    def frozen_metrics(self, frozen_values: Sequence[int]) -> tuple[float, float]:
        """(D_n, Delta_n) with the frozen symbols fixed to ``frozen_values``."""
        dist = self.distortion(FrozenMode.FIXED, frozen_values)
        equiv = self.equivocation(FrozenMode.FIXED, frozen_values)
        return dist.decoder_distortion, equiv.equivocation

    def report(
        self, mode: FrozenMode | str, frozen_values: Sequence[int] | None = None
    ) -> OracleReport:
        """All exact quantities and inequality checks for one frozen mode."""
        mode = FrozenMode(mode)
        spec, q, n = self.spec, self.spec.q, self.spec.n
        ny = self.dist.y.shape[0]
        law = self.pe(mode, frozen_values)
        distance_mode = float(np.sum(np.abs(self.dist.probs - law.probs)))
        distance, bound = self.variational_distance()
        dist = self.distortion(mode, frozen_values)
        equiv = self.equivocation(mode, frozen_values)
        d_max = float(self.d.d_max or 0.0)
        d_star = self.target.D_star

        pe_y = self.base_y * self.frozen_weights(mode, frozen_values)[None, :]
        theta_joint = float(np.sum(np.abs(self.target_y - pe_y)))
        theta_marg = math.fsum(np.abs(self.target_y.sum(axis=0) - pe_y.sum(axis=0)))
        ck_joint = _ck_bound(theta_joint, ny * q**n, q)
        ck_marg = _ck_bound(theta_marg, q**n, q)
        h_gap = abs(equiv.target_conditional_entropy - equiv.encoder_conditional_entropy) * n

        checks = [
            CheckResult(
                name="recursion_matches_enumeration",
                lhs=self.max_disagreement,
                rhs=RECURSION_TOLERANCE,
                passed=self.max_disagreement <= RECURSION_TOLERANCE,
            ),
            CheckResult(
                name="error_probability_bound",
                lhs=dist.error_probability,
                rhs=dist.error_bound,
                passed=dist.error_probability <= dist.error_bound + 1e-12,
            ),
            CheckResult(
                name="variational_distance_bound",
                lhs=distance,
                rhs=bound,
                passed=distance <= bound + 1e-12,
            ),
            CheckResult(
                name="total_expectation_identity",
                lhs=dist.identity_residual,
                rhs=1e-12,
                passed=dist.identity_residual <= 1e-12,
            ),
            CheckResult(
                name="distortion_decomposition",
                lhs=dist.decoder_distortion,
                rhs=d_star + d_max * (dist.error_probability + distance_mode),
                passed=dist.decoder_distortion
                <= d_star + d_max * (dist.error_probability + distance_mode) + 1e-12,
            ),
            CheckResult(
                name="distortion_decomposition_per_block_scaling",
                lhs=dist.decoder_distortion,
                rhs=d_star + d_max / n * (dist.error_probability + distance_mode),
                passed=dist.decoder_distortion
                <= d_star + d_max / n * (dist.error_probability + distance_mode) + 1e-12,
                asserted=False,
            ),
            CheckResult(
                name="equivocation_exceeds_reconstruction_conditional",
                lhs=equiv.encoder_conditional_entropy,
                rhs=equiv.equivocation,
                passed=equiv.encoder_conditional_entropy <= equiv.equivocation + 1e-12,
            ),
            CheckResult(
                name="entropy_triangle",
                lhs=h_gap,
                rhs=equiv.joint_entropy_gap + equiv.marginal_entropy_gap,
                passed=h_gap <= equiv.joint_entropy_gap + equiv.marginal_entropy_gap + 1e-12,
            ),
            CheckResult(
                name="entropy_continuity_joint",
                lhs=equiv.joint_entropy_gap,
                rhs=ck_joint if ck_joint is not None else math.inf,
                passed=None if ck_joint is None else equiv.joint_entropy_gap <= ck_joint + 1e-12,
            ),
            CheckResult(
                name="entropy_continuity_marginal",
                lhs=equiv.marginal_entropy_gap,
                rhs=ck_marg if ck_marg is not None else math.inf,
                passed=None if ck_marg is None else equiv.marginal_entropy_gap <= ck_marg + 1e-12,
            ),
        ]
        report = OracleReport(
            n=n,
            q=q,
            frozen_mode=mode.value,
            frozen=list(spec.frozen),
            computable=list(spec.computable),
            target=OperatingPointModel(
                R_star=self.target.R_star,
                D_star=self.target.D_star,
                Delta_star=self.target.Delta_star,
            ),
            variational_distance=distance,
            variational_bound=bound,
            distortion=dist,
            equivocation=equiv,
            checks=checks,
        )
        for check in checks:
            if check.asserted and check.passed is False:
                logger.warning("Oracle check %s failed: %g > %g", check.name, check.lhs, check.rhs)
        return report


def exact_pe(
    spec: PolarSpec,
    mode: FrozenMode | str = FrozenMode.UNIFORM,
    frozen_values: Sequence[int] | None = None,
    d: DistortionMetric | None = None,
) -> ExactDistribution:
    """Exact encoder-induced law P_e."""
    metric = d or DistortionMetric.hamming(spec.source.nx, spec.q)
    return ExactOracle(spec, metric).pe(mode, frozen_values)


def exact_variational_distance(
    spec: PolarSpec, d: DistortionMetric | None = None
) -> tuple[float, float]:
    """(exact sum |P - P_e|, Pinsker chain bound) in the uniform frozen mode."""
    metric = d or DistortionMetric.hamming(spec.source.nx, spec.q)
    return ExactOracle(spec, metric).variational_distance()


def exact_equivocation(
    spec: PolarSpec,
    mode: FrozenMode | str = FrozenMode.UNIFORM,
    frozen_values: Sequence[int] | None = None,
    d: DistortionMetric | None = None,
) -> float:
    """Exact Delta_n in base-q units per letter."""
    metric = d or DistortionMetric.hamming(spec.source.nx, spec.q)
    return ExactOracle(spec, metric).equivocation(mode, frozen_values).equivocation


def exact_distortion(
    spec: PolarSpec,
    d: DistortionMetric,
    mode: FrozenMode | str = FrozenMode.UNIFORM,
    frozen_values: Sequence[int] | None = None,
) -> tuple[float, float, float]:
    """(E_{P_d}[d]/n, P_e, sum of exact Z(U_i | U^{i-1}) over D)."""
    breakdown = ExactOracle(spec, d).distortion(mode, frozen_values)
    return breakdown.decoder_distortion, breakdown.error_probability, breakdown.error_bound


def exact_frozen_metrics(
    spec: PolarSpec, d: DistortionMetric, frozen_values: Sequence[int]
) -> tuple[float, float]:
    """(D_n(u_F), Delta_n(u_F)) for one fixed frozen vector."""
    return ExactOracle(spec, d).frozen_metrics(frozen_values)
