"""Joint source, distortion metric, test channel and the analytic operating point.

Index conventions used throughout the package:

- ``JointSource.pmf[x, y]`` is Q(x, y).
- ``DistortionMetric.matrix[x, x_hat]`` is d(x, x_hat).
- ``ForwardChannel.conditional[x, y, x_hat]`` is P(x_hat | x, y).
- ``ReverseChannel.w[x, y, x_hat]`` is W(x, y | x_hat).

Entropies are reported in base-q units where q is the reconstruction alphabet size.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from src.errors import ConfigError, DegenerateSupportError
from src.gfq.transform import PrimeModulus
from src.source.entropy import FloatArray, entropy

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12


def _normalized(values: npt.ArrayLike, name: str, axis: int | None = None) -> FloatArray:
    """Validate a pmf (or a stack of conditional pmfs along ``axis``).

    Entries must be nonnegative; sums within tolerance of 1 are renormalized, anything
    further away is rejected.
    """
    arr = np.array(values, dtype=np.float64)
    if arr.size == 0:
        raise ConfigError(f"{name} must not be empty")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError(f"{name} must have finite nonnegative entries")
    sums = arr.sum(axis=axis, keepdims=axis is not None)
    if np.any(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ConfigError(f"{name} must sum to 1 within {PROBABILITY_TOLERANCE}, off by {worst:.3g}")
    arr = arr / sums
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointSource:
    """Memoryless source pair (X, Y) with joint pmf Q(x, y)."""

    pmf: FloatArray

    def __post_init__(self) -> None:
        pmf = _normalized(self.pmf, "Joint source pmf")
        if pmf.ndim != 2:
            raise ConfigError(f"Joint source pmf must be a |X| x |Y| matrix, got shape {pmf.shape}")
        object.__setattr__(self, "pmf", pmf)

    @property
    def nx(self) -> int:
        return int(self.pmf.shape[0])

    @property
    def ny(self) -> int:
        return int(self.pmf.shape[1])

    def marginal_x(self) -> FloatArray:
        return self.pmf.sum(axis=1)

    def marginal_y(self) -> FloatArray:
        return self.pmf.sum(axis=0)

    def entropy_y(self, base: int) -> float:
        """H(Y)."""
        return float(entropy(self.marginal_y(), base))

    def entropy_y_given_x(self, base: int) -> float:
        """H(Y | X)."""
        return float(entropy(self.pmf, base) - entropy(self.marginal_x(), base))


@dataclass(frozen=True)
class DistortionMetric:
    """Bounded distortion d: X x X_hat -> [0, d_max]."""

    matrix: FloatArray
    d_max: float | None = None

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ConfigError(f"Distortion must be a |X| x q matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
            raise ConfigError("Distortion entries must be finite and nonnegative")
        d_max = float(matrix.max()) if self.d_max is None else float(self.d_max)
        if np.any(matrix > d_max):
            raise ConfigError(f"Distortion entries exceed d_max={d_max}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "d_max", d_max)

    @classmethod
    def hamming(cls, nx: int, q: int) -> DistortionMetric:
        """Hamming distortion 1{x != x_hat} on a |X| x q grid."""
        grid = np.arange(nx)[:, None] != np.arange(q)[None, :]
        return cls(matrix=grid.astype(np.float64), d_max=1.0)

    @property
    def q(self) -> int:
        return int(self.matrix.shape[1])

    def block(self, x: npt.ArrayLike, x_hat: npt.ArrayLike) -> FloatArray:
        """Per-letter average d(x^n, x_hat^n)/n along the last axis."""
        return np.mean(self.matrix[np.asarray(x), np.asarray(x_hat)], axis=-1)


@dataclass(frozen=True)
class ForwardChannel:
    """The test channel: conditional pmf P(x_hat | x, y) defining an operating point."""

    conditional: FloatArray

    def __post_init__(self) -> None:
        cond = np.asarray(self.conditional, dtype=np.float64)
        if cond.ndim != 3:
            raise ConfigError(
                f"Test channel must be a |X| x |Y| x q array, got shape {cond.shape}"
            )
        cond = _normalized(cond, "Test channel rows", axis=2)
        _ = PrimeModulus(int(cond.shape[2]))
        object.__setattr__(self, "conditional", cond)

    @property
    def q(self) -> int:
        return int(self.conditional.shape[2])

    def joint(self, src: JointSource) -> FloatArray:
        """P(x, y, x_hat) = Q(x, y) P(x_hat | x, y)."""
        check_dimensions(src, self)
        return src.pmf[:, :, None] * self.conditional

    def prior(self, src: JointSource) -> FloatArray:
        """Reconstruction prior P(x_hat)."""
        return self.joint(src).sum(axis=(0, 1))


class OperatingPoint(BaseModel):
    """(R*, D*, Delta*) in base-q units."""

    model_config = ConfigDict(frozen=True)

    R_star: float
    D_star: float
    Delta_star: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.R_star, self.D_star, self.Delta_star)


@dataclass(frozen=True)
class ReverseChannel:
    """Per-reconstruction test channel W(x, y | x_hat) with its prior P(x_hat).

    Columns of zero-prior symbols are all zero and listed in ``degenerate_symbols``.
    """

    w: FloatArray
    prior: FloatArray
    degenerate_symbols: tuple[int, ...] = ()

    @property
    def q(self) -> int:
        return int(self.prior.shape[0])

    def require_full_support(self) -> ReverseChannel:
        if self.degenerate_symbols:
            raise DegenerateSupportError(
                f"Reconstruction symbols {list(self.degenerate_symbols)} have zero prior",
                self.degenerate_symbols,
            )
        return self

    def joint(self) -> FloatArray:
        """Re-multiply with the prior: P(x, y, x_hat) = W(x, y | x_hat) P(x_hat)."""
        return self.w * self.prior[None, None, :]


def check_dimensions(
    src: JointSource, ch: ForwardChannel, d: DistortionMetric | None = None
) -> None:
    """Raise ConfigError when the source, channel and metric disagree on alphabet sizes."""
    if ch.conditional.shape[:2] != src.pmf.shape:
        raise ConfigError(
            f"Test channel is for |X| x |Y| = {ch.conditional.shape[:2]}, "
            + f"source is {src.pmf.shape}"
        )
    if d is not None and d.matrix.shape != (src.nx, ch.q):
        raise ConfigError(
            f"Distortion must be {src.nx} x {ch.q}, got {d.matrix.shape}"
        )


def target_point_batch(
    src: JointSource, conditionals: FloatArray, d: DistortionMetric
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Evaluate (R, D, Delta) for a stack of test channels of shape (..., |X|, |Y|, q)."""
    q = conditionals.shape[-1]
    joint = src.pmf[:, :, None] * conditionals
    prior = joint.sum(axis=(-3, -2))
    h_joint = entropy(joint, q, axis=(-3, -2, -1))
    h_prior = entropy(prior, q, axis=-1)
    h_source = float(entropy(src.pmf, q))
    rate = np.maximum(h_source + h_prior - h_joint, 0.0)
    distortion = np.einsum("...xyz,xz->...", joint, d.matrix)
    h_y_xhat = entropy(joint.sum(axis=-3), q, axis=(-2, -1))
    equivocation = h_y_xhat - h_prior
    return rate, distortion, equivocation


def target_point(src: JointSource, ch: ForwardChannel, d: DistortionMetric) -> OperatingPoint:
    """R* = I(XY; X_hat), D* = E d(X, X_hat), Delta* = H(Y | X_hat) for P = Q . P(x_hat|x,y)."""
    check_dimensions(src, ch, d)
    rate, distortion, equivocation = target_point_batch(src, ch.conditional, d)
    return OperatingPoint(
        R_star=float(rate), D_star=float(distortion), Delta_star=float(equivocation)
    )


def test_channel_from_joint(p_joint: npt.ArrayLike) -> ReverseChannel:
    """Split P(x, y, x_hat) into W(x, y | x_hat) and P(x_hat)."""
    joint = _normalized(p_joint, "Joint pmf P(x, y, x_hat)")
    if joint.ndim != 3:
        raise ConfigError(f"Joint pmf must have three axes (x, y, x_hat), got {joint.ndim}")
    prior = joint.sum(axis=(0, 1))
    degenerate = tuple(int(s) for s in np.flatnonzero(prior <= 0.0))
    if degenerate:
        logger.warning("Reconstruction symbols %s have zero prior", list(degenerate))
    safe = np.where(prior > 0.0, prior, 1.0)
    w = np.where(prior[None, None, :] > 0.0, joint / safe[None, None, :], 0.0)
    return ReverseChannel(w=w, prior=prior, degenerate_symbols=degenerate)


class SymmetryResult(BaseModel):
    """Outcome of the binary test-channel symmetry search."""

    model_config = ConfigDict(frozen=True)

    symmetric: bool
    permutation: tuple[int, ...] | None = None


def is_symmetric(w: ReverseChannel, tol: float = 1e-9) -> SymmetryResult:
    """Search for an involution pi of X x Y with W(x, y | 1) = W(pi(x, y) | 0).

    The permutation is returned over flattened (x, y) indices ``x * |Y| + y``.

    Raises:
        ConfigError: If the reconstruction alphabet is not binary
    """
    if w.q != 2:
        raise ConfigError(f"Symmetry is defined for binary reconstructions only, got q={w.q}")
    w0 = w.w[:, :, 0].ravel()
    w1 = w.w[:, :, 1].ravel()
    size = w0.size
    if not np.allclose(np.sort(w0), np.sort(w1), atol=tol, rtol=0.0):
        return SymmetryResult(symmetric=False)

    pi: list[int] = [-1] * size

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= tol

    def assign(z: int) -> bool:
        while z < size and pi[z] >= 0:
            z += 1
        if z == size:
            return True
        # pi(z) = v requires W(z|1) = W(v|0) and, being an involution, W(v|1) = W(z|0)
        for v in range(z, size):
            if pi[v] >= 0 or not close(w1[z], w0[v]) or not close(w1[v], w0[z]):
                continue
            pi[z], pi[v] = v, z
            if assign(z + 1):
                return True
            pi[z] = pi[v] = -1
        return False

    if assign(0):
        return SymmetryResult(symmetric=True, permutation=tuple(pi))
    return SymmetryResult(symmetric=False)


def sample_source(
    src: JointSource,
    n: int,
    rng: np.random.Generator | int | None,
    batch: int | None = None,
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Draw i.i.d. (x^n, y^n) from Q; shape (n,) or (batch, n)."""
    if n < 1:
        raise ConfigError(f"Sequence length must be >= 1, got {n}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    shape = (n,) if batch is None else (batch, n)
    flat = gen.choice(src.pmf.size, size=shape, p=src.pmf.ravel())
    x, y = np.divmod(flat, src.ny)
    return x.astype(np.int64), y.astype(np.int64)


def product_channel(src: JointSource, prior: npt.ArrayLike) -> ForwardChannel:
    """Test channel with X_hat independent of (X, Y) and distributed as ``prior``."""
    p = np.asarray(prior, dtype=np.float64)
    return ForwardChannel(np.broadcast_to(p, (src.nx, src.ny, p.size)).copy())


def deterministic_channel(
    src: JointSource, q: int, mapping: npt.ArrayLike
) -> ForwardChannel:
    """Test channel putting all mass on ``mapping[x, y]``."""
    table = np.asarray(mapping, dtype=np.int64)
    cond = np.zeros((src.nx, src.ny, q))
    for x, y in itertools.product(range(src.nx), range(src.ny)):
        cond[x, y, table[x, y]] = 1.0
    return ForwardChannel(cond)
