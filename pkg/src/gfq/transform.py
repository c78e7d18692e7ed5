"""Arithmetic modulo a prime and the polarizing transform G_n = G^{(x)k} over GF(q).

Vectors are row vectors in natural (non bit-reversed) index order. The canonical
direction is ``x_hat = polar_transform(u) = u . G_n``; ``u`` is recovered with
``polar_inverse``. Both functions accept a batch of vectors along the leading axes.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

from src.errors import ConfigError

type SymbolArray = npt.NDArray[np.int64]


class PrimeModulus(BaseModel):
    """A prime alphabet size q."""

    model_config = ConfigDict(frozen=True)

    q: int

    def __init__(self, q: int) -> None:
        if not is_prime(q):
            raise ConfigError(f"Alphabet size must be a prime >= 2, got {q}")
        super().__init__(q=q)

    def __int__(self) -> int:
        return self.q


def is_prime(q: int) -> bool:
    """Trial-division primality test."""
    if q < 2:
        return False
    d = 2
    while d * d <= q:
        if q % d == 0:
            return False
        d += 1
    return True


def log2_length(n: int) -> int:
    """Return k for n = 2^k, raising ConfigError otherwise."""
    if n < 1 or n & (n - 1):
        raise ConfigError(f"Block length must be a power of two, got {n}")
    return n.bit_length() - 1


def as_symbols(u: npt.ArrayLike, q: PrimeModulus | int) -> SymbolArray:
    """Validate a (batch of) symbol vector(s) and return it as an int64 array.

    Raises:
        ConfigError: If the length is not a power of two or a symbol is outside [0, q-1]
    """
    q_int = int(q)
    arr = np.asarray(u, dtype=np.int64)
    if arr.ndim == 0:
        raise ConfigError("Symbol vector must have at least one dimension")
    _ = log2_length(arr.shape[-1])
    if arr.size and (arr.min() < 0 or arr.max() >= q_int):
        raise ConfigError(f"Symbols must lie in [0, {q_int - 1}]")
    return arr


def _butterfly(u: SymbolArray, q: int, sign: int) -> SymbolArray:
    n = u.shape[-1]
    v = u.copy()
    half = n // 2
    while half >= 1:
        blocks = v.reshape(*v.shape[:-1], n // (2 * half), 2, half)
        blocks[..., 0, :] = (blocks[..., 0, :] + sign * blocks[..., 1, :]) % q
        half //= 2
    return v


def polar_transform(u: npt.ArrayLike, q: PrimeModulus | int) -> SymbolArray:
    """Compute v = u . G_n mod q with the in-place butterfly (u1, u2) -> (u1 + u2, u2)."""
    q_int = int(q)
    return _butterfly(as_symbols(u, q_int), q_int, 1)


def polar_inverse(v: npt.ArrayLike, q: PrimeModulus | int) -> SymbolArray:
    """Invert ``polar_transform`` using (G^-1)^{(x)k} with G^-1 = [[1, 0], [q-1, 1]]."""
    q_int = int(q)
    return _butterfly(as_symbols(v, q_int), q_int, -1)


@lru_cache(maxsize=32)
def kronecker_matrix(n: int, q: int) -> SymbolArray:
    """Dense n x n matrix G^{(x)k} mod q, built by explicit Kronecker expansion."""
    k = log2_length(n)
    kernel = np.array([[1, 0], [1, 1]], dtype=np.int64)
    g = np.ones((1, 1), dtype=np.int64)
    for _ in range(k):
        g = np.kron(g, kernel) % q
    g.setflags(write=False)
    return g


def all_vectors(q: int, n: int) -> SymbolArray:
    """Every length-n vector over {0..q-1} in lexicographic order (first symbol slowest)."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.indices((q,) * n, dtype=np.int64)
    return grids.reshape(n, -1).T.copy()
