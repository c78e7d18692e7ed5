"""Entropy helpers in base-q units.

All terms are computed in nats with ``scipy.special.entr`` (0 log 0 := 0) and converted
once at the end by dividing by ln q.
"""

from __future__ import annotations

import math

import numpy as np
import numpy.typing as npt
from scipy.special import entr

type FloatArray = npt.NDArray[np.float64]


def entropy(p: npt.ArrayLike, base: int, axis: int | tuple[int, ...] | None = None) -> FloatArray:
    """Shannon entropy of the (unnormalized-safe) pmf ``p`` summed over ``axis``."""
    nats = np.sum(entr(np.asarray(p, dtype=np.float64)), axis=axis)
    return np.asarray(nats / math.log(base), dtype=np.float64)


def conditional_entropy(joint: npt.ArrayLike, given_axes: tuple[int, ...], base: int) -> float:
    """H(A | B) for a joint pmf whose ``given_axes`` index B and remaining axes index A."""
    p = np.asarray(joint, dtype=np.float64)
    other = tuple(a for a in range(p.ndim) if a not in given_axes)
    marginal = p.sum(axis=other) if other else p
    return float(entropy(p, base) - entropy(marginal, base))


def mutual_information(joint: npt.ArrayLike, a_axes: tuple[int, ...], base: int) -> float:
    """I(A; B) where ``a_axes`` index A and the remaining axes index B."""
    p = np.asarray(joint, dtype=np.float64)
    b_axes = tuple(a for a in range(p.ndim) if a not in a_axes)
    h_a = entropy(p.sum(axis=b_axes) if b_axes else p, base)
    h_b = entropy(p.sum(axis=a_axes), base)
    return float(h_a + h_b - entropy(p, base))


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return float(entropy([p, 1.0 - p], 2))
