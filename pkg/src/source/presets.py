"""Registry of named sources and their canonical boundary test channels."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from src.errors import ConfigError
from src.source.model import DistortionMetric, ForwardChannel, JointSource


@dataclass(frozen=True)
class Preset:
    """A named source together with a test channel attaining a region boundary point."""

    name: str
    source: JointSource
    channel: ForwardChannel

    def hamming(self) -> DistortionMetric:
        return DistortionMetric.hamming(self.source.nx, self.channel.q)


def _check_probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"Parameter '{name}' must lie in [0, 1], got {value}")
    return value


def dsbs(p: float = 0.1, crossover: float = 0.11) -> Preset:
    """Doubly symmetric binary source: X uniform, Y = X xor Bern(p).

    The test channel is X_hat = X xor Bern(crossover), independent of Y given X.
    """
    p = _check_probability("p", p)
    c = _check_probability("crossover", crossover)
    pmf = 0.5 * np.array([[1.0 - p, p], [p, 1.0 - p]])
    flip = np.array([[1.0 - c, c], [c, 1.0 - c]])
    cond = np.repeat(flip[:, None, :], 2, axis=1)
    return Preset(name=f"dsbs({p:g})", source=JointSource(pmf), channel=ForwardChannel(cond))


def zchannel(
    a: float = 0.3, px: float = 0.5, flip0: float = 0.05, flip1: float = 0.1
) -> Preset:
    """Binary source whose Y is X passed through a Z-channel (1 -> 0 with probability a).

    The test channel reconstructs X with asymmetric flip probabilities ``flip0``
    (for x = 0) and ``flip1`` (for x = 1).
    """
    a = _check_probability("a", a)
    px = _check_probability("px", px)
    f0 = _check_probability("flip0", flip0)
    f1 = _check_probability("flip1", flip1)
    pmf = np.array([[1.0 - px, 0.0], [px * a, px * (1.0 - a)]])
    cond = np.array(
        [
            [[1.0 - f0, f0], [1.0 - f0, f0]],
            [[f1, 1.0 - f1], [f1, 1.0 - f1]],
        ]
    )
    return Preset(
        name=f"zchannel({a:g})", source=JointSource(pmf), channel=ForwardChannel(cond)
    )


def uniform(q: int = 3, flip: float = 0.1) -> Preset:
    """Uniform X over q symbols with Y = X, reconstructed through a q-ary symmetric channel."""
    q = int(q)
    flip = _check_probability("flip", flip)
    pmf = np.eye(q) / q
    sym = np.full((q, q), flip / (q - 1)) if q > 1 else np.ones((1, 1))
    np.fill_diagonal(sym, 1.0 - flip)
    cond = np.repeat(sym[:, None, :], q, axis=1)
    return Preset(name=f"uniform({q})", source=JointSource(pmf), channel=ForwardChannel(cond))


_PRESET_REGISTRY_DICT: dict[str, Callable[..., Preset]] = {
    "dsbs": dsbs,
    "zchannel": zchannel,
    "uniform": uniform,
}

PRESET_REGISTRY: MappingProxyType[str, Callable[..., Preset]] = MappingProxyType(
    _PRESET_REGISTRY_DICT
)


def get_preset(name: str, **params: float) -> Preset:
    """Build a preset by name with validation.

    Raises:
        ConfigError: If the name is unknown or a parameter is invalid
    """
    if name not in PRESET_REGISTRY:
        available = ", ".join(PRESET_REGISTRY.keys())
        raise ConfigError(f"Unknown source preset '{name}'. Available presets: {available}")
    try:
        return PRESET_REGISTRY[name](**params)
    except TypeError as e:
        raise ConfigError(f"Invalid parameters for preset '{name}': {e}") from e


def get_available_presets() -> list[str]:
    """Get list of all registered preset names."""
    return list(PRESET_REGISTRY.keys())
