"""Error hierarchy shared by the library and the CLI.

Every error carries a machine-readable ``category`` and the CLI exit code it maps to.
"""

from __future__ import annotations

from collections.abc import Sequence


class PrivPolarError(Exception):
    """Base class for all privpolar errors."""

    category: str = "internal"
    exit_code: int = 4


class ConfigError(PrivPolarError, ValueError):
    """Invalid configuration or invalid input values (pmfs, symbols, lengths)."""

    category = "config"
    exit_code = 2


class GuardError(PrivPolarError):
    """A size guard or enumeration limit was exceeded."""

    category = "guard"
    exit_code = 3


class InfeasibleRequestError(PrivPolarError):
    """A region query cannot be answered.

    ``reason`` is ``"out_of_range"`` when the request lies outside the attainable
    distortion/equivocation range, ``"no_point"`` when the computed frontier has no
    point meeting it.
    """

    category = "infeasible"
    exit_code = 3

    reason: str

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


class ImpossiblePathError(PrivPolarError):
    """A successive-cancellation prefix has probability zero."""

    category = "impossible_path"
    exit_code = 4

    index: int | None

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class DegenerateSupportError(PrivPolarError):
    """Some reconstruction symbols have zero prior probability."""

    category = "degenerate_support"
    exit_code = 2

    symbols: tuple[int, ...]

    def __init__(self, message: str, symbols: Sequence[int]):
        super().__init__(message)
        self.symbols = tuple(symbols)


class OracleDisagreementError(PrivPolarError, AssertionError):
    """Two independent computations of the same quantity disagree."""

    category = "internal"
    exit_code = 4
