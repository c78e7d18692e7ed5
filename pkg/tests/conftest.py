"""Shared fixtures: named sources with their boundary channels, and small codes."""

from __future__ import annotations

import hypothesis
import numpy as np
import pytest

from src.polar.construction import PolarSpec
from src.source.model import (
    DistortionMetric,
    ForwardChannel,
    JointSource,
    deterministic_channel,
)
from src.source.presets import Preset, dsbs, uniform, zchannel

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("privpolar", max_examples=50, deadline=None)
hypothesis.settings.load_profile("privpolar")

DSBS_P = 0.1
DSBS_CROSSOVER = 0.11


@pytest.fixture
def dsbs_preset() -> Preset:
    """DSBS(0.1) reconstructed through BSC(0.11)."""
    return dsbs(DSBS_P, DSBS_CROSSOVER)


@pytest.fixture
def zchannel_preset() -> Preset:
    return zchannel(a=0.3, px=0.5, flip0=0.05, flip1=0.1)


@pytest.fixture
def ternary_preset() -> Preset:
    return uniform(q=3, flip=0.1)


@pytest.fixture
def hamming2() -> DistortionMetric:
    return DistortionMetric.hamming(2, 2)


@pytest.fixture
def identity_channel(dsbs_preset: Preset) -> ForwardChannel:
    """X_hat = X on the DSBS alphabet."""
    return deterministic_channel(dsbs_preset.source, 2, [[0, 0], [1, 1]])


def make_spec(
    src: JointSource,
    ch: ForwardChannel,
    n: int,
    frozen: tuple[int, ...] = (),
    computable: tuple[int, ...] = (),
) -> PolarSpec:
    """A spec with a hand-picked partition and placeholder Z values."""
    return PolarSpec.with_sets(
        src, ch, n, frozen, computable, z_cond=np.zeros(n), z_marg=np.ones(n)
    )
