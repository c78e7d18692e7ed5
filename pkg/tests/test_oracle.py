import math

import numpy as np
import pytest

from src.errors import GuardError, ImpossiblePathError
from src.gfq.transform import all_vectors
from src.oracle.exact import (
    ExactOracle,
    FrozenMode,
    check_support,
    enumerate_joint,
    exact_distortion,
    exact_equivocation,
    exact_frozen_metrics,
    exact_pe,
    exact_variational_distance,
)
from src.source.model import DistortionMetric, ForwardChannel, target_point
from src.source.presets import Preset
from tests.conftest import make_spec

CHECK_NAMES = [
    "recursion_matches_enumeration",
    "error_probability_bound",
    "variational_distance_bound",
    "total_expectation_identity",
    "distortion_decomposition",
    "distortion_decomposition_per_block_scaling",
    "equivocation_exceeds_reconstruction_conditional",
    "entropy_triangle",
    "entropy_continuity_joint",
    "entropy_continuity_marginal",
]


def test_support_guard(dsbs_preset: Preset, ternary_preset: Preset, hamming2: DistortionMetric):
    assert check_support(2, 2, 2, 2) == 64
    with pytest.raises(GuardError):
        _ = check_support(2, 2, 2, 16)
    with pytest.raises(GuardError):
        _ = ExactOracle(make_spec(dsbs_preset.source, dsbs_preset.channel, 16), hamming2)
    with pytest.raises(GuardError):
        _ = enumerate_joint(ternary_preset.source, ternary_preset.channel, 16)


def test_target_law_factorizes(zchannel_preset: Preset):
    src = zchannel_preset.source
    dist = enumerate_joint(src, zchannel_preset.channel, 4)
    assert dist.probs.shape == (16, 16, 16)
    assert dist.total == pytest.approx(1.0, abs=1e-12)
    xy = dist.marginal_xy()
    # x = 1111, y = 1010
    x_idx, y_idx = 15, 10
    assert xy[x_idx, y_idx] == pytest.approx(src.pmf[1, 1] ** 2 * src.pmf[1, 0] ** 2, abs=1e-15)
    assert xy[0, 15] == 0.0


def test_report_lists_every_check(dsbs_preset: Preset, hamming2: DistortionMetric):
    spec = make_spec(dsbs_preset.source, dsbs_preset.channel, 4, frozen=(0, 1))
    report = ExactOracle(spec, hamming2).report(FrozenMode.UNIFORM)
    assert [c.name for c in report.checks] == CHECK_NAMES
    scaling = next(c for c in report.checks if c.name.endswith("per_block_scaling"))
    assert scaling.asserted is False
    assert report.all_passed
    assert report.distortion.error_probability == 0.0
    assert report.variational_distance <= report.variational_bound + 1e-12
    assert report.frozen == [0, 1]


def test_information_only_code_reproduces_target(
    zchannel_preset: Preset, hamming2: DistortionMetric
):
    src, ch = zchannel_preset.source, zchannel_preset.channel
    spec = make_spec(src, ch, 4)
    op = target_point(src, ch, hamming2)
    oracle = ExactOracle(spec, hamming2)
    distance, bound = oracle.variational_distance()
    assert distance == pytest.approx(0.0, abs=1e-12)
    assert bound == 0.0
    breakdown = oracle.distortion(FrozenMode.UNIFORM)
    assert breakdown.decoder_distortion == pytest.approx(op.D_star, abs=1e-12)
    assert breakdown.encoder_distortion == pytest.approx(op.D_star, abs=1e-12)
    equiv = oracle.equivocation(FrozenMode.UNIFORM)
    assert equiv.equivocation == pytest.approx(op.Delta_star, abs=1e-12)
    assert equiv.joint_entropy_gap == pytest.approx(0.0, abs=1e-10)


def test_all_frozen_code_leaks_nothing(dsbs_preset: Preset, hamming2: DistortionMetric):
    spec = make_spec(dsbs_preset.source, dsbs_preset.channel, 4, frozen=(0, 1, 2, 3))
    report = ExactOracle(spec, hamming2).report(FrozenMode.UNIFORM)
    assert report.equivocation.equivocation == pytest.approx(
        dsbs_preset.source.entropy_y(2), abs=1e-12
    )
    joint = next(c for c in report.checks if c.name == "entropy_continuity_joint")
    # P_e(y, u) is far from P(y, u), so the continuity bound does not apply
    assert joint.passed is None
    assert joint.status == "N/A"
    assert math.isinf(joint.rhs)
    assert report.all_passed


def test_single_computable_index_error_bound(
    zchannel_preset: Preset, hamming2: DistortionMetric
):
    spec = make_spec(zchannel_preset.source, zchannel_preset.channel, 2, computable=(0,))
    oracle = ExactOracle(spec, hamming2)
    breakdown = oracle.distortion(FrozenMode.UNIFORM)
    assert 0.0 < breakdown.error_probability <= breakdown.error_bound
    assert breakdown.error_bound == pytest.approx(float(oracle.stats.z_marg[0]))
    assert breakdown.identity_residual <= 1e-12
    assert oracle.report(FrozenMode.UNIFORM).all_passed


def test_uniform_mode_averages_fixed_vectors(
    zchannel_preset: Preset, hamming2: DistortionMetric
):
    spec = make_spec(zchannel_preset.source, zchannel_preset.channel, 4, (0, 1), (3,))
    oracle = ExactOracle(spec, hamming2)
    metrics = [oracle.frozen_metrics(list(v)) for v in all_vectors(2, 2)]
    uniform_d = oracle.distortion(FrozenMode.UNIFORM).decoder_distortion
    uniform_e = oracle.equivocation(FrozenMode.UNIFORM).equivocation
    assert uniform_d == pytest.approx(np.mean([m[0] for m in metrics]), abs=1e-12)
    assert uniform_e == pytest.approx(np.mean([m[1] for m in metrics]), abs=1e-12)
    assert oracle.pe(FrozenMode.FIXED, [1, 0]).total == pytest.approx(1.0, abs=1e-10)


def test_recursion_agrees_with_enumeration(ternary_preset: Preset):
    d = ternary_preset.hamming()
    spec = make_spec(ternary_preset.source, ternary_preset.channel, 2, frozen=(0,))
    oracle = ExactOracle(spec, d)
    assert oracle.max_disagreement <= 1e-10
    assert oracle.report(FrozenMode.FIXED, [2]).all_passed


def test_fixed_frozen_value_can_be_impossible(
    dsbs_preset: Preset, identity_channel: ForwardChannel, hamming2: DistortionMetric
):
    spec = make_spec(dsbs_preset.source, identity_channel, 2, frozen=(0,))
    oracle = ExactOracle(spec, hamming2)
    with pytest.raises(ImpossiblePathError) as exc:
        _ = oracle.frozen_weights(FrozenMode.FIXED, [0])
    assert exc.value.index == 1
    with pytest.raises(ImpossiblePathError):
        _ = oracle.report(FrozenMode.UNIFORM)


def test_module_helpers(
    dsbs_preset: Preset, identity_channel: ForwardChannel, hamming2: DistortionMetric
):
    spec = make_spec(dsbs_preset.source, identity_channel, 4)
    assert exact_distortion(spec, hamming2) == (0.0, 0.0, 0.0)
    assert exact_equivocation(spec) == pytest.approx(target_point(
        dsbs_preset.source, identity_channel, hamming2
    ).Delta_star, abs=1e-12)
    distance, bound = exact_variational_distance(spec)
    assert distance == pytest.approx(0.0, abs=1e-12)
    assert bound == 0.0
    assert exact_pe(spec).total == pytest.approx(1.0, abs=1e-12)

    frozen = make_spec(dsbs_preset.source, dsbs_preset.channel, 2, frozen=(1,))
    d_n, delta_n = exact_frozen_metrics(frozen, hamming2, [1])
    assert 0.0 <= d_n <= 1.0
    assert 0.0 <= delta_n <= 1.0


@pytest.mark.slow
@pytest.mark.parametrize(
    ("name", "frozen", "computable"),
    [("dsbs_preset", (0, 1, 2, 4), ()), ("zchannel_preset", (0, 1, 2), (3,))],
)
def test_length_eight_report_passes(
    name: str,
    frozen: tuple[int, ...],
    computable: tuple[int, ...],
    hamming2: DistortionMetric,
    request: pytest.FixtureRequest,
):
    preset: Preset = request.getfixturevalue(name)
    spec = make_spec(preset.source, preset.channel, 8, frozen=frozen, computable=computable)
    report = ExactOracle(spec, hamming2).report(FrozenMode.UNIFORM)
    assert report.all_passed
    chain = next(
        c for c in report.checks if c.name == "equivocation_exceeds_reconstruction_conditional"
    )
    assert chain.passed is True
