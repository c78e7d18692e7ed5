import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import ConfigError, ImpossiblePathError
from src.gfq.transform import polar_transform
from src.oracle.exact import brute_conditionals, exact_bhattacharyya
from src.polar.construction import (
    ConstructionMode,
    PolarSpec,
    WeightVector,
    bhattacharyya,
    bhattacharyya_rows,
    conditional_table,
    conditioned_leaves,
    construct_sets,
    estimate_bhattacharyya,
    marginal_leaves,
    polarization_spectrum,
    reconstruction_is_uniform,
    sc_combine_minus,
    sc_combine_plus,
    sc_conditionals,
    select_sets,
    successive_cancellation,
    threshold_delta,
)
from src.source.model import DistortionMetric, sample_source, target_point
from src.source.presets import Preset
from tests.conftest import make_spec


@st.composite
def leaf_cases(draw: st.DrawFn) -> tuple[np.ndarray, np.ndarray]:
    q = draw(st.sampled_from([2, 3]))
    n = draw(st.sampled_from([1, 2, 4, 8]))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    leaves = rng.dirichlet(np.ones(q), size=n)
    path = rng.integers(0, q, size=n)
    return leaves, path


@given(leaf_cases())
def test_recursion_matches_brute_force(case: tuple[np.ndarray, np.ndarray]):
    leaves, path = case
    np.testing.assert_allclose(
        conditional_table(leaves, path), brute_conditionals(leaves, path), rtol=0.0, atol=1e-10
    )


@given(leaf_cases())
def test_single_conditional_matches_table(case: tuple[np.ndarray, np.ndarray]):
    leaves, path = case
    n = leaves.shape[0]
    table = conditional_table(leaves, path)
    for i in range(n):
        np.testing.assert_allclose(sc_conditionals(leaves, path[:i]).w, table[i], atol=1e-12)


@pytest.mark.parametrize("name", ["dsbs_preset", "zchannel_preset", "ternary_preset"])
@pytest.mark.parametrize("n", [2, 4, 8])
def test_recursion_on_source_realizations(name: str, n: int, request: pytest.FixtureRequest):
    preset: Preset = request.getfixturevalue(name)
    rng = np.random.default_rng(n)
    x, y = sample_source(preset.source, n, rng, batch=100)
    leaves = conditioned_leaves(preset.channel, x, y)
    paths = rng.integers(0, preset.channel.q, size=(100, n))
    tables = conditional_table(leaves, paths)
    for t in range(100):
        expected = brute_conditionals(leaves[t], paths[t])
        np.testing.assert_allclose(tables[t], expected, rtol=0.0, atol=1e-10)
    marginal = marginal_leaves(preset.source, preset.channel, n)
    np.testing.assert_allclose(
        conditional_table(marginal, paths[0]),
        brute_conditionals(marginal, paths[0]),
        rtol=0.0,
        atol=1e-10,
    )


def test_length_two_combinations():
    a = WeightVector.from_weights([0.7, 0.3])
    b = WeightVector.from_weights([0.2, 0.8])
    # x_hat = (u1 + u2, u2): P(u1) = sum_u2 a(u1 + u2) b(u2)
    minus = sc_combine_minus(a, b)
    np.testing.assert_allclose(minus.w, [0.7 * 0.2 + 0.3 * 0.8, 0.3 * 0.2 + 0.7 * 0.8])
    plus = sc_combine_plus(a, b, 1)
    np.testing.assert_allclose(plus.w, np.array([0.3 * 0.2, 0.7 * 0.8]) / (0.06 + 0.56))
    assert minus.log_scale == pytest.approx(0.0)


def test_zero_weights_are_an_impossible_path():
    with pytest.raises(ImpossiblePathError):
        _ = WeightVector.from_weights([0.0, 0.0])
    a = WeightVector.from_weights([1.0, 0.0])
    b = WeightVector.from_weights([1.0, 0.0])
    with pytest.raises(ImpossiblePathError):
        _ = sc_combine_plus(a, b, 1)


def test_strict_recursion_reports_index():
    # x_hat = (0, 0) forces u_0 = 0, so no index after u_0 = 1 has any mass
    leaves = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ImpossiblePathError) as exc:
        _ = conditional_table(leaves, np.array([1, 0]))
    assert exc.value.index == 1
    table = conditional_table(leaves, np.array([1, 0]), strict=False)
    np.testing.assert_array_equal(table[1], [0.0, 0.0])


def test_successive_cancellation_returns_transform_pair():
    rng = np.random.default_rng(0)
    leaves = rng.dirichlet(np.ones(3), size=(5, 8))
    u, x_hat = successive_cancellation(leaves, lambda i, w: np.argmax(w, axis=-1))
    assert u.shape == (5, 8)
    np.testing.assert_array_equal(x_hat, polar_transform(u, 3))


def test_path_too_long_rejected():
    with pytest.raises(ConfigError):
        _ = sc_conditionals(np.full((2, 2), 0.5), [0, 1])


def test_bhattacharyya_extremes():
    assert bhattacharyya(np.array([[0.25, 0.25], [0.25, 0.25]])) == pytest.approx(1.0)
    assert bhattacharyya(np.array([[0.5, 0.0], [0.0, 0.5]])) == 0.0
    rows = np.array([[0.5, 0.5], [1.0, 0.0], [0.9, 0.1]])
    np.testing.assert_allclose(bhattacharyya_rows(rows), [1.0, 0.0, 2 * np.sqrt(0.09)])
    # A on axis 0, B on the remaining axes
    joint = np.array([[0.45, 0.05], [0.05, 0.45]])
    assert bhattacharyya(joint) == pytest.approx(2 * 2 * np.sqrt(0.45 * 0.05))


def test_single_letter_exact_values(dsbs_preset: Preset):
    z_cond, z_marg = exact_bhattacharyya(dsbs_preset.source, dsbs_preset.channel, 1)
    assert z_cond[0] == pytest.approx(2 * np.sqrt(0.11 * 0.89), abs=1e-12)
    assert z_marg[0] == pytest.approx(1.0, abs=1e-12)


def test_monte_carlo_estimate_close_to_exact(zchannel_preset: Preset):
    src, ch = zchannel_preset.source, zchannel_preset.channel
    z_cond, z_marg = estimate_bhattacharyya(src, ch, 4, num_samples=20_000, seed=3)
    exact_cond, exact_marg = exact_bhattacharyya(src, ch, 4)
    np.testing.assert_allclose(z_cond, exact_cond, atol=0.02)
    np.testing.assert_allclose(z_marg, exact_marg, atol=0.02)


def test_estimate_independent_of_thread_count(dsbs_preset: Preset):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    one = estimate_bhattacharyya(src, ch, 1024, num_samples=2100, seed=9, threads=1)
    many = estimate_bhattacharyya(src, ch, 1024, num_samples=2100, seed=9, threads=3)
    np.testing.assert_array_equal(one[0], many[0])
    np.testing.assert_array_equal(one[1], many[1])


def test_rank_selection():
    z_cond = np.array([0.9, 0.1, 0.95, 0.5])
    z_marg = np.array([0.9, 0.001, 0.8, 0.3])
    frozen, computable = select_sets(z_cond, z_marg, 0.3, ConstructionMode.RANK, 0.25)
    assert frozen == (2,)
    assert computable == (1, 3)
    frozen, computable = select_sets(
        z_cond, z_marg, 0.3, ConstructionMode.RANK, 0.5, computable_size=0
    )
    assert frozen == (0, 2)
    assert computable == ()


def test_threshold_selection():
    z_cond = np.array([0.9, 0.1, 0.95, 0.5])
    z_marg = np.array([0.9, 0.001, 0.8, 0.3])
    assert threshold_delta(4, 0.3) == pytest.approx(2 ** -(4**0.3))
    frozen, computable = select_sets(z_cond, z_marg, 0.3, ConstructionMode.THRESHOLD)
    assert frozen == (0, 2)
    assert computable == (1, 3)


def test_overlap_resolves_to_frozen():
    frozen, computable = select_sets(
        np.array([0.99, 0.1]), np.array([0.0, 0.5]), 0.3, ConstructionMode.THRESHOLD
    )
    assert frozen == (0,)
    assert computable == ()


def test_rank_mode_needs_rate():
    with pytest.raises(ConfigError):
        _ = select_sets(np.zeros(4), np.zeros(4), 0.3, ConstructionMode.RANK)


def test_spec_validation(dsbs_preset: Preset):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    with pytest.raises(ConfigError):
        _ = make_spec(src, ch, 4, frozen=(0, 1), computable=(1,))
    with pytest.raises(ConfigError):
        _ = make_spec(src, ch, 4, frozen=(4,))
    with pytest.raises(ConfigError):
        _ = make_spec(src, ch, 6)
    with pytest.raises(ConfigError):
        _ = make_spec(src, ch, 4, frozen=(1,)).with_frozen_values([0, 1])
    with pytest.raises(ConfigError):
        _ = PolarSpec.with_sets(src, ch, 4, z_cond=np.zeros(3), z_marg=np.ones(4))


def test_spec_sets_partition_indices(dsbs_preset: Preset):
    spec = make_spec(dsbs_preset.source, dsbs_preset.channel, 8, frozen=(5, 1), computable=(3,))
    assert spec.frozen == (1, 5)
    assert spec.info == (0, 2, 4, 6, 7)
    assert spec.rate == pytest.approx(5 / 8)
    assert spec.frozen_values == (0, 0)
    assert spec.k == 3


def test_construction_reproducible_from_seed(dsbs_preset: Preset):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    first = construct_sets(src, ch, 64, num_samples=300, seed=4, target_rate=0.6)
    second = construct_sets(src, ch, 64, num_samples=300, seed=4, target_rate=0.6)
    assert first == second
    assert len(first.info) == round(0.6 * 64)
    assert len(polarization_spectrum(first)) == 64


def test_construction_argument_checks(dsbs_preset: Preset):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    with pytest.raises(ConfigError):
        _ = construct_sets(src, ch, 8, beta=0.6, target_rate=0.5)
    with pytest.raises(ConfigError):
        _ = construct_sets(src, ch, 8, mode=ConstructionMode.RANK)
    with pytest.raises(ConfigError):
        _ = estimate_bhattacharyya(src, ch, 8, num_samples=0)


def test_uniform_reconstruction_detection(dsbs_preset: Preset, zchannel_preset: Preset):
    assert reconstruction_is_uniform(dsbs_preset.source, dsbs_preset.channel)
    assert not reconstruction_is_uniform(zchannel_preset.source, zchannel_preset.channel)


def test_uniform_prior_has_no_computable_indices(dsbs_preset: Preset):
    # with a uniform X_hat prior every U_i is uniform given its past
    _, z_marg = exact_bhattacharyya(dsbs_preset.source, dsbs_preset.channel, 4)
    np.testing.assert_allclose(z_marg, 1.0, atol=1e-12)


def test_polarization_sharpens_with_length(dsbs_preset: Preset):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    unpolarized = []
    for n in (64, 256, 1024):
        z_cond, _ = estimate_bhattacharyya(src, ch, n, num_samples=2000, seed=0)
        unpolarized.append(float(np.mean(np.minimum(z_cond, 1.0 - z_cond))))
    assert unpolarized[0] > unpolarized[1] > unpolarized[2]


@pytest.mark.slow
def test_threshold_rate_approaches_target(dsbs_preset: Preset, hamming2: DistortionMetric):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    r_star = target_point(src, ch, hamming2).R_star
    gaps, frozen_fractions = [], []
    for n in (256, 1024, 4096):
        spec = construct_sets(
            src, ch, n, mode=ConstructionMode.THRESHOLD, num_samples=10_000, seed=0
        )
        gaps.append(abs(spec.rate - r_star))
        frozen_fractions.append(float(np.mean(spec.z_cond > 0.99)))
    assert max(gaps) <= 0.15
    assert gaps[0] > gaps[1] > gaps[2]
    assert frozen_fractions[0] < frozen_fractions[1] < frozen_fractions[2]


@pytest.mark.slow
def test_rank_construction_at_target_rate(dsbs_preset: Preset, hamming2: DistortionMetric):
    src, ch = dsbs_preset.source, dsbs_preset.channel
    r_star = target_point(src, ch, hamming2).R_star
    spec = construct_sets(src, ch, 1024, beta=0.3, num_samples=10_000, seed=0, target_rate=r_star)
    assert abs(len(spec.info) / spec.n - r_star) <= 0.1
    assert len(spec.computable) / spec.n < 0.05
