import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.errors import ConfigError
from src.gfq.transform import (
    PrimeModulus,
    all_vectors,
    as_symbols,
    is_prime,
    kronecker_matrix,
    log2_length,
    polar_inverse,
    polar_transform,
)


@st.composite
def symbol_vectors(draw: st.DrawFn) -> tuple[np.ndarray, int]:
    q = draw(st.sampled_from([2, 3, 5]))
    n = 2 ** draw(st.integers(min_value=0, max_value=8))
    u = draw(st.lists(st.integers(0, q - 1), min_size=n, max_size=n))
    return np.array(u, dtype=np.int64), q


@given(symbol_vectors())
def test_inverse_undoes_transform(case: tuple[np.ndarray, int]):
    u, q = case
    np.testing.assert_array_equal(polar_inverse(polar_transform(u, q), q), u)
    np.testing.assert_array_equal(polar_transform(polar_inverse(u, q), q), u)


@given(symbol_vectors())
def test_butterfly_matches_kronecker_matrix(case: tuple[np.ndarray, int]):
    u, q = case
    g = kronecker_matrix(u.size, q)
    np.testing.assert_array_equal(polar_transform(u, q), (u @ g) % q)


def test_binary_transform_is_an_involution():
    rng = np.random.default_rng(7)
    u = rng.integers(0, 2, size=(1000, 64))
    np.testing.assert_array_equal(polar_transform(polar_transform(u, 2), 2), u)
    np.testing.assert_array_equal(polar_inverse(u, 2), polar_transform(u, 2))


def test_transform_batches_over_leading_axes():
    rng = np.random.default_rng(3)
    u = rng.integers(0, 3, size=(4, 5, 16))
    batched = polar_transform(u, 3)
    for i in range(4):
        for j in range(5):
            np.testing.assert_array_equal(batched[i, j], polar_transform(u[i, j], 3))


def test_length_two_kernel():
    # (u1, u2) -> (u1 + u2, u2)
    np.testing.assert_array_equal(polar_transform([2, 2], 3), [1, 2])
    np.testing.assert_array_equal(polar_inverse([1, 2], 3), [2, 2])


def test_transform_does_not_modify_input():
    u = np.array([1, 0, 1, 1])
    _ = polar_transform(u, 2)
    np.testing.assert_array_equal(u, [1, 0, 1, 1])


@pytest.mark.parametrize("q", [0, 1, 4, 6, 9])
def test_non_prime_alphabet_rejected(q: int):
    assert not is_prime(q)
    with pytest.raises(ConfigError):
        _ = PrimeModulus(q)


def test_prime_modulus_is_a_value():
    assert int(PrimeModulus(3)) == 3
    assert PrimeModulus(5) == PrimeModulus(q=5)
    assert len({PrimeModulus(2), PrimeModulus(2)}) == 1


def test_primes():
    assert [q for q in range(20) if is_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19]


@pytest.mark.parametrize("n", [0, 3, 6, 12])
def test_non_power_of_two_length_rejected(n: int):
    with pytest.raises(ConfigError):
        _ = log2_length(n)


def test_symbols_out_of_range_rejected():
    with pytest.raises(ConfigError):
        _ = as_symbols([0, 3], 3)
    with pytest.raises(ConfigError):
        _ = as_symbols([-1, 0], 2)
    with pytest.raises(ConfigError):
        _ = as_symbols([0, 1, 0], 2)


def test_all_vectors_is_lexicographic():
    vs = all_vectors(3, 2)
    assert vs.shape == (9, 2)
    np.testing.assert_array_equal(vs[:4], [[0, 0], [0, 1], [0, 2], [1, 0]])
    assert all_vectors(2, 0).shape == (1, 0)


def test_kronecker_matrix_is_lower_triangular_with_unit_diagonal():
    g = kronecker_matrix(8, 5)
    assert np.all(np.triu(g, 1) == 0)
    assert np.all(np.diag(g) == 1)
