import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from srl.linalg import (
    DimensionError,
    ValidationError,
    close,
    distance_to_rank,
    leq,
    operator_norm,
    singular_values,
    spectral_radius,
)

PHI = (1 + 5**0.5) / 2

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(d):
    return arrays(np.float64, (d, d), elements=finite)


def test_spectral_radius_examples():
    assert spectral_radius([[0, 1], [0, 0]]) == 0.0
    assert spectral_radius(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    # roots of x^2 - 3x + 1
    assert spectral_radius([[2, 1], [1, 1]]) == pytest.approx((3 + 5**0.5) / 2, rel=1e-12)


def test_spectral_radius_complex_pair():
    theta = 0.3
    rot = 1.5 * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert spectral_radius(rot) == pytest.approx(1.5, rel=1e-12)


def test_operator_norm_examples():
    assert operator_norm(np.zeros((2, 2))) == 0.0
    assert operator_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)
    # rank one: sigma_1 is the Frobenius norm
    assert operator_norm([[0, 2], [0, 0]]) == pytest.approx(2.0)


def test_singular_values_examples():
    np.testing.assert_allclose(singular_values(np.diag([3.0, 1.0])), [3, 1])
    np.testing.assert_array_equal(singular_values(np.zeros((2, 2))), [0, 0])
    np.testing.assert_allclose(singular_values([[1, 1], [0, 1]]), [PHI, 1 / PHI], rtol=1e-12)
    assert singular_values(np.ones((2, 5))).shape == (2,)


def test_distance_to_rank_examples():
    assert distance_to_rank(np.diag([3.0, 1.0]), 1) == pytest.approx(1.0)
    assert distance_to_rank(np.diag([3.0, 1.0]), 0) == pytest.approx(3.0)
    assert distance_to_rank(np.random.default_rng(0).normal(size=(3, 4)), 3) == 0.0
    with pytest.raises(ValidationError):
        distance_to_rank(np.eye(2), -1)


@pytest.mark.parametrize(
    "bad, exc",
    [
        ([[1, 2, 3]], DimensionError),
        ([1, 2], DimensionError),
        ([[np.nan, 0], [0, 1]], ValidationError),
        ([[np.inf, 0], [0, 1]], ValidationError),
        ("abc", ValidationError),
    ],
)
def test_spectral_radius_rejects(bad, exc):
    with pytest.raises(exc):
        spectral_radius(bad)


def test_operator_norm_rejects_nonfinite():
    with pytest.raises(ValidationError):
        operator_norm([[np.nan]])


def test_tolerance_helpers():
    assert close(1.0, 1.0 + 1e-11)
    assert not close(1.0, 1.0 + 1e-8)
    assert close(0.0, 5e-13)
    assert leq(1.0 + 1e-11, 1.0)
    assert not leq(1.1, 1.0)


@settings(max_examples=100, deadline=None)
@given(square(3), square(3))
def test_norm_submultiplicative_and_lipschitz(a, b):
    na, nb = operator_norm(a), operator_norm(b)
    assert leq(operator_norm(a @ b), na * nb)
    assert leq(abs(na - nb), operator_norm(a - b))
    assert leq(spectral_radius(a), na)


@settings(max_examples=50, deadline=None)
@given(square(4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_eckart_young_optimal(a, k, seed):
    rng = np.random.default_rng(seed)
    dist = distance_to_rank(a, k)
    for _ in range(100):
        r = rng.normal(size=(4, k)) @ rng.normal(size=(k, 4)) if k else np.zeros((4, 4))
        assert leq(dist, operator_norm(a - r))


def test_eckart_young_attained(rng):
    a = rng.normal(size=(5, 5))
    u, s, vt = np.linalg.svd(a)
    for k in range(5):
        best = (u[:, :k] * s[:k]) @ vt[:k]
        assert distance_to_rank(a, k) == pytest.approx(operator_norm(a - best), rel=1e-10)


def test_spectral_radius_of_powers(rng):
    for _ in range(50):
        a = rng.normal(size=(4, 4))
        r = spectral_radius(a)
        for n in range(1, 7):
            assert spectral_radius(np.linalg.matrix_power(a, n)) == pytest.approx(r**n, rel=1e-8)


def test_singular_spectrum_invariants(rng):
    for shape in [(3, 3), (2, 6), (6, 2)]:
        m = rng.normal(size=shape)
        s = singular_values(m)
        assert s.size == min(shape)
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
        assert close(s[0], operator_norm(m))
