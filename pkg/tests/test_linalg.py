import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qubitbath.linalg import (
    I2, I4, KET0, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z,
    DimensionError, NotHermitianError, adjoint, check_kraus, herm_eigvals,
    kron, mat_mul, partial_trace, validate_density,
)

from .conftest import random_density

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
mats = arrays(complex, (2, 2), elements=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                            allow_infinity=False))


def test_mat_mul_examples():
    assert np.allclose(mat_mul(I2, SIGMA_X), SIGMA_X)
    assert np.allclose(mat_mul(SIGMA_X, SIGMA_X), I2)
    assert np.allclose(mat_mul(SIGMA_X, SIGMA_Z), -1j * SIGMA_Y)


def test_mat_mul_dimension_mismatch():
    with pytest.raises(DimensionError):
        mat_mul(I2, I4)
    with pytest.raises(DimensionError):
        mat_mul(np.eye(3), np.eye(3))


def test_adjoint_examples():
    assert np.array_equal(adjoint(SIGMA_Y), SIGMA_Y)
    assert np.array_equal(adjoint(SIGMA_MINUS), SIGMA_PLUS)
    assert np.array_equal(adjoint(1j * SIGMA_Z), -1j * SIGMA_Z)


def test_kron_examples():
    assert np.array_equal(kron(I2, I2), I4)
    p0 = np.outer(KET0, KET0)
    k = kron(p0, SIGMA_X)
    assert np.array_equal(k[:2, :2], SIGMA_X)
    assert not np.any(k[2:, :]) and not np.any(k[:, 2:])
    assert np.array_equal(kron(SIGMA_Z, I2), np.diag([1, 1, -1, -1]))
    with pytest.raises(DimensionError):
        kron(I4, I2)


def test_herm_eigvals_examples():
    assert np.allclose(herm_eigvals(SIGMA_Z), [-1, 1])
    assert np.allclose(herm_eigvals(I2 / 2), [0.5, 0.5])
    assert np.allclose(herm_eigvals(np.diag([0.3, 0.7])), [0.3, 0.7])
    with pytest.raises(NotHermitianError):
        herm_eigvals(SIGMA_MINUS)


def test_herm_eigvals_4x4_matches_reference(rng):
    rho = random_density(rng, 4)
    assert np.allclose(herm_eigvals(rho), np.sort(np.linalg.eigvals(rho).real), atol=1e-12)


def test_partial_trace_examples(rng):
    ra, rs = random_density(rng), random_density(rng)
    assert np.allclose(partial_trace(np.kron(ra, rs), 1), rs, atol=1e-12)
    assert np.allclose(partial_trace(np.kron(ra, rs), 0), ra, atol=1e-12)
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    for keep in (0, 1):
        assert np.allclose(partial_trace(np.outer(bell, bell), keep), I2 / 2)
    assert np.allclose(partial_trace(I4 / 4, 1), I2 / 2)
    with pytest.raises(DimensionError):
        partial_trace(I2 / 2, 0)


@given(mats)
def test_adjoint_involution(a):
    assert np.array_equal(adjoint(adjoint(a)), a)


@given(mats, mats)
def test_trace_cyclic(a, b):
    assert abs(np.trace(a @ b) - np.trace(b @ a)) <= 1e-12 * max(1.0, np.abs(a).max() * np.abs(b).max() * 4)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_eigvals_of_density_sum_to_one(seed):
    rho = random_density(np.random.default_rng(seed))
    assert abs(herm_eigvals(rho).sum() - 1) < 1e-10


def test_check_kraus():
    check_kraus([I2])
    with pytest.raises(ValueError):
        check_kraus([0.9 * I2])


def test_validate_density_rejects_bad_input():
    with pytest.raises(ValueError):
        validate_density(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        validate_density(SIGMA_MINUS + np.diag([1, 0]))
