import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from app.exceptions import DimensionError, EmptyInputError, NotPSDError, SingularMatrixError, SymmetryError
from app.services.numerics import (
    EIGEN_FLOOR,
    cholesky,
    kl_divergence,
    log_det_psd,
    psd_inverse,
    softmax,
    sym_eigvals,
)
from tests.oracles import cofactor_det, lu_det

finite = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


class TestSymEigvals:
    def test_diagonal_sorted(self):
        assert_allclose(sym_eigvals(np.diag([3.0, 1.0, 2.0])), [1.0, 2.0, 3.0])

    def test_identity(self):
        assert_allclose(sym_eigvals(np.eye(4)), np.ones(4))

    def test_product_matches_cofactor_determinant(self, random_psd):
        m = random_psd(6, ridge=0.5)
        assert math.isclose(np.prod(sym_eigvals(m)), cofactor_det(m), rel_tol=1e-8)

    def test_rejects_asymmetric(self):
        with pytest.raises(SymmetryError):
            sym_eigvals(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            sym_eigvals(np.ones((2, 3)))


class TestCholesky:
    def test_identity(self):
        assert_allclose(cholesky(np.eye(3)), np.eye(3))

    def test_hand_factorization(self):
        assert_allclose(cholesky(np.array([[4.0, 2.0], [2.0, 5.0]])), [[2.0, 0.0], [1.0, 2.0]])

    def test_indefinite_raises(self):
        with pytest.raises(NotPSDError):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    @pytest.mark.parametrize("m", [[[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [1.0, 1.0]]])
    def test_zero_pivot_with_coupled_column_raises(self, m):
        with pytest.raises(NotPSDError):
            cholesky(np.array(m))

    def test_zero_pivot_with_empty_column(self):
        v = cholesky(np.diag([0.0, 4.0]))
        assert_allclose(v, [[0.0, 0.0], [0.0, 2.0]])

    def test_round_trip(self, random_psd):
        for n in (1, 2, 5, 16, 32):
            m = random_psd(n)
            v = cholesky(m)
            assert np.allclose(np.triu(v, 1), 0.0)
            assert_allclose(v @ v.T, m, atol=1e-8)

    def test_rank_deficient_round_trip(self, random_psd):
        m = random_psd(8, rank=3)
        v = cholesky(m)
        assert_allclose(v @ v.T, m, atol=1e-8)


class TestLogDet:
    def test_identity_is_zero(self):
        assert log_det_psd(np.eye(5)) == 0.0

    def test_diagonal(self):
        assert math.isclose(log_det_psd(np.diag([2.0, 2.0, 2.0])), 3 * math.log(2.0))

    def test_matches_lu_determinant(self, random_psd):
        m = random_psd(5, ridge=0.1)
        assert math.isclose(log_det_psd(m), math.log(lu_det(m)), rel_tol=1e-8)

    def test_singular_is_floored(self):
        assert math.isclose(log_det_psd(np.zeros((2, 2))), 2 * math.log(EIGEN_FLOOR))

    def test_empty_is_zero(self):
        assert log_det_psd(np.zeros((0, 0))) == 0.0

    def test_negative_eigenvalue_raises(self):
        with pytest.raises(NotPSDError):
            log_det_psd(np.diag([1.0, -0.5]))

    def test_exp_matches_clamped_eigen_product(self, random_psd):
        for _ in range(20):
            m = random_psd(6, rank=4)
            eig = np.maximum(np.linalg.eigvalsh(m), EIGEN_FLOOR)
            assert math.isclose(log_det_psd(m), float(np.sum(np.log(eig))), rel_tol=1e-6)


class TestPsdInverse:
    def test_identity(self):
        assert_allclose(psd_inverse(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert_allclose(psd_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))

    def test_self_consistency(self, random_psd):
        m = random_psd(4, ridge=0.1)
        assert_allclose(psd_inverse(m) @ m, np.eye(4), atol=1e-8)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            psd_inverse(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestSoftmax:
    def test_constant_input_is_uniform(self):
        assert_allclose(softmax([0.0, 0.0, 0.0]), np.full(3, 1 / 3))

    def test_large_input_does_not_overflow(self):
        out = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        assert_allclose(out, [1.0, 0.0], atol=1e-12)

    def test_two_element_closed_form(self):
        e = math.e
        assert_allclose(softmax([1.0, 2.0]), [1 / (1 + e), e / (1 + e)], rtol=1e-12)

    def test_empty_raises(self):
        with pytest.raises(EmptyInputError):
            softmax([])

    @given(arrays(np.float64, st.integers(1, 32), elements=finite), finite)
    def test_shift_invariant(self, v, c):
        assert_allclose(softmax(v + c), softmax(v), atol=1e-12)


def _distribution(raw: np.ndarray) -> np.ndarray:
    return raw / raw.sum()


positive = st.floats(min_value=1e-6, max_value=1.0, allow_nan=False)


class TestKLDivergence:
    def test_identical_is_zero(self):
        p = np.full(8, 1 / 8)
        assert kl_divergence(p, p) == 0.0

    def test_delta_against_uniform(self):
        assert math.isclose(kl_divergence([1.0, 0.0], [0.5, 0.5]), math.log(2.0), rel_tol=1e-8)

    def test_matches_direct_sum(self):
        p, q = np.array([0.5, 0.5]), np.array([0.9, 0.1])
        expected = float(np.sum(p * np.log(p / q)))
        assert math.isclose(kl_divergence(p, q), expected, rel_tol=1e-8, abs_tol=1e-10)

    def test_length_mismatch_raises(self):
        with pytest.raises(DimensionError):
            kl_divergence([0.5, 0.5], [1 / 3, 1 / 3, 1 / 3])

    @settings(max_examples=200)
    @given(
        st.integers(1, 64).flatmap(
            lambda n: st.tuples(arrays(np.float64, n, elements=positive), arrays(np.float64, n, elements=positive))
        )
    )
    def test_non_negative(self, pair):
        p, q = (_distribution(x) for x in pair)
        assert kl_divergence(p, q) >= 0.0
