"""Dense symmetric linear-algebra kernels shared by every DPP service.

All functions are pure: they never modify their inputs and return fresh arrays.
Everything runs in double precision.
"""

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_factor, cho_solve
from scipy.special import rel_entr
from scipy.special import softmax as _scipy_softmax

from app.exceptions import (
    DimensionError,
    EmptyInputError,
    NotPSDError,
    SingularMatrixError,
    SymmetryError,
)
from app.utils.logging import get_logger

logger = get_logger(__name__)

Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]

SYMMETRY_TOL = 1e-9
PSD_TOL = 1e-9
EIGEN_FLOOR = 1e-12
KL_EPS = 1e-10


def as_vector(v: ArrayLike, name: str = "vector") -> Vector:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def as_square(m: ArrayLike, name: str = "matrix") -> Matrix:
    """Coerce to a finite square float64 array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def tolerance_scale(m: Matrix) -> float:
    """Magnitude used to scale absolute tolerances: max(1, max |m_ij|)."""
    return max(1.0, float(np.abs(m).max())) if m.size else 1.0


def as_symmetric(m: ArrayLike, name: str = "matrix") -> Matrix:
    """
    Validate symmetry within tolerance and return the exactly symmetrised matrix.

    Raises:
        DimensionError: non-square input
        SymmetryError: asymmetry above ``SYMMETRY_TOL`` (scaled by the entry magnitude)
    """
    arr = as_square(m, name)
    if arr.size == 0:
        return arr.copy()
    gap = float(np.abs(arr - arr.T).max())
    if gap > SYMMETRY_TOL * tolerance_scale(arr):
        raise SymmetryError(f"{name} is not symmetric (max |m - m^T| = {gap:.3e})")
    return (arr + arr.T) / 2.0


def sym_eigvals(m: ArrayLike) -> Vector:
    """
    Eigenvalues of a symmetric matrix in ascending order.

    Args:
        m: Square symmetric matrix

    Returns:
        Ascending eigenvalues

    Examples:
        >>> sym_eigvals(np.diag([3.0, 1.0, 2.0]))
        array([1., 2., 3.])
    """
    arr = as_symmetric(m)
    if arr.size == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(arr)


def sym_eigh(m: ArrayLike) -> tuple[Vector, Matrix]:
    """Ascending eigenvalues and the matching orthonormal eigenvectors (columns)."""
    arr = as_symmetric(m)
    if arr.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    return np.linalg.eigh(arr)


def cholesky(m: ArrayLike) -> Matrix:
    """
    Lower-triangular factor V with V @ V.T == m for a PSD matrix.

    Zero pivots (rank-deficient input) are allowed when the column below them also
    vanishes; that column is left at zero.

    Args:
        m: Symmetric positive semidefinite matrix

    Returns:
        Lower-triangular factor

    Raises:
        NotPSDError: a pivot falls below ``-PSD_TOL``, or a zero pivot still couples
            to later rows
    """
    arr = as_symmetric(m)
    n = arr.shape[0]
    tol = PSD_TOL * tolerance_scale(arr)
    factor = np.zeros_like(arr)

    for j in range(n):
        row = factor[j, :j]
        pivot = arr[j, j] - row @ row
        if pivot < -tol:
            raise NotPSDError(f"matrix is not positive semidefinite (pivot {j} = {pivot:.3e})")
        below = arr[j + 1 :, j] - factor[j + 1 :, :j] @ row
        if pivot <= tol:
            # PSD needs |below_i|^2 <= pivot * d_i with d_i the residual diagonal.
            rest = np.diag(arr)[j + 1 :] - np.einsum("ij,ij->i", factor[j + 1 :, :j], factor[j + 1 :, :j])
            bound = np.sqrt(tol * np.maximum(rest, tol)) + tol
            if np.any(np.abs(below) > bound):
                raise NotPSDError(f"matrix is not positive semidefinite (zero pivot {j} with coupled column)")
            continue
        root = np.sqrt(pivot)
        factor[j, j] = root
        factor[j + 1 :, j] = below / root

    return factor


def clamped_eigvals(m: ArrayLike) -> Vector:
    """
    Eigenvalues floored at ``EIGEN_FLOOR``.

    Raises:
        NotPSDError: an eigenvalue falls below ``-PSD_TOL`` (scaled)
    """
    arr = as_symmetric(m)
    if arr.size == 0:
        return np.zeros(0)
    eigvals = np.linalg.eigvalsh(arr)
    if eigvals[0] < -PSD_TOL * tolerance_scale(arr):
        raise NotPSDError(f"matrix is not positive semidefinite (min eigenvalue {eigvals[0]:.3e})")
    if eigvals[0] < EIGEN_FLOOR:
        logger.debug(f"Clamping {int((eigvals < EIGEN_FLOOR).sum())} eigenvalue(s) to {EIGEN_FLOOR}")
    return np.maximum(eigvals, EIGEN_FLOOR)


def log_det_psd(m: ArrayLike) -> float:
    """
    Log-determinant of a PSD matrix as the sum of log eigenvalues.

    Eigenvalues below ``EIGEN_FLOOR`` are clamped to it; the empty matrix has
    log-determinant 0.

    Examples:
        >>> log_det_psd(np.eye(4))
        0.0
    """
    return float(np.sum(np.log(clamped_eigvals(m))))


def psd_inverse(m: ArrayLike) -> Matrix:
    """
    Inverse of a symmetric positive-definite matrix.

    Raises:
        SingularMatrixError: smallest eigenvalue at or below ``EIGEN_FLOOR``
    """
    arr = as_symmetric(m)
    n = arr.shape[0]
    if n == 0:
        return arr.copy()
    smallest = float(np.linalg.eigvalsh(arr)[0])
    if smallest <= EIGEN_FLOOR:
        raise SingularMatrixError(f"matrix is singular within tolerance (min eigenvalue {smallest:.3e})")
    inverse = cho_solve(cho_factor(arr, lower=True), np.eye(n))
    return (inverse + inverse.T) / 2.0


def softmax(v: ArrayLike, axis: int = -1) -> NDArray[np.float64]:
    """
    Numerically stable softmax (max-subtracted) along ``axis``.

    Raises:
        EmptyInputError: empty input
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInputError("softmax of an empty vector")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("softmax input contains non-finite entries")
    return _scipy_softmax(arr, axis=axis)


def smooth_distribution(p: Vector, eps: float = KL_EPS) -> Vector:
    """Add ``eps`` to every entry and renormalise."""
    shifted = p + eps
    return shifted / shifted.sum()


def kl_divergence(p: ArrayLike, q: ArrayLike) -> float:
    """
    KL(p || q) after epsilon smoothing of both distributions.

    Args:
        p: Reference distribution
        q: Approximating distribution

    Returns:
        Non-negative divergence in nats

    Raises:
        DimensionError: length mismatch
    """
    p_arr = as_vector(p, "p")
    q_arr = as_vector(q, "q")
    if p_arr.shape != q_arr.shape:
        raise DimensionError(f"distribution lengths differ: {p_arr.size} vs {q_arr.size}")
    if p_arr.size == 0:
        raise EmptyInputError("KL divergence of empty distributions")
    value = float(np.sum(rel_entr(smooth_distribution(p_arr), smooth_distribution(q_arr))))
    return max(value, 0.0)
