"""Quality/similarity decomposition and L-ensemble construction.

An L-ensemble is built as ``L_ij = q_i * sim(i, j) * q_j`` where ``q`` is the
averaged attention weight of each article position and ``sim`` the cosine
similarity of the encoder feature vectors.
"""

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.exceptions import (
    DegenerateFeatureError,
    DegenerateQualityError,
    DimensionError,
    EmptyInputError,
    IndexRangeError,
    InvalidParameterError,
)
from app.services.numerics import (
    Matrix,
    Vector,
    as_symmetric,
    as_vector,
    log_det_psd,
    psd_inverse,
)
from app.utils.logging import get_logger

logger = get_logger(__name__)

Subset = NDArray[np.int64]


def as_subset(indices: ArrayLike, t_total: int) -> Subset:
    """
    Validate subset indices against a ground set of size ``t_total``.

    Returns:
        Strictly increasing int64 index array

    Raises:
        IndexRangeError: out-of-range, non-integer or duplicated indices
    """
    arr = np.asarray(indices)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise IndexRangeError(f"subset must be a 1-D integer sequence, got {arr.dtype} {arr.shape}")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= t_total:
        raise IndexRangeError(f"subset index out of range [0, {t_total}): {arr.tolist()}")
    ordered = np.sort(arr)
    if np.any(np.diff(ordered) == 0):
        raise IndexRangeError(f"subset contains duplicate indices: {arr.tolist()}")
    return ordered


def similarity_from_features(features: ArrayLike) -> Matrix:
    """
    Cosine-similarity Gram matrix of the feature rows.

    Args:
        features: T x C matrix of feature vectors

    Returns:
        Symmetric T x T matrix with unit diagonal and entries in [-1, 1]

    Raises:
        DegenerateFeatureError: a row is all zeros
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise DimensionError(f"features must be T x C, got shape {f.shape}")
    if f.shape[0] == 0:
        raise EmptyInputError("features have no rows")
    norms = np.linalg.norm(f, axis=1)
    zero_rows = np.flatnonzero(norms == 0)
    if zero_rows.size:
        raise DegenerateFeatureError(f"feature rows {zero_rows.tolist()} are all zeros")

    unit = f / norms[:, None]
    sim = unit @ unit.T
    sim = np.clip((sim + sim.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def similarity_from_positions(t_total: int, bandwidth: float) -> Matrix:
    """
    Gaussian kernel on word-position distance, ``exp(-(i - j)^2 / (2 h^2))``.

    Used when no feature vectors are available (simulated distributions).
    """
    if t_total < 1:
        raise EmptyInputError("position similarity needs at least one position")
    if bandwidth <= 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {bandwidth}")
    positions = np.arange(t_total, dtype=np.float64)
    gap = positions[:, None] - positions[None, :]
    return np.exp(-(gap**2) / (2.0 * bandwidth**2))


def quality_from_attention(weights: ArrayLike, per_layer: bool = False) -> NDArray[np.float64]:
    """
    Average attention weights into a per-position quality vector.

    Args:
        weights: Attention tensor of shape (layers, summary_len, article_len);
            2-D input is read as (summary_len, article_len) and 1-D as a single step
        per_layer: Keep the layer axis and average only over summary positions

    Returns:
        Quality of length article_len, or (layers, article_len) when ``per_layer``

    Raises:
        EmptyInputError: empty tensor
        DegenerateQualityError: negative weights or no positive entry
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise EmptyInputError("attention tensor is empty")
    if w.ndim == 1:
        w = w[None, None, :]
    elif w.ndim == 2:
        w = w[None, :, :]
    elif w.ndim != 3:
        raise DimensionError(f"attention tensor must have 1-3 axes, got {w.ndim}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateQualityError("attention weights must be finite and non-negative")

    quality = w.mean(axis=1) if per_layer else w.mean(axis=(0, 1))
    if not np.all(quality.reshape(-1, quality.shape[-1]).max(axis=-1) > 0):
        raise DegenerateQualityError("quality vector has no strictly positive entry")
    return quality


def build_l(quality: ArrayLike, similarity: ArrayLike) -> NDArray[np.float64]:
    """
    L-ensemble ``L_ij = q_i * s_ij * q_j`` (the Hadamard product of Q = q q^T and S).

    Leading axes broadcast, so a (layers, T) quality with a T x T similarity yields
    one L per layer.

    Raises:
        DimensionError: length mismatch between q and s
    """
    q = np.asarray(quality, dtype=np.float64)
    s = np.asarray(similarity, dtype=np.float64)
    if q.ndim < 1 or s.ndim < 2 or s.shape[-1] != s.shape[-2] or q.shape[-1] != s.shape[-1]:
        raise DimensionError(f"quality {q.shape} and similarity {s.shape} do not agree")
    l = q[..., :, None] * s * q[..., None, :]
    return (l + np.swapaxes(l, -1, -2)) / 2.0


def marginal_kernel(l: ArrayLike) -> Matrix:
    """
    Marginal kernel ``K = I - (L + I)^{-1}``; ``K_ii`` is the inclusion probability of i.
    """
    arr = as_symmetric(l, "L")
    n = arr.shape[0]
    kernel = np.eye(n) - psd_inverse(arr + np.eye(n))
    return (kernel + kernel.T) / 2.0


def principal_submatrix(l: ArrayLike, subset: ArrayLike) -> Matrix:
    """Rows and columns of L indexed by ``subset`` (L_Y)."""
    arr = np.asarray(l, dtype=np.float64)
    y = as_subset(subset, arr.shape[0])
    return arr[np.ix_(y, y)]


def log_qd_score(l: ArrayLike, subset: ArrayLike) -> float:
    """``log det(L_Y) - log det(L + I)`` with the eigenvalue floor."""
    arr = as_symmetric(l, "L")
    sub = principal_submatrix(arr, subset)
    return log_det_psd(sub) - log_det_psd(arr + np.eye(arr.shape[0]))


def qd_score(l: ArrayLike, subset: ArrayLike) -> float:
    """
    QD-score ``det(L_Y) / det(L + I)``: the probability of drawing exactly Y.

    The empty subset scores ``1 / det(L + I)``.

    Examples:
        >>> qd_score(np.eye(3), [0])
        0.125
    """
    return math.exp(log_qd_score(l, subset))


def trace_marginals(l: ArrayLike) -> Vector:
    """Inclusion probabilities ``diag(K)``."""
    return as_vector(np.diag(marginal_kernel(l)))
