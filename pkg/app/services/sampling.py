"""Exact DPP sampling, Macro conditional subsets and brute-force MAP oracle."""

import itertools
import math

import numpy as np
from numpy.typing import ArrayLike

from app.exceptions import (
    InvalidParameterError,
    NotPSDError,
    OracleTooLargeError,
    SubsetSizeError,
)
from app.schemas.dpp import MacroCondition
from app.services.lensemble import Subset
from app.services.numerics import (
    EIGEN_FLOOR,
    PSD_TOL,
    Matrix,
    Vector,
    as_symmetric,
    as_vector,
    sym_eigh,
    tolerance_scale,
)
from app.utils.logging import get_logger

logger = get_logger(__name__)

ORTHO_TOL = 1e-12
BRUTE_FORCE_MAX_T = 20
BRUTE_FORCE_MAX_SUBSETS = 200_000


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic PCG64 generator for ``seed``."""
    return np.random.default_rng(seed)


def split_rng(seed: int, n: int) -> list[np.random.Generator]:
    """``n`` statistically independent generators derived from one seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def _orthonormalize(basis: Matrix) -> Matrix:
    """Modified Gram-Schmidt on the columns; columns that collapse below ORTHO_TOL are dropped."""
    kept: list[Vector] = []
    for col in basis.T:
        v = col.copy()
        for u in kept:
            v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > ORTHO_TOL:
            kept.append(v / norm)
    if not kept:
        return np.zeros((basis.shape[0], 0))
    return np.stack(kept, axis=1)


def _pick(weights: Vector, u: float) -> int:
    """Inverse-CDF draw from non-negative ``weights``."""
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, weights.size - 1)


class SpectralSampler:
    """Exact sampler for the DPP defined by an L-ensemble.

    The eigendecomposition is computed once; every draw first selects an
    elementary DPP (eigenvector i kept with probability λ_i / (1 + λ_i)) and
    then samples from that projection DPP.

    Raises:
        NotPSDError: an eigenvalue below ``-PSD_TOL`` (scaled by the entry magnitude)
    """

    def __init__(self, l: ArrayLike):
        arr = as_symmetric(l, "L")
        eigvals, eigvecs = sym_eigh(arr)
        if eigvals.size and eigvals[0] < -PSD_TOL * tolerance_scale(arr):
            raise NotPSDError(f"L is not positive semidefinite (min eigenvalue {eigvals[0]:.3e})")
        self.size = arr.shape[0]
        self.eigvals = np.clip(eigvals, 0.0, None)
        self.eigvecs = eigvecs
        self.inclusion = self.eigvals / (1.0 + self.eigvals)

    def sample(self, rng: np.random.Generator) -> Subset:
        """One draw by the classic project-and-eliminate loop."""
        keep = rng.random(self.size) < self.inclusion
        basis = self.eigvecs[:, keep]
        chosen: list[int] = []

        while basis.shape[1] > 0:
            item = _pick(np.sum(basis**2, axis=1), rng.random())
            chosen.append(item)

            # Eliminate the component along e_item, then re-orthonormalise.
            col = int(np.argmax(np.abs(basis[item, :])))
            pivot = basis[:, col].copy()
            basis = basis - np.outer(pivot, basis[item, :] / pivot[item])
            basis = np.delete(basis, col, axis=1)
            basis = _orthonormalize(basis)

        return np.sort(np.asarray(chosen, dtype=np.int64))

    def sample_many(self, n: int, rng: np.random.Generator) -> list[Subset]:
        """
        ``n`` exact draws, vectorised over draws that share an elementary DPP.

        Each projection DPP with kernel K = V V^T is sampled item by item: the
        next item has probability proportional to its residual ``K_ii - |c_i|^2``,
        updated with the same incremental Cholesky step as greedy MAP inference.
        """
        masks = rng.random((n, self.size)) < self.inclusion
        patterns, inverse = np.unique(masks, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        draws: list[Subset] = [np.zeros(0, dtype=np.int64)] * n

        for group, pattern in enumerate(patterns):
            members = np.flatnonzero(inverse == group)
            k = int(pattern.sum())
            if k == 0:
                continue
            basis = self.eigvecs[:, pattern]
            chosen = self._sample_projection(basis @ basis.T, k, members.size, rng)
            for row, draw in zip(members, np.sort(chosen, axis=1)):
                draws[row] = draw

        return draws

    @staticmethod
    def _sample_projection(kernel: Matrix, k: int, g: int, rng: np.random.Generator) -> np.ndarray:
        n = kernel.shape[0]
        rows = np.arange(g)
        residual = np.tile(np.clip(np.diag(kernel), 0.0, None), (g, 1))
        coeffs = np.zeros((k, g, n))
        chosen = np.zeros((g, k), dtype=np.int64)

        for step in range(k):
            weights = np.clip(residual, 0.0, None)
            cdf = np.cumsum(weights, axis=1)
            u = rng.random(g) * cdf[:, -1]
            item = np.minimum((cdf <= u[:, None]).sum(axis=1), n - 1)
            chosen[:, step] = item
            if step == k - 1:
                break

            pivot = np.sqrt(np.maximum(residual[rows, item], EIGEN_FLOOR))
            proj = np.zeros((g, n))
            for prev in range(step):
                proj += coeffs[prev, rows, item][:, None] * coeffs[prev]
            e = (kernel[item, :] - proj) / pivot[:, None]
            coeffs[step] = e
            residual = residual - e**2
            residual[rows, item] = 0.0

        return chosen


def exact_sample(l: ArrayLike, rng: np.random.Generator) -> Subset:
    """
    Draw one subset Y with probability ``det(L_Y) / det(L + I)``.

    Args:
        l: PSD L-ensemble
        rng: Random source, advanced by the draw

    Returns:
        Sorted subset indices (possibly empty)
    """
    return SpectralSampler(l).sample(rng)


def topk_quality_subset(quality: ArrayLike, k: int) -> Subset:
    """
    Indices of the ``k`` largest quality values, ties to the lowest index, sorted.

    Raises:
        SubsetSizeError: k outside [1, T]
    """
    q = as_vector(quality, "quality")
    if not 1 <= k <= q.size:
        raise SubsetSizeError(f"k must be in [1, {q.size}], got {k}")
    order = np.argsort(-q, kind="stable")
    return np.sort(order[:k]).astype(np.int64)


def equidistant_subset(t_total: int, stride: int, offset: int = 0) -> Subset:
    """
    Positions ``offset, offset + stride, ...`` below ``t_total``.

    Examples:
        >>> equidistant_subset(10, 3).tolist()
        [0, 3, 6, 9]
    """
    if stride < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    if not 0 <= offset < stride:
        raise InvalidParameterError(f"offset must be in [0, {stride}), got {offset}")
    if t_total < 0:
        raise InvalidParameterError(f"t_total must be non-negative, got {t_total}")
    return np.arange(offset, t_total, stride, dtype=np.int64)


def pick_macro_condition(rng: np.random.Generator) -> MacroCondition:
    """Uniform choice between the two Macro conditions."""
    return list(MacroCondition)[int(rng.integers(2))]


def pick_macro_conditions(
    rng: np.random.Generator,
    batch: int,
    per_sample: bool = False,
) -> list[MacroCondition]:
    """
    Conditions for a batch: one shared draw, or one draw per sample.

    Args:
        rng: Random source
        batch: Number of samples in the batch
        per_sample: Draw independently for every sample

    Returns:
        ``batch`` conditions
    """
    if batch < 1:
        raise InvalidParameterError(f"batch must be >= 1, got {batch}")
    if per_sample:
        return [pick_macro_condition(rng) for _ in range(batch)]
    return [pick_macro_condition(rng)] * batch


def conditional_subset(
    quality: ArrayLike,
    condition: MacroCondition,
    k: int,
    stride: int,
    offset: int = 0,
) -> Subset:
    """
    Subset selected under a Macro condition.

    High-quality points (top-k attention) for improve-diversity-given-quality,
    equidistant positions for improve-quality-given-diversity. ``k`` is capped at T.
    """
    q = as_vector(quality, "quality")
    if condition is MacroCondition.IMPROVE_DIVERSITY:
        return topk_quality_subset(q, min(k, q.size))
    return equidistant_subset(q.size, stride, offset)


def brute_force_map(l: ArrayLike, t: int) -> Subset:
    """
    Exact ``argmax det(L_Y)`` over all size-t subsets (testing oracle).

    Ties resolve to the lexicographically smallest index list.

    Raises:
        SubsetSizeError: t outside [1, T]
        OracleTooLargeError: T > 20 or more than 200,000 candidate subsets
    """
    arr = as_symmetric(l, "L")
    n = arr.shape[0]
    if not 1 <= t <= n:
        raise SubsetSizeError(f"t must be in [1, {n}], got {t}")
    n_subsets = math.comb(n, t)
    if n > BRUTE_FORCE_MAX_T or n_subsets > BRUTE_FORCE_MAX_SUBSETS:
        raise OracleTooLargeError(f"enumeration of C({n}, {t}) = {n_subsets} subsets exceeds the guard")

    candidates = np.array(list(itertools.combinations(range(n), t)), dtype=np.int64)
    blocks = arr[candidates[:, :, None], candidates[:, None, :]]
    dets = np.linalg.det(blocks)
    best = int(np.argmax(dets))
    logger.debug(f"Brute-force MAP over {n_subsets} subsets: det = {dets[best]:.6e}")
    return candidates[best]
