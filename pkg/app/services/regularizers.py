"""Macro and Micro DPP regularization losses and their analytic gradients."""

from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from app.exceptions import (
    DimensionError,
    EmptyInputError,
    InvalidParameterError,
    SubsetSizeError,
)
from app.schemas.dpp import GaussianMixture, LossBreakdown, MacroCondition, MacroGradient, PiMode
from app.services.greedy_map import bfgm_inference, fgm_inference
from app.services.lensemble import as_subset, build_l, principal_submatrix
from app.services.numerics import (
    EIGEN_FLOOR,
    Vector,
    as_symmetric,
    as_vector,
    kl_divergence,
    log_det_psd,
    psd_inverse,
    softmax,
    sym_eigh,
)
from app.services.sampling import conditional_subset
from app.utils.logging import get_logger

logger = get_logger(__name__)


class MicroOutcome(NamedTuple):
    """Greedy points, the ideal distribution built around them and the KL loss."""

    points: list[int]
    ideal: Vector
    loss: float


class MacroOutcome(NamedTuple):
    """Subset chosen under a Macro condition, its QD loss and the quality gradient."""

    condition: MacroCondition
    subset: list[int]
    loss: float
    gradient: MacroGradient


def macro_qd_loss(l: ArrayLike, subset: ArrayLike) -> float:
    """
    Macro QD loss ``sum log eig(L + I) - sum log eig(L_Y)`` = ``-log qd_score(L, Y)``.

    Raises:
        EmptyInputError: empty subset
        NotPSDError: L not positive semidefinite
    """
    arr = as_symmetric(l, "L")
    y = as_subset(subset, arr.shape[0])
    if y.size == 0:
        raise EmptyInputError("Macro QD loss needs a nonempty subset")
    return log_det_psd(arr + np.eye(arr.shape[0])) - log_det_psd(principal_submatrix(arr, y))


def combine_loss(task: float, reg: float, gamma: float) -> LossBreakdown:
    """
    ``gamma * task + (1 - gamma) * reg``.

    Raises:
        InvalidParameterError: gamma outside [0, 1]
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError(f"gamma must be in [0, 1], got {gamma}")
    return LossBreakdown(
        task_loss=task,
        reg_loss=reg,
        gamma=gamma,
        total=gamma * task + (1.0 - gamma) * reg,
    )


def gaussian_mixture(
    points: ArrayLike,
    attn: ArrayLike,
    sigma: float,
    pi_mode: PiMode,
    t_total: int,
) -> GaussianMixture:
    """
    Mixture centred on ``points`` with shared width ``sigma``.

    Attention-proportional weights fall back to uniform when the attention at
    every point is zero.
    """
    y = as_subset(points, t_total)
    if y.size == 0:
        raise EmptyInputError("Gaussian mixture needs at least one point")
    if sigma <= 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")

    weights = np.full(y.size, 1.0 / y.size)
    if PiMode(pi_mode) is PiMode.ATTENTION:
        a = as_vector(attn, "attention")
        if a.size != t_total:
            raise DimensionError(f"attention length {a.size} != t_total {t_total}")
        mass = a[y]
        if mass.sum() > 0:
            weights = mass / mass.sum()

    return GaussianMixture(
        means=y.astype(np.float64).tolist(),
        width=sigma,
        weights=weights.tolist(),
        t_total=t_total,
    )


def gm_ideal_distribution(
    points: ArrayLike,
    attn: ArrayLike,
    sigma: float,
    pi_mode: PiMode,
    t_total: int,
) -> Vector:
    """
    Ideal attention: a Gaussian mixture around ``points`` evaluated at every position.

    Args:
        points: Focus positions (e.g. greedy MAP subset)
        attn: Current attention, used for attention-proportional weights
        sigma: Shared component width in positions
        pi_mode: ``uniform`` or ``attention``
        t_total: Number of positions

    Returns:
        Distribution over ``t_total`` positions summing to 1
    """
    return gaussian_mixture(points, attn, sigma, pi_mode, t_total).evaluate()


def micro_kl_loss(ideal: ArrayLike, attn: ArrayLike) -> float:
    """``KL(ideal || attn)``."""
    return kl_divergence(ideal, attn)


def micro_pipeline(
    l: ArrayLike,
    attn: ArrayLike,
    n_points: int = 20,
    sigma: float = 3.0,
    pi_mode: PiMode = PiMode.ATTENTION,
) -> MicroOutcome:
    """
    Greedy MAP points -> Gaussian-mixture ideal -> KL loss for one L-ensemble.

    Raises:
        SubsetSizeError: n_points larger than T
    """
    a = as_vector(attn, "attention")
    if n_points > a.size:
        raise SubsetSizeError(f"n_points ({n_points}) exceeds the number of positions ({a.size})")
    selection = fgm_inference(l, n_points)
    return _micro_outcome(selection.indices, a, sigma, pi_mode)


def micro_pipeline_batch(
    ls: ArrayLike,
    attns: ArrayLike,
    n_points: int = 20,
    sigma: float = 3.0,
    pi_mode: PiMode = PiMode.ATTENTION,
) -> list[MicroOutcome]:
    """Micro pipeline over a batch, selecting points for all rows at once."""
    a = np.asarray(attns, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"batched attention must be (B, T), got {a.shape}")
    if n_points > a.shape[1]:
        raise SubsetSizeError(f"n_points ({n_points}) exceeds the number of positions ({a.shape[1]})")
    selections = bfgm_inference(ls, n_points)
    if len(selections) != a.shape[0]:
        raise DimensionError(f"{len(selections)} L-ensembles but {a.shape[0]} attention rows")
    return [_micro_outcome(sel.indices, row, sigma, pi_mode) for sel, row in zip(selections, a)]


def _micro_outcome(points: list[int], attn: Vector, sigma: float, pi_mode: PiMode) -> MicroOutcome:
    if not points:
        # No item cleared the gain floor; the attention is its own target.
        return MicroOutcome(points=[], ideal=attn / attn.sum(), loss=0.0)
    ideal = gm_ideal_distribution(points, attn, sigma, pi_mode, attn.size)
    return MicroOutcome(points=list(points), ideal=ideal, loss=micro_kl_loss(ideal, attn))


def grad_macro_wrt_quality(
    quality: ArrayLike,
    similarity: ArrayLike,
    subset: ArrayLike,
    condition: MacroCondition,
) -> MacroGradient:
    """
    Gradient of the Macro QD loss with respect to the quality vector.

    With ``L = diag(q) S diag(q)`` and ``d log det(M) / dM = M^{-1}``,
    ``d loss / dq = 2 ((L + I)^{-1} * S) q - 2 ((L_Y)^{-1} * S_Y) q_Y`` (Hadamard
    products, the second term scattered onto Y).

    Under improve-diversity-given-quality the quality path is detached and the
    gradient is exactly zero. When ``L_Y`` reaches the eigenvalue floor the
    subset is flagged singular and the gradient is zeroed.
    """
    q = as_vector(quality, "quality")
    s = as_symmetric(similarity, "similarity")
    if s.shape[0] != q.size:
        raise DimensionError(f"quality length {q.size} != similarity size {s.shape[0]}")
    y = as_subset(subset, q.size)
    if y.size == 0:
        raise EmptyInputError("Macro gradient needs a nonempty subset")

    zeros = [0.0] * q.size
    if MacroCondition(condition) is MacroCondition.IMPROVE_DIVERSITY:
        return MacroGradient(condition=condition, gradient=zeros)

    l = build_l(q, s)
    eigvals, eigvecs = sym_eigh(l[np.ix_(y, y)])
    if eigvals[0] <= EIGEN_FLOOR:
        logger.debug(f"L_Y singular (min eigenvalue {eigvals[0]:.3e}); gradient zeroed")
        return MacroGradient(condition=condition, gradient=zeros, singular=True)

    full_inv = psd_inverse(l + np.eye(q.size))
    sub_inv = (eigvecs / eigvals) @ eigvecs.T

    grad = 2.0 * (full_inv * s) @ q
    grad[y] -= 2.0 * (sub_inv * s[np.ix_(y, y)]) @ q[y]
    return MacroGradient(condition=condition, gradient=grad.tolist())


def grad_micro_wrt_attention(ideal: ArrayLike, logits: ArrayLike) -> Vector:
    """
    Gradient of ``KL(ideal || softmax(z))`` with respect to the logits z.

    The ideal distribution is a constant target, so the gradient is
    ``softmax(z) - ideal``.
    """
    p = as_vector(ideal, "ideal")
    z = as_vector(logits, "logits")
    if p.shape != z.shape:
        raise DimensionError(f"ideal length {p.size} != logits length {z.size}")
    return softmax(z) - p


def softmax_backward(attn: Vector, grad_attn: Vector) -> Vector:
    """Pull a gradient on ``a = softmax(z)`` back onto z: ``a * (g - <a, g>)``."""
    return attn * (grad_attn - attn @ grad_attn)


def macro_pipeline(
    quality: ArrayLike,
    similarity: ArrayLike,
    condition: MacroCondition,
    k: int = 30,
    stride: int = 20,
    offset: int = 0,
) -> MacroOutcome:
    """Conditional subset -> QD loss -> quality gradient for one sample."""
    q = as_vector(quality, "quality")
    subset = conditional_subset(q, condition, k, stride, offset)
    l = build_l(q, similarity)
    return MacroOutcome(
        condition=condition,
        subset=subset.tolist(),
        loss=macro_qd_loss(l, subset),
        gradient=grad_macro_wrt_quality(q, similarity, subset, condition),
    )
