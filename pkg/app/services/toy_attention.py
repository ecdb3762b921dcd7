"""Synthetic attention scenes, dot-product attention, reweighting and the toy trainer.

Scenes stand in for a trained summarizer: a multi-peak attention curve over
article positions plus feature vectors that drift smoothly along the article.
The toy trainer optimises attention logits directly so the effect of the
Macro and Micro regularizers can be observed without a real model.
"""

import math
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import find_peaks
from scipy.stats import entropy

from app.config import Settings, get_settings
from app.exceptions import DimensionError, DivergenceError, InvalidParameterError, SubsetSizeError
from app.schemas.dpp import MacroCondition, PiMode
from app.schemas.toy import Regularizer, ReweightReport, SyntheticScene, TrainStep, TrainTrajectory
from app.services.greedy_map import fgm_inference
from app.services.lensemble import (
    build_l,
    log_qd_score,
    similarity_from_features,
    similarity_from_positions,
)
from app.services.numerics import Matrix, Vector, kl_divergence, softmax
from app.services.regularizers import (
    combine_loss,
    gm_ideal_distribution,
    grad_macro_wrt_quality,
    grad_micro_wrt_attention,
    macro_qd_loss,
    micro_kl_loss,
    micro_pipeline,
    softmax_backward,
)
from app.services.sampling import (
    conditional_subset,
    make_rng,
    pick_macro_condition,
    topk_quality_subset,
)
from app.utils.logging import get_logger

logger = get_logger(__name__)

WALK_STEP = 0.15
DEGENERATE_WINDOW = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 9.0
DEGENERATE_MASS = 0.9


class AttentionOutput(NamedTuple):
    weights: Matrix
    context: Matrix


def _as_rng(rng: np.random.Generator | int) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    return make_rng(int(rng)), int(rng)


def simulate_attention(
    t_total: int,
    n_peaks: int,
    rng: np.random.Generator | int,
    feature_dim: int | None = None,
) -> SyntheticScene:
    """
    Draw a multi-peak attention curve and smoothly varying features.

    The article is cut into ``n_peaks`` equal segments; each carries one Gaussian
    bump centred in the middle half of its segment with a width of at most an
    eighth of the segment, so every bump stays a separate local maximum.

    Args:
        t_total: Number of positions
        n_peaks: Number of attention peaks
        rng: Generator, or an integer seed
        feature_dim: Feature channels (defaults to ``scene_feature_dim``)

    Returns:
        Scene with normalised attention and unit-norm feature rows

    Raises:
        InvalidParameterError: n_peaks < 1 or t_total < 8 * n_peaks
    """
    if n_peaks < 1:
        raise InvalidParameterError(f"n_peaks must be >= 1, got {n_peaks}")
    if t_total < 8 * n_peaks:
        raise InvalidParameterError(f"t_total must be >= 8 * n_peaks ({8 * n_peaks}), got {t_total}")
    gen, seed = _as_rng(rng)
    dim = feature_dim or get_settings().scene_feature_dim

    segment = t_total / n_peaks
    starts = np.arange(n_peaks) * segment
    centres = starts + segment * gen.uniform(0.25, 0.75, n_peaks)
    width_hi = max(segment / 8.0, 1.0)
    widths = gen.uniform(min(1.5, width_hi), width_hi, n_peaks)
    heights = gen.uniform(0.4, 1.0, n_peaks)

    positions = np.arange(t_total, dtype=np.float64)
    curve = heights @ np.exp(-((positions[None, :] - centres[:, None]) ** 2) / (2.0 * widths[:, None] ** 2))
    attention = curve / curve.sum()

    walk = np.cumsum(
        np.vstack([gen.standard_normal(dim), WALK_STEP * gen.standard_normal((t_total - 1, dim))]),
        axis=0,
    )
    features = walk / np.linalg.norm(walk, axis=1, keepdims=True)

    logger.debug(f"Simulated scene: T={t_total}, peaks at {np.round(centres, 1).tolist()}")
    return SyntheticScene(t_total=t_total, features=features, attention=attention, seed=seed)


def degenerate_scene(scene: SyntheticScene) -> SyntheticScene:
    """
    Collapse a scene's attention onto one narrow peak.

    90% of the mass goes to a 5-position triangular window at the scene's
    highest position (shifted inward at the edges), the rest is spread
    uniformly. Features are kept.
    """
    t = scene.t_total
    if t < DEGENERATE_WINDOW.size:
        raise InvalidParameterError(f"degenerate scene needs at least {DEGENERATE_WINDOW.size} positions")
    half = DEGENERATE_WINDOW.size // 2
    centre = int(np.clip(np.argmax(scene.attention), half, t - 1 - half))

    attention = np.full(t, (1.0 - DEGENERATE_MASS) / t)
    attention[centre - half : centre + half + 1] += DEGENERATE_MASS * DEGENERATE_WINDOW
    return SyntheticScene(t_total=t, features=scene.features, attention=attention, seed=scene.seed)


def dot_product_attention(
    queries: ArrayLike,
    keys: ArrayLike,
    values: ArrayLike,
    scale: float | None = None,
) -> AttentionOutput:
    """
    Dot-product attention: row-wise softmax of ``Q K^T`` applied to the values.

    Args:
        queries: T_g x C decoder states
        keys: T_s x C encoder states
        values: T_s x C' values (keys plus embeddings, composed by the caller)
        scale: Optional factor applied to the scores before the softmax

    Returns:
        ``(weights, context)`` of shapes T_g x T_s and T_g x C'
    """
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise DimensionError("queries, keys and values must be 2-D")
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"queries have {q.shape[1]} channels, keys {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"{k.shape[0]} keys but {v.shape[0]} values")

    scores = q @ k.T
    if scale is not None:
        scores = scores * scale
    weights = softmax(scores, axis=1)
    return AttentionOutput(weights=weights, context=weights @ v)


def count_peaks(curve: ArrayLike, rel_height: float | None = None) -> int:
    """
    Local maxima of ``curve`` strictly above ``rel_height`` times its maximum.

    Endpoints can be peaks and a flat top counts once.
    """
    c = np.asarray(curve, dtype=np.float64)
    rel = get_settings().peak_rel_height if rel_height is None else rel_height
    padded = np.concatenate(([c.min() - 1.0], c, [c.min() - 1.0]))
    peaks, _ = find_peaks(padded)
    return int(np.count_nonzero(padded[peaks] > rel * c.max()))


def _reweight_report(
    method: Literal["quality-only", "dpp"],
    points: np.ndarray,
    scene: SyntheticScene,
    sigma: float,
    pi_mode: PiMode,
) -> ReweightReport:
    reweighted = gm_ideal_distribution(points, scene.attention, sigma, pi_mode, scene.t_total)
    return ReweightReport(
        method=method,
        points=np.sort(points).tolist(),
        reweighted=reweighted.tolist(),
        kl_to_original=kl_divergence(scene.attention, reweighted),
        peak_count=count_peaks(reweighted),
    )


def reweight_compare(
    scene: SyntheticScene,
    k: int,
    sigma: float,
    pi_mode: PiMode = PiMode.ATTENTION,
    similarity: Literal["features", "positions"] = "features",
) -> tuple[ReweightReport, ReweightReport]:
    """
    Reweight a scene from ``k`` points picked by quality alone and by greedy DPP MAP.

    Args:
        scene: Scene whose attention is the quality vector
        k: Number of points
        sigma: Mixture width in positions
        pi_mode: Mixture weighting
        similarity: Cosine similarity of the scene features, or a Gaussian
            kernel on position distance with bandwidth ``sigma``

    Returns:
        ``(quality_only, dpp)`` reports
    """
    if not 1 <= k <= scene.t_total:
        raise SubsetSizeError(f"k must be in [1, {scene.t_total}], got {k}")

    quality_points = topk_quality_subset(scene.attention, k)
    if k == scene.t_total:
        dpp_points = np.arange(scene.t_total)
    else:
        if similarity == "positions":
            sim = similarity_from_positions(scene.t_total, sigma)
        else:
            sim = similarity_from_features(scene.features)
        dpp_points = np.asarray(fgm_inference(build_l(scene.attention, sim), k).indices, dtype=np.int64)

    quality_only = _reweight_report("quality-only", quality_points, scene, sigma, pi_mode)
    dpp = _reweight_report("dpp", dpp_points, scene, sigma, pi_mode)
    logger.info(
        f"Reweighting (k={k}, σ={sigma}): quality-only KL={quality_only.kl_to_original:.4f} "
        f"peaks={quality_only.peak_count} | dpp KL={dpp.kl_to_original:.4f} peaks={dpp.peak_count}"
    )
    return quality_only, dpp


class ToyTrainer:
    """Gradient descent on attention logits under a task surrogate plus a DPP regularizer.

    The task term is ``KL(initial || softmax(z))``; it anchors the logits to the
    starting attention the way the likelihood anchors a real model.
    """

    def __init__(
        self,
        scene: SyntheticScene,
        regularizer: Regularizer,
        gamma: float,
        learning_rate: float,
        seed: int = 0,
        momentum: float = 0.0,
        max_grad_norm: float | None = None,
        settings: Settings | None = None,
    ):
        if not 0.0 <= gamma <= 1.0:
            raise InvalidParameterError(f"gamma must be in [0, 1], got {gamma}")
        if learning_rate < 0:
            raise InvalidParameterError(f"learning rate must be non-negative, got {learning_rate}")
        if not 0.0 <= momentum < 1.0:
            raise InvalidParameterError(f"momentum must be in [0, 1), got {momentum}")
        if max_grad_norm is not None and max_grad_norm <= 0:
            raise InvalidParameterError(f"max_grad_norm must be positive, got {max_grad_norm}")

        self.settings = settings or get_settings()
        self.scene = scene
        self.regularizer = Regularizer(regularizer)
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_grad_norm = max_grad_norm
        self.rng = make_rng(seed)

        self.initial = scene.attention.copy()
        self.similarity = similarity_from_features(scene.features)
        self.logits = np.log(np.clip(self.initial, 1e-30, None))
        self.velocity = np.zeros_like(self.logits)
        self.ideal: Vector | None = None
        self.reference: float | None = None

    def _macro_term(self, attn: Vector, l: Matrix) -> tuple[float, Vector, MacroCondition]:
        s = self.settings
        condition = pick_macro_condition(self.rng)
        subset = conditional_subset(attn, condition, s.macro_topk, s.equidistant_stride, s.equidistant_offset)
        reg = macro_qd_loss(l, subset)
        grad = grad_macro_wrt_quality(attn, self.similarity, subset, condition)
        return reg, softmax_backward(attn, np.asarray(grad.gradient)), condition

    def _micro_term(self, iteration: int, attn: Vector, l: Matrix) -> tuple[float, Vector]:
        s = self.settings
        if self.ideal is None or iteration % s.micro_refresh_every == 0:
            n_points = min(s.micro_points, attn.size)
            self.ideal = micro_pipeline(l, attn, n_points, s.gm_sigma, PiMode(s.toy_pi_mode)).ideal
        return micro_kl_loss(self.ideal, attn), grad_micro_wrt_attention(self.ideal, self.logits)

    def _track(self, l: Matrix) -> float:
        k = min(self.settings.toy_track_k, self.scene.t_total)
        return log_qd_score(l, fgm_inference(l, k).indices)

    def step(self, iteration: int) -> TrainStep:
        """Evaluate the losses at the current logits, record them, then take one update."""
        attn = softmax(self.logits)
        l = build_l(attn, self.similarity)

        task = kl_divergence(self.initial, attn)
        grad_task = grad_micro_wrt_attention(self.initial, self.logits)
        condition = None
        if self.regularizer is Regularizer.MACRO:
            reg, grad_reg, condition = self._macro_term(attn, l)
        else:
            reg, grad_reg = self._micro_term(iteration, attn, l)

        loss = combine_loss(task, reg, self.gamma)
        if self.reference is None:
            self.reference = max(abs(loss.total), self.settings.divergence_floor)
        elif loss.total > self.settings.divergence_factor * self.reference:
            raise DivergenceError(
                f"total loss {loss.total:.4g} at iteration {iteration} exceeds "
                f"{self.settings.divergence_factor}x the initial {self.reference:.4g}"
            )

        log_qd = self._track(l)
        record = TrainStep(
            iteration=iteration,
            total=loss.total,
            task=loss.task_loss,
            reg=loss.reg_loss,
            entropy=float(entropy(attn)),
            qdscore=math.exp(log_qd),
            log_qdscore=log_qd,
            condition=condition,
        )

        grad = self.gamma * grad_task + (1.0 - self.gamma) * grad_reg
        norm = float(np.linalg.norm(grad))
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            grad *= self.max_grad_norm / norm

        # Nesterov momentum in the look-ahead-free form; plain descent when momentum is 0.
        previous = self.velocity
        self.velocity = self.momentum * previous - self.learning_rate * grad
        self.logits = self.logits - self.momentum * previous + (1.0 + self.momentum) * self.velocity
        return record

    def run(self, steps: int) -> TrainTrajectory:
        if steps < 1:
            raise InvalidParameterError(f"steps must be >= 1, got {steps}")
        logger.info(
            f"🏋️ Toy training: {self.regularizer.value}, γ={self.gamma}, lr={self.learning_rate}, {steps} steps"
        )
        records = []
        for iteration in range(steps):
            records.append(self.step(iteration))
            if (iteration + 1) % 100 == 0:
                last = records[-1]
                logger.debug(f"   [{iteration + 1}/{steps}] total={last.total:.4f} entropy={last.entropy:.4f}")

        first, last = records[0], records[-1]
        logger.info(
            f"✅ Toy training complete: entropy {first.entropy:.4f} -> {last.entropy:.4f}, "
            f"log QD-score {first.log_qdscore:.4f} -> {last.log_qdscore:.4f}"
        )
        return TrainTrajectory(
            regularizer=self.regularizer,
            gamma=self.gamma,
            learning_rate=self.learning_rate,
            steps=records,
            final_attention=softmax(self.logits).tolist(),
        )


def train_toy(
    scene: SyntheticScene,
    regularizer: Regularizer,
    gamma: float,
    steps: int,
    learning_rate: float,
    seed: int = 0,
    momentum: float = 0.0,
    max_grad_norm: float | None = None,
    settings: Settings | None = None,
) -> TrainTrajectory:
    """
    Train attention logits on ``gamma * task + (1 - gamma) * reg``.

    The logits start at ``log(scene.attention)``; pass a degenerate scene to
    reproduce the narrow-attention starting point. Macro steps draw a condition
    per step; Micro steps refresh the ideal distribution every
    ``micro_refresh_every`` iterations and keep it fixed in between.
    ``settings`` overrides the cached settings, e.g. the Macro top-k, stride and offset.

    Raises:
        DivergenceError: total loss above ``divergence_factor`` times the first one
    """
    trainer = ToyTrainer(
        scene,
        regularizer,
        gamma,
        learning_rate,
        seed=seed,
        momentum=momentum,
        max_grad_norm=max_grad_norm,
        settings=settings,
    )
    return trainer.run(steps)
