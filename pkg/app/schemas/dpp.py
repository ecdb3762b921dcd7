"""Pydantic schemas for DPP inference and regularization results."""

from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class MacroCondition(str, Enum):
    """Conditional subset selection used by Macro DPPs."""

    IMPROVE_DIVERSITY = "improve-diversity-given-quality"
    IMPROVE_QUALITY = "improve-quality-given-diversity"


class PiMode(str, Enum):
    """How Gaussian-mixture component weights are assigned."""

    UNIFORM = "uniform"
    ATTENTION = "attention"


class GreedySelection(BaseModel):
    """Result of greedy MAP inference on one L-ensemble."""

    indices: list[int] = Field(description="Selected items in selection order")
    gains: list[float] = Field(
        description="Per-step marginal gain log det(L_{Y+j}) - log det(L_Y)"
    )
    stopped_early: bool = Field(
        default=False, description="Residual gains fell below the floor before t items"
    )
    error: str | None = Field(default=None, description="Per-item failure in a batch")

    @property
    def subset(self) -> list[int]:
        """Selected items in ascending order."""
        return sorted(self.indices)


class GaussianMixture(BaseModel):
    """Discrete Gaussian mixture over word positions."""

    means: list[float] = Field(min_length=1, description="Component centres (positions)")
    width: float = Field(gt=0, description="Shared standard deviation in positions")
    weights: list[float] = Field(description="Mixture weights on the simplex")
    t_total: int = Field(ge=1, description="Number of positions")

    @field_validator("weights")
    @classmethod
    def _check_simplex(cls, weights: list[float]) -> list[float]:
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        return weights

    @model_validator(mode="after")
    def _check_layout(self) -> "GaussianMixture":
        if len(self.means) != len(self.weights):
            raise ValueError("means and weights must have the same length")
        if any(not 0 <= m < self.t_total for m in self.means):
            raise ValueError(f"means must lie in [0, {self.t_total})")
        return self

    def evaluate(self) -> np.ndarray:
        """Mixture density at integer positions, renormalised to sum to 1."""
        positions = np.arange(self.t_total, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        density = weights @ np.exp(-((positions[None, :] - means[:, None]) ** 2) / (2.0 * self.width**2))
        return density / density.sum()


class LossBreakdown(BaseModel):
    """Task loss, regularization loss and their gamma-weighted total."""

    task_loss: float
    reg_loss: float
    gamma: float = Field(ge=0, le=1)
    total: float

    @model_validator(mode="after")
    def _check_total(self) -> "LossBreakdown":
        expected = self.gamma * self.task_loss + (1.0 - self.gamma) * self.reg_loss
        if abs(self.total - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("total must equal gamma * task_loss + (1 - gamma) * reg_loss")
        return self


class MacroGradient(BaseModel):
    """Gradient of the Macro QD loss with respect to the quality vector."""

    condition: MacroCondition
    gradient: list[float]
    singular: bool = Field(
        default=False, description="L_Y hit the eigenvalue floor; gradient zeroed"
    )
