"""Pydantic schemas for synthetic attention scenes, reweighting and toy training."""

from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.dpp import MacroCondition


class Regularizer(str, Enum):
    """Regularizer applied by the toy trainer."""

    MACRO = "macro"
    MICRO = "micro"


class SyntheticScene(BaseModel):
    """Simulated attention over ``t_total`` positions with matching feature vectors."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t_total: int = Field(ge=1)
    features: np.ndarray = Field(description="t_total x C feature matrix, unit rows")
    attention: np.ndarray = Field(description="Attention distribution over positions")
    seed: int | None = Field(default=None, description="Seed the scene was drawn from")

    @field_validator("features", "attention", mode="before")
    @classmethod
    def _as_float(cls, value: object) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_layout(self) -> "SyntheticScene":
        if self.attention.shape != (self.t_total,):
            raise ValueError(f"attention must have shape ({self.t_total},), got {self.attention.shape}")
        if self.features.ndim != 2 or self.features.shape[0] != self.t_total:
            raise ValueError(f"features must have {self.t_total} rows, got shape {self.features.shape}")
        if np.any(self.attention < 0) or abs(self.attention.sum() - 1.0) > 1e-9:
            raise ValueError("attention must be non-negative and sum to 1")
        return self


class ReweightReport(BaseModel):
    """One reweighting of a scene: the sampled points and the mixture built on them."""

    method: Literal["quality-only", "dpp"]
    points: list[int] = Field(description="Sampled positions, ascending")
    reweighted: list[float] = Field(description="Gaussian-mixture attention over positions")
    kl_to_original: float = Field(ge=0, description="KL(original || reweighted)")
    peak_count: int = Field(ge=1, description="Local maxima above the relative height threshold")


class TrainStep(BaseModel):
    """Losses and diagnostics of the toy trainer at one iteration."""

    iteration: int = Field(ge=0)
    total: float
    task: float
    reg: float
    entropy: float = Field(description="Shannon entropy of the attention, nats")
    qdscore: float = Field(ge=0, description="QD-score of the greedy top-k subset")
    log_qdscore: float
    condition: MacroCondition | None = Field(default=None, description="Macro condition of this step")


class TrainTrajectory(BaseModel):
    """Per-step records of one toy training run."""

    regularizer: Regularizer
    gamma: float = Field(ge=0, le=1)
    learning_rate: float = Field(ge=0)
    steps: list[TrainStep]
    final_attention: list[float]

    @field_validator("steps")
    @classmethod
    def _check_order(cls, steps: list[TrainStep]) -> list[TrainStep]:
        its = [s.iteration for s in steps]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ValueError("iterations must be strictly increasing")
        return steps

    @property
    def first(self) -> TrainStep:
        return self.steps[0]

    @property
    def last(self) -> TrainStep:
        return self.steps[-1]
