"""Configuration management using pydantic-settings."""

from functools import lru_cache
from typing import Literal

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Settings loaded from ``DPP_*`` environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="DPP_",
        extra="ignore",
    )

    # Application Settings
    log_level: str = "INFO"
    seed: int = 0

    # Reweighting / Micro DPPs
    gm_sigma: float = Field(default=3.0, gt=0)  # positions
    pi_mode: Literal["uniform", "attention"] = "attention"
    micro_gamma: float = Field(default=0.7, ge=0, le=1)
    micro_points: int = Field(default=20, ge=1)

    # Macro DPPs
    macro_gamma: float = Field(default=0.6, ge=0, le=1)
    macro_topk: int = Field(default=30, ge=1)
    equidistant_stride: int = Field(default=20, ge=1)
    equidistant_offset: int = Field(default=0, ge=0)

    # Toy trainer
    micro_refresh_every: int = Field(default=10, ge=1)
    toy_pi_mode: Literal["uniform", "attention"] = "uniform"
    toy_track_k: int = Field(default=20, ge=1)
    divergence_factor: float = Field(default=10.0, gt=1)
    divergence_floor: float = Field(default=1e-6, gt=0)
    peak_rel_height: float = Field(default=0.1, ge=0, lt=1)
    scene_feature_dim: int = Field(default=32, ge=1)

    # Benchmark
    bench_sizes: list[int] = [64, 128, 256, 512, 1024]
    bench_memory_budget_mb: int = 2048

    @model_validator(mode="after")
    def _offset_below_stride(self) -> "Settings":
        if self.equidistant_offset >= self.equidistant_stride:
            raise ValueError(
                f"equidistant_offset must be below equidistant_stride ({self.equidistant_stride}), "
                f"got {self.equidistant_offset}"
            )
        return self


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
