"""Pydantic schemas for speed benchmark records."""

from typing import Literal

from pydantic import BaseModel, Field

BenchMethod = Literal["classic-sampling", "fgm", "bfgm", "bfgm-parallel"]


class BenchRecord(BaseModel):
    """Median wall time of one method at one ground-set size."""

    method: BenchMethod
    size: int = Field(ge=1, description="Ground-set size T")
    batch: int = Field(ge=1, description="Number of L-ensembles per timed run")
    t: int = Field(ge=1, description="Subset size for greedy MAP")
    wall_seconds: float = Field(gt=0, description="Median over repeats")
    repeats: int = Field(ge=3)
    threads: int = Field(default=1, ge=1)
    agrees_with_fgm: bool | None = Field(
        default=None, description="Greedy subsets equal per-item fgm; None for sampling"
    )

    def csv_row(self) -> list[str]:
        agrees = "" if self.agrees_with_fgm is None else str(self.agrees_with_fgm).lower()
        return [
            self.method,
            str(self.size),
            str(self.batch),
            str(self.t),
            f"{self.wall_seconds:.6e}",
            str(self.repeats),
            str(self.threads),
            agrees,
        ]


BENCH_CSV_HEADER = ["method", "size", "batch", "t", "wall_seconds", "repeats", "threads", "agrees_with_fgm"]
