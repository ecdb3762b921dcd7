"""Speed benchmark of exact sampling against single and batched greedy MAP inference."""

from collections.abc import Callable
from typing import NamedTuple

import numpy as np

from app.config import get_settings
from app.exceptions import InvalidParameterError, MemoryBudgetError, SubsetSizeError
from app.schemas.bench import BenchMethod, BenchRecord
from app.services.greedy_map import bfgm_inference, fgm_inference
from app.services.lensemble import build_l
from app.services.sampling import exact_sample, make_rng, split_rng
from app.utils.logging import get_logger
from app.utils.timing import format_seconds, median_wall_time

logger = get_logger(__name__)

FEATURE_DIM = 64
MIN_REPEATS = 3


class SizeResult(NamedTuple):
    records: list[BenchRecord]
    subsets: dict[BenchMethod, list[list[int]]]


def random_psd_batch(batch: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    ``batch`` random L-ensembles of size ``size``.

    Each is built from uniform qualities in [0.1, 1) and the cosine similarity of
    Gaussian feature vectors, so every matrix is symmetric PSD by construction.
    """
    quality = rng.uniform(0.1, 1.0, (batch, size))
    features = rng.standard_normal((batch, size, FEATURE_DIM))
    features /= np.linalg.norm(features, axis=2, keepdims=True)
    similarity = features @ np.swapaxes(features, 1, 2)
    return build_l(quality, similarity)


class BenchmarkService:
    """Times classic sampling, looped fgm and batched bfgm over a size grid."""

    def __init__(self):
        self.settings = get_settings()
        logger.info("BenchmarkService initialized")

    def check_memory(self, batch: int, size: int) -> None:
        """
        Raises:
            MemoryBudgetError: ``batch * size^2`` doubles exceed the budget
        """
        needed = batch * size * size * 8
        budget = self.settings.bench_memory_budget_mb * 1024 * 1024
        if needed > budget:
            raise MemoryBudgetError(
                f"batch {batch} at T={size} needs {needed / 2**20:.0f} MiB, "
                f"budget is {self.settings.bench_memory_budget_mb} MiB"
            )

    def bench_size(
        self,
        size: int,
        batch: int,
        t: int,
        repeats: int,
        rng: np.random.Generator,
        threads: int = 1,
    ) -> SizeResult:
        """Generate one batch and time every method on it; generation is not timed."""
        self.check_memory(batch, size)
        ls = random_psd_batch(batch, size, rng)
        sample_seed = int(rng.integers(2**32))

        def classic() -> list[list[int]]:
            sampler_rng = make_rng(sample_seed)
            return [exact_sample(l, sampler_rng).tolist() for l in ls]

        def fgm_looped() -> list[list[int]]:
            return [fgm_inference(l, t).indices for l in ls]

        def bfgm_batched(n_threads: int) -> Callable[[], list[list[int]]]:
            return lambda: [sel.indices for sel in bfgm_inference(ls, t, threads=n_threads)]

        methods: list[tuple[BenchMethod, Callable[[], list[list[int]]], int]] = [
            ("classic-sampling", classic, 1),
            ("fgm", fgm_looped, 1),
            ("bfgm", bfgm_batched(1), 1),
        ]
        if threads > 1:
            methods.append(("bfgm-parallel", bfgm_batched(threads), threads))

        records = []
        subsets: dict[BenchMethod, list[list[int]]] = {}
        for method, fn, n_threads in methods:
            seconds, result = median_wall_time(fn, repeats)
            subsets[method] = result
            agrees = None if method == "classic-sampling" else result == subsets["fgm"]
            records.append(
                BenchRecord(
                    method=method,
                    size=size,
                    batch=batch,
                    t=t,
                    wall_seconds=max(seconds, 1e-9),
                    repeats=repeats,
                    threads=n_threads,
                    agrees_with_fgm=agrees,
                )
            )
            logger.info(f"   T={size} {method:<16} {format_seconds(seconds)}")
            if agrees is False:
                logger.warning(f"⚠️ {method} subsets differ from fgm at T={size}")
        return SizeResult(records=records, subsets=subsets)

    def bench_speed(
        self,
        sizes: list[int],
        batch: int,
        t: int,
        repeats: int,
        seed: int,
        threads: int = 1,
    ) -> list[BenchRecord]:
        """
        Median wall time per method and size.

        Args:
            sizes: Ground-set sizes, each at least ``t``
            batch: L-ensembles per size
            t: Greedy subset size
            repeats: Timed runs per method (median reported), at least 3
            seed: Root seed, split into one source per size
            threads: Add a ``bfgm-parallel`` run with this many threads when > 1

        Returns:
            Records in size-major, method-minor order

        Raises:
            MemoryBudgetError: a size exceeds the memory budget (checked before any timing)
        """
        if batch < 1:
            raise InvalidParameterError(f"batch must be >= 1, got {batch}")
        if repeats < MIN_REPEATS:
            raise InvalidParameterError(f"repeats must be >= {MIN_REPEATS}, got {repeats}")
        if threads < 1:
            raise InvalidParameterError(f"threads must be >= 1, got {threads}")
        if not sizes:
            raise InvalidParameterError("no sizes to benchmark")
        for size in sizes:
            if size < t or t < 1:
                raise SubsetSizeError(f"t must be in [1, {size}] for size {size}, got {t}")
            self.check_memory(batch, size)

        logger.info(f"⏱️ Benchmark: sizes={sizes}, batch={batch}, t={t}, repeats={repeats}, threads={threads}")
        records = []
        for size, rng in zip(sizes, split_rng(seed, len(sizes))):
            records.extend(self.bench_size(size, batch, t, repeats, rng, threads).records)
        logger.info(f"✅ Benchmark complete: {len(records)} records")
        return records


# Singleton instance
_benchmark_service: BenchmarkService | None = None


def get_benchmark_service() -> BenchmarkService:
    """Get or create the benchmark service instance."""
    global _benchmark_service
    if _benchmark_service is None:
        _benchmark_service = BenchmarkService()
    return _benchmark_service
