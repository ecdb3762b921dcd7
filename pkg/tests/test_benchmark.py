import numpy as np
import pytest

from app.exceptions import InvalidParameterError, MemoryBudgetError, SubsetSizeError
from app.schemas.bench import BENCH_CSV_HEADER, BenchRecord
from app.services.benchmark import BenchmarkService, get_benchmark_service, random_psd_batch
from app.services.sampling import make_rng


def _medians(records: list[BenchRecord], size: int) -> dict[str, float]:
    return {r.method: r.wall_seconds for r in records if r.size == size}


class TestRandomBatch:
    def test_symmetric_psd(self, rng):
        ls = random_psd_batch(3, 10, rng)
        assert ls.shape == (3, 10, 10)
        for l in ls:
            assert np.allclose(l, l.T)
            assert np.linalg.eigvalsh(l).min() > -1e-10


class TestBenchSpeed:
    def test_records_per_size_and_method(self):
        records = BenchmarkService().bench_speed([8, 16], batch=4, t=3, repeats=3, seed=0)
        assert [(r.size, r.method) for r in records] == [
            (8, "classic-sampling"),
            (8, "fgm"),
            (8, "bfgm"),
            (16, "classic-sampling"),
            (16, "fgm"),
            (16, "bfgm"),
        ]
        assert all(r.wall_seconds > 0 and r.repeats == 3 for r in records)

    def test_greedy_methods_agree(self):
        records = BenchmarkService().bench_speed([12], batch=5, t=4, repeats=3, seed=1, threads=2)
        by_method = {r.method: r for r in records}
        assert by_method["classic-sampling"].agrees_with_fgm is None
        assert by_method["fgm"].agrees_with_fgm is True
        assert by_method["bfgm"].agrees_with_fgm is True
        assert by_method["bfgm-parallel"].agrees_with_fgm is True
        assert by_method["bfgm-parallel"].threads == 2

    def test_same_seed_same_subsets(self):
        service = BenchmarkService()
        first = service.bench_size(10, 3, 4, 3, make_rng(5)).subsets
        second = service.bench_size(10, 3, 4, 3, make_rng(5)).subsets
        assert first == second

    def test_too_few_repeats(self):
        with pytest.raises(InvalidParameterError):
            BenchmarkService().bench_speed([8], batch=2, t=2, repeats=2, seed=0)

    def test_t_larger_than_size(self):
        with pytest.raises(SubsetSizeError):
            BenchmarkService().bench_speed([8, 4], batch=2, t=6, repeats=3, seed=0)

    def test_memory_budget_default(self):
        with pytest.raises(MemoryBudgetError):
            BenchmarkService().bench_speed([1024], batch=1000, t=20, repeats=3, seed=0)

    def test_memory_budget_from_environment(self, monkeypatch):
        monkeypatch.setenv("DPP_BENCH_MEMORY_BUDGET_MB", "1")
        with pytest.raises(MemoryBudgetError):
            BenchmarkService().bench_speed([64, 512], batch=10, t=4, repeats=3, seed=0)

    def test_shared_service(self):
        assert get_benchmark_service() is get_benchmark_service()


class TestBenchRecord:
    def test_csv_row(self):
        record = BenchRecord(
            method="bfgm", size=64, batch=100, t=20, wall_seconds=0.5, repeats=5, agrees_with_fgm=True
        )
        row = record.csv_row()
        assert len(row) == len(BENCH_CSV_HEADER)
        assert row == ["bfgm", "64", "100", "20", "5.000000e-01", "5", "1", "true"]

    def test_invariants(self):
        with pytest.raises(ValueError):
            BenchRecord(method="fgm", size=8, batch=1, t=2, wall_seconds=0.0, repeats=5)
        with pytest.raises(ValueError):
            BenchRecord(method="fgm", size=8, batch=1, t=2, wall_seconds=1.0, repeats=2)


@pytest.mark.slow
class TestBenchOrdering:
    def test_single_item_batch(self):
        medians = _medians(BenchmarkService().bench_speed([64], batch=1, t=20, repeats=7, seed=0), 64)
        ratio = medians["bfgm"] / medians["fgm"]
        assert 0.5 <= ratio <= 2.0

    def test_full_size_ordering(self):
        medians = _medians(BenchmarkService().bench_speed([1024], batch=100, t=20, repeats=3, seed=0), 1024)
        assert medians["bfgm"] < medians["fgm"] < medians["classic-sampling"]

    def test_sampling_gap_widens(self):
        records = BenchmarkService().bench_speed([256, 512, 1024], batch=100, t=20, repeats=3, seed=0)
        gaps = [_medians(records, n)["classic-sampling"] / _medians(records, n)["bfgm"] for n in (256, 512, 1024)]
        assert gaps[0] < gaps[1] < gaps[2]
