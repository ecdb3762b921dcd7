import math
from collections import Counter

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.exceptions import InvalidParameterError, NotPSDError, OracleTooLargeError, SubsetSizeError
from app.schemas.dpp import MacroCondition
from app.services.lensemble import marginal_kernel, qd_score
from app.services.sampling import (
    SpectralSampler,
    brute_force_map,
    conditional_subset,
    equidistant_subset,
    exact_sample,
    make_rng,
    pick_macro_condition,
    pick_macro_conditions,
    split_rng,
    topk_quality_subset,
)
from tests.oracles import all_subsets, enumerate_map, make_psd


class TestExactSample:
    def test_zero_matrix_gives_empty(self, rng):
        for _ in range(50):
            assert exact_sample(np.zeros((4, 4)), rng).size == 0

    def test_diagonal_independence(self, rng):
        draws = SpectralSampler(np.eye(2)).sample_many(50_000, rng)
        counts = np.zeros(2)
        for d in draws:
            counts[d] += 1
        assert_allclose(counts / 50_000, [0.5, 0.5], atol=0.02)

    def test_inclusion_matches_marginal_kernel(self, random_psd):
        l = random_psd(5)
        draws = SpectralSampler(l).sample_many(50_000, make_rng(3))
        counts = np.zeros(5)
        for d in draws:
            counts[d] += 1
        assert_allclose(counts / 50_000, np.diag(marginal_kernel(l)), atol=0.02)

    def test_classic_loop_inclusion(self, random_psd):
        l = random_psd(4)
        sampler = SpectralSampler(l)
        rng = make_rng(11)
        counts = np.zeros(4)
        for _ in range(20_000):
            counts[sampler.sample(rng)] += 1
        assert_allclose(counts / 20_000, np.diag(marginal_kernel(l)), atol=0.02)

    def test_exact_sample_subset_frequencies(self):
        l = make_psd(make_rng(23), 4)
        rng = make_rng(24)
        freq = Counter(tuple(exact_sample(l, rng).tolist()) for _ in range(40_000))
        for y in all_subsets(4):
            assert abs(freq[y] / 40_000 - qd_score(l, list(y))) < 0.01

    def test_subset_frequencies_match_qd_scores(self):
        source = make_rng(5)
        for trial in range(5):
            n = 4 + trial % 2
            l = make_psd(source, n)
            draws = SpectralSampler(l).sample_many(200_000, make_rng(100 + trial))
            freq = Counter(tuple(d.tolist()) for d in draws)
            for y in all_subsets(n):
                assert abs(freq[y] / 200_000 - qd_score(l, list(y))) < 0.01

    def test_indefinite_raises(self, rng):
        with pytest.raises(NotPSDError):
            exact_sample(np.array([[1.0, 2.0], [2.0, 1.0]]), rng)
        with pytest.raises(NotPSDError):
            SpectralSampler(np.diag([1.0, -0.5, 2.0]))

    def test_rank_deficient_accepted(self, random_psd, rng):
        draw = exact_sample(random_psd(6, rank=2), rng)
        assert draw.size <= 2

    def test_same_seed_same_draws(self, random_psd):
        l = random_psd(6)
        for _ in range(100):
            a = exact_sample(l, make_rng(42))
            b = exact_sample(l, make_rng(42))
            assert a.tolist() == b.tolist()

    def test_draws_are_sorted_and_unique(self, random_psd, rng):
        l = random_psd(8)
        for d in SpectralSampler(l).sample_many(500, rng):
            assert d.tolist() == sorted(set(d.tolist()))

    def test_split_rng_independent_streams(self):
        a, b = split_rng(7, 2)
        assert a.random() != b.random()
        assert [g.random() for g in split_rng(7, 3)] == [g.random() for g in split_rng(7, 3)]


class TestTopK:
    def test_tie_to_lower_index(self):
        assert topk_quality_subset([0.1, 0.5, 0.2, 0.2], 2).tolist() == [1, 2]

    def test_full(self):
        assert topk_quality_subset([0.3, 0.1, 0.2], 3).tolist() == [0, 1, 2]

    def test_matches_sort_oracle(self, rng):
        q = rng.random(12)
        expected = sorted(sorted(range(12), key=lambda i: -q[i])[:3])
        assert topk_quality_subset(q, 3).tolist() == expected

    def test_out_of_range(self):
        with pytest.raises(SubsetSizeError):
            topk_quality_subset([0.1, 0.2], 3)


class TestEquidistant:
    def test_progression(self):
        assert equidistant_subset(10, 3).tolist() == [0, 3, 6, 9]

    def test_stride_one(self):
        assert equidistant_subset(5, 1).tolist() == [0, 1, 2, 3, 4]

    def test_article_scale(self):
        assert equidistant_subset(600, 20).size == 30

    def test_offset(self):
        assert equidistant_subset(10, 4, offset=1).tolist() == [1, 5, 9]

    @pytest.mark.parametrize("stride, offset", [(0, 0), (3, 3), (3, -1)])
    def test_invalid(self, stride, offset):
        with pytest.raises(InvalidParameterError):
            equidistant_subset(10, stride, offset)


class TestMacroCondition:
    def test_deterministic(self):
        assert [pick_macro_condition(make_rng(9)) for _ in range(5)] == [pick_macro_condition(make_rng(9))] * 5

    def test_balanced(self):
        rng = make_rng(0)
        draws = [pick_macro_condition(rng) for _ in range(10_000)]
        share = sum(d is MacroCondition.IMPROVE_DIVERSITY for d in draws) / 10_000
        assert abs(share - 0.5) < 0.02

    def test_batch_shares_one_condition(self):
        conditions = pick_macro_conditions(make_rng(1), 8)
        assert len(set(conditions)) == 1 and len(conditions) == 8

    def test_per_sample_draws_vary(self):
        conditions = pick_macro_conditions(make_rng(1), 64, per_sample=True)
        assert set(conditions) == set(MacroCondition)

    def test_conditional_subsets(self):
        q = np.linspace(0.0, 1.0, 40)
        assert conditional_subset(q, MacroCondition.IMPROVE_DIVERSITY, 5, 20).tolist() == [35, 36, 37, 38, 39]
        assert conditional_subset(q, MacroCondition.IMPROVE_QUALITY, 5, 20).tolist() == [0, 20]

    def test_topk_capped_at_ground_set(self):
        assert conditional_subset([0.2, 0.3], MacroCondition.IMPROVE_DIVERSITY, 30, 20).tolist() == [0, 1]


class TestBruteForce:
    def test_diagonal(self):
        assert brute_force_map(np.diag([3.0, 2.0, 1.0]), 2).tolist() == [0, 1]

    def test_hand_pairs(self):
        l = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 0.5]])
        y = brute_force_map(l, 2)
        assert y.tolist() == [0, 2]
        assert math.isclose(np.linalg.det(l[np.ix_(y, y)]), 0.5)

    def test_matches_enumeration_oracle(self, random_psd):
        l = random_psd(8)
        assert tuple(brute_force_map(l, 3).tolist()) == enumerate_map(l, 3)

    def test_guard(self):
        with pytest.raises(OracleTooLargeError):
            brute_force_map(np.eye(21), 2)
