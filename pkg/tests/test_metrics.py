import numpy as np
import pytest
from scipy import stats

from shiftnas.errors import DegenerateRankingError, SpaceError
from shiftnas.metrics import (
    RankedPair,
    cross_task_rank,
    global_topk_hits,
    kendall_tau,
    sampling_fitness_correlation,
)


class TestKendallTau:
    def test_identical_orderings(self):
        assert kendall_tau([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0, abs=1e-12)

    def test_reversed_orderings(self):
        assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_pair_enumeration_example(self):
        # pairs: C=5, D=1 -> (5-1)/6
        assert kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(
            2 / 3, abs=1e-12
        )

    def test_matches_scipy_on_random_data(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(3, 20))
            xs = rng.normal(size=n)
            ys = rng.normal(size=n)
            expected = stats.kendalltau(xs, ys).statistic
            assert kendall_tau(xs, ys) == pytest.approx(expected, abs=1e-12)

    def test_matches_scipy_with_ties(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = int(rng.integers(4, 15))
            xs = rng.integers(0, 4, size=n).astype(float)
            ys = rng.integers(0, 4, size=n).astype(float)
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                continue
            expected = stats.kendalltau(xs, ys).statistic
            assert kendall_tau(xs, ys) == pytest.approx(expected, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DegenerateRankingError):
            kendall_tau([1, 2], [1, 2, 3])

    def test_all_tied_is_distinct_error(self):
        with pytest.raises(DegenerateRankingError, match="tied"):
            kendall_tau([1, 1, 1], [1, 2, 3])
        with pytest.raises(DegenerateRankingError, match="tied"):
            kendall_tau([1, 2, 3], [5, 5, 5])

    def test_swap_symmetry_and_negation_antisymmetry(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            xs = rng.normal(size=8)
            ys = rng.normal(size=8)
            assert kendall_tau(xs, ys) == pytest.approx(kendall_tau(ys, xs), abs=1e-12)
            assert kendall_tau(xs, -ys) == pytest.approx(-kendall_tau(xs, ys), abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(11)
        xs = rng.normal(size=10)
        ys = rng.normal(size=10)
        base = kendall_tau(xs, ys)
        assert kendall_tau(xs, np.exp(ys)) == pytest.approx(base, abs=1e-12)
        assert kendall_tau(xs, 3 * ys + 7) == pytest.approx(base, abs=1e-12)


def make_pairs(est, truth):
    return [
        RankedPair(id=f"g{i}", estimated=float(e), truth=float(t))
        for i, (e, t) in enumerate(zip(est, truth))
    ]


class TestGlobalTopkHits:
    def test_perfect_estimator(self):
        truth = np.arange(30.0)
        pairs = make_pairs(truth, truth)
        good = {f"g{i}" for i in range(20, 30)}
        assert global_topk_hits(pairs, good, k=10) == 10

    def test_negated_estimator(self):
        truth = np.arange(30.0)
        pairs = make_pairs(-truth, truth)
        good = {f"g{i}" for i in range(20, 30)}
        assert global_topk_hits(pairs, good, k=10) == 0

    def test_random_estimator_expectation(self):
        # 10 good of 30, random scores: hypergeometric mean = 10 * 10/30
        rng = np.random.default_rng(12)
        truth = np.arange(30.0)
        good = {f"g{i}" for i in range(20, 30)}
        total = 0
        trials = 10_000
        for _ in range(trials):
            pairs = make_pairs(rng.permutation(30).astype(float), truth)
            total += global_topk_hits(pairs, good, k=10)
        assert total / trials == pytest.approx(10 * 10 / 30, abs=0.1)

    def test_unknown_good_id_rejected(self):
        pairs = make_pairs([1, 2], [1, 2])
        with pytest.raises(SpaceError, match="not present"):
            global_topk_hits(pairs, {"nope"}, k=1)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(13)
        est = rng.normal(size=30)
        pairs = make_pairs(est, np.arange(30.0))
        pairs_t = make_pairs(np.exp(est) * 5, np.arange(30.0))
        good = {f"g{i}" for i in rng.choice(30, size=10, replace=False)}
        assert global_topk_hits(pairs, good, 10) == global_topk_hits(pairs_t, good, 10)

    def test_tie_break_by_id_is_deterministic(self):
        pairs = make_pairs([1.0, 1.0, 1.0], [1, 2, 3])
        assert global_topk_hits(pairs, {"g0"}, k=1) == 1
        assert global_topk_hits(pairs, {"g1"}, k=1) == 0


class TestSamplingFitnessCorrelation:
    def test_single_genome_degenerate(self):
        with pytest.raises(DegenerateRankingError):
            sampling_fitness_correlation([(0, 0)] * 5, {(0, 0): 1.0})

    def test_counts_proportional_to_rank(self):
        genomes = [(i,) for i in range(5)]
        truth = {g: float(i) for i, g in enumerate(genomes)}
        history = []
        for i, g in enumerate(genomes):
            history.extend([g] * (i + 1))
        assert sampling_fitness_correlation(history, truth) == pytest.approx(1.0)

    def test_accepts_events_with_genome_attr(self):
        class Ev:
            def __init__(self, g):
                self.genome = g

        history = [Ev((0,)), Ev((1,)), Ev((1,))]
        truth = {(0,): 0.0, (1,): 1.0}
        assert sampling_fitness_correlation(history, truth) == pytest.approx(1.0)


class TestCrossTaskRank:
    def test_identical_rankings(self):
        truth = np.arange(30.0)
        a = make_pairs(truth, truth)
        b = make_pairs(truth, truth)
        out = cross_task_rank(a, b, k=10)
        assert out["global_overlap"] == pytest.approx(1.0)
        assert out["local_tau"] == pytest.approx(1.0)

    def test_reversed_within_shared_top(self):
        # same top-k membership, reversed order inside it
        ids = list(range(12))
        truth_a = np.array(ids, dtype=float)
        truth_b = truth_a.copy()
        truth_b[8:] = truth_a[8:][::-1]  # reverse order of shared top 4
        a = make_pairs(truth_a, truth_a)
        b = make_pairs(truth_b, truth_b)
        out = cross_task_rank(a, b, k=4)
        assert out["global_overlap"] == pytest.approx(1.0)
        assert out["local_tau"] == pytest.approx(-1.0)

    def test_random_rankings_expected_overlap(self):
        rng = np.random.default_rng(14)
        trials = 2000
        total = 0.0
        base = np.arange(30.0)
        for _ in range(trials):
            a = make_pairs(base, rng.permutation(30).astype(float))
            b = make_pairs(base, rng.permutation(30).astype(float))
            try:
                out = cross_task_rank(a, b, k=10)
                total += out["global_overlap"]
            except DegenerateRankingError:
                # shared subset < 2: overlap was 0 or 1/10
                total += 0.0
        assert total / trials == pytest.approx(1 / 3, abs=0.03)

    def test_id_mismatch(self):
        a = make_pairs([1, 2], [1, 2])
        b = [RankedPair("other", 1.0, 1.0), RankedPair("g1", 2.0, 2.0)]
        with pytest.raises(SpaceError, match="universe"):
            cross_task_rank(a, b, k=1)
