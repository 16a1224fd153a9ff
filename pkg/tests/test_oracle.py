import itertools

import numpy as np
import pytest

from kndn import datagen, model, oracle, rtree, scoring, solver
from kndn.diversity import DiversityMeasure
from kndn.kernels import QueryContext

from conftest import full_query, make_dataset, make_uniform


class TestKnnLinear:
    def test_k_at_least_n_returns_everything_sorted(self):
        ds = make_dataset([[0.9], [0.1], [0.5]])
        got = oracle.knn_linear(ds, full_query(ds, [0.0], k=10, min_div=0.0))
        assert got.ids == (1, 2, 0)

    def test_k_one_nearest(self):
        ds = make_dataset([[0.9], [0.1], [0.5]])
        got = oracle.knn_linear(ds, full_query(ds, [0.45], k=1, min_div=0.0))
        assert got.ids == (2,)

    def test_reads_whole_table(self):
        ds = make_uniform(77, 2, seed=0)
        got = oracle.knn_linear(ds, full_query(ds, [0.5, 0.5], k=3, min_div=0.0))
        assert got.stats.tuples_read == 77

    def test_matches_buffered_at_min_div_zero(self, zipf_small):
        ds, tree = zipf_small
        rng = np.random.default_rng(91)
        for _ in range(100):
            q = full_query(ds, rng.random(ds.dim), k=int(rng.choice([1, 5, 10])), min_div=0.0)
            assert oracle.knn_linear(ds, q).ids == solver.buffered_greedy(ds, tree, q).ids


class TestSequentialScan:
    @pytest.mark.parametrize("seed", range(6))
    def test_identical_to_index_driven(self, seed):
        rng = np.random.default_rng(seed + 95)
        ds = make_uniform(int(rng.integers(30, 400)), int(rng.integers(2, 5)), seed=seed + 600)
        tree = rtree.build(ds)
        for min_div in (0.0, 0.1, 0.3):
            q = full_query(ds, rng.random(ds.dim), k=5, min_div=min_div)
            seq = oracle.sequential_scan_kndn(ds, q)
            unpruned = solver.buffered_greedy(ds, tree, q, prune=False)
            pruned = solver.buffered_greedy(ds, tree, q, prune=True)
            assert seq.ids == unpruned.ids == pruned.ids
            assert seq.result_hash() == unpruned.result_hash() == pruned.result_hash()

    def test_reads_everything_by_definition(self):
        ds = make_uniform(50, 2, seed=96)
        q = full_query(ds, [0.2, 0.2], k=3, min_div=0.1)
        assert oracle.sequential_scan_kndn(ds, q).stats.tuples_read == 50

    def test_min_div_zero_is_knn(self):
        ds = make_uniform(120, 3, seed=97)
        q = full_query(ds, [0.7, 0.1, 0.4], k=6, min_div=0.0)
        assert oracle.sequential_scan_kndn(ds, q).ids == oracle.knn_linear(ds, q).ids

    def test_partial_when_fewer_than_k(self):
        ds = make_dataset([[0.2], [0.8]])
        q = full_query(ds, [0.0], k=4, min_div=0.1)
        got = oracle.sequential_scan_kndn(ds, q)
        assert got.ids == (0, 1)


def brute_force_optimal(dataset, query):
    """Independent enumeration over all k-subsets containing the nearest."""
    ctx = QueryContext(dataset, query)
    measure = DiversityMeasure.from_query(dataset, query)
    dists = [scoring.spatialdist(dataset.values[i],
                                 [dataset.column(n) for n in query.point_names],
                                 query.point_values, query.metric)
             for i in range(dataset.n)]
    order = sorted(range(dataset.n), key=lambda i: (dists[i], i))
    nearest = order[0]
    k = min(query.k, dataset.n)
    for size in range(k, 0, -1):
        best = None
        for combo in itertools.combinations(order, size):
            if nearest not in combo:
                continue
            rows = [dataset.values[i] for i in combo]
            if not measure.fully_diverse(rows):
                continue
            s = scoring.score([dists[i] for i in combo], query.aggregate)
            key = (-s, tuple(sorted(combo)))
            if best is None or key < best:
                best = key
        if best is not None:
            return -best[0], best[1]
    return None


class TestOptimal:
    def test_min_div_zero_is_k_nearest(self):
        ds = make_uniform(40, 2, seed=98)
        q = full_query(ds, [0.3, 0.3], k=4, min_div=0.0)
        assert oracle.optimal_kndn(ds, q).ids == oracle.knn_linear(ds, q).ids

    def test_k_one_nearest(self):
        ds = make_uniform(40, 2, seed=99)
        q = full_query(ds, [0.3, 0.3], k=1, min_div=0.3)
        assert oracle.optimal_kndn(ds, q).ids == oracle.knn_linear(
            ds, full_query(ds, [0.3, 0.3], k=1, min_div=0.0)
        ).ids

    def test_small_planted_matches_brute_force(self):
        rng = np.random.default_rng(100)
        ds = make_dataset(rng.random((12, 2)))
        q = full_query(ds, [0.5, 0.5], k=3, min_div=0.25)
        got = oracle.optimal_kndn(ds, q)
        score, ids = brute_force_optimal(ds, q)
        assert tuple(sorted(got.ids)) == ids
        assert got.score == pytest.approx(score)

    @pytest.mark.parametrize("seed", range(10))
    def test_randomized_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed + 110)
        n = int(rng.integers(6, 14))
        ds = make_uniform(n, int(rng.integers(1, 4)), seed=seed + 700)
        for aggregate in model.AGGREGATES:
            q = full_query(ds, rng.random(ds.dim), k=3,
                           min_div=float(rng.uniform(0.05, 0.45)), aggregate=aggregate)
            got = oracle.optimal_kndn(ds, q)
            expect = brute_force_optimal(ds, q)
            diverse_ids = tuple(sorted(a.record.id for a in got.answers if a.diverse))
            assert diverse_ids == expect[1]

    def test_always_contains_nearest(self):
        rng = np.random.default_rng(120)
        for trial in range(20):
            ds = make_uniform(int(rng.integers(10, 60)), 2, seed=trial + 800)
            q = full_query(ds, rng.random(2), k=3, min_div=float(rng.uniform(0, 0.5)))
            got = oracle.optimal_kndn(ds, q)
            nearest = oracle.knn_linear(ds, full_query(ds, q.point_values, k=1, min_div=0.0)).ids[0]
            assert nearest in got.ids

    def test_never_worse_than_greedy(self):
        rng = np.random.default_rng(121)
        for trial in range(25):
            ds = make_uniform(int(rng.integers(20, 120)), 2, seed=trial + 900)
            tree = rtree.build(ds)
            q = full_query(ds, rng.random(2), k=4, min_div=float(rng.uniform(0.05, 0.35)))
            greedy = solver.buffered_greedy(ds, tree, q)
            best = oracle.optimal_kndn(ds, q)
            if greedy.fully_diverse and best.fully_diverse:
                assert best.score >= greedy.score - 1e-12

    def test_partial_maximum_cardinality_first(self):
        # only pairs can be diverse here, never triples
        ds = make_dataset([[0.5], [0.52], [0.9], [0.91]])
        q = full_query(ds, [0.5], k=3, min_div=0.3)
        got = oracle.optimal_kndn(ds, q)
        diverse = [a.record.id for a in got.answers if a.diverse]
        assert len(diverse) == 2 and 0 in diverse
        assert len(got.answers) == 3

    def test_limits_refused_with_complexity_note(self):
        ds = make_uniform(30, 2, seed=122)
        q = full_query(ds, [0.5, 0.5], k=3, min_div=0.1)
        with pytest.raises(oracle.OracleLimitError, match="candidate sets"):
            oracle.optimal_kndn(ds, q, n_limit=10)
        with pytest.raises(oracle.OracleLimitError):
            oracle.optimal_kndn(ds, q, k_limit=2)

    def test_tie_break_smallest_id_multiset(self):
        # two mirror-image optimal sets; ids (0, 1) must win over (0, 2)
        ds = make_dataset([[0.5], [0.2], [0.8]])
        q = full_query(ds, [0.5], k=2, min_div=0.25)
        got = oracle.optimal_kndn(ds, q)
        assert tuple(sorted(got.ids)) == (0, 1)
