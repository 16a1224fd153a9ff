"""Ground-truth baselines: linear-scan KNN, sequential-scan greedy, and an
exact branch-and-bound optimum for small instances.

knn_linear and optimal_kndn compute their own distances with plain numpy so
they stay independent of the indexed execution path they are used to check.
sequential_scan_kndn deliberately shares the greedy engine: it feeds the
same distance-ordered stream the index produces, which is exactly the
baseline the index-driven run must reproduce.
"""

from __future__ import annotations

import math
import time

import numpy as np

from kndn import model, scoring, solver
from kndn.diversity import DiversityMeasure
from kndn.kernels import QueryContext


class OracleLimitError(ValueError):
    """The instance is too large for exhaustive optimization."""


def _scan_distances(dataset: model.Dataset, query: model.Query) -> np.ndarray:
    cols = [dataset.column(n) for n in query.point_names]
    diffs = dataset.values[:, cols] - np.asarray(query.point_values, dtype=np.float64)
    if query.metric == "euclidean":
        return np.sqrt(np.sum(diffs * diffs, axis=1))
    return np.sum(np.abs(diffs), axis=1)


def _diverse_flags(dataset, query, ids) -> list[bool]:
    """Per answer, whether it is diverse from every other answer."""
    if query.min_div <= 0.0:
        return [True] * len(ids)
    measure = DiversityMeasure.from_query(dataset, query)
    rows = [dataset.values[i] for i in ids]
    flags = []
    for i in range(len(rows)):
        flags.append(
            all(measure.is_div(rows[i], rows[j]) for j in range(len(rows)) if j != i)
        )
    return flags


def knn_linear(dataset: model.Dataset, query: model.Query) -> model.ResultSet:
    """The k nearest tuples by (distance, id), via a full scan."""
    query.validate_for(dataset)
    started = time.perf_counter()
    dists = _scan_distances(dataset, query)
    order = np.lexsort((np.arange(dataset.n), dists))
    k = min(query.k, dataset.n)
    ids = [int(i) for i in order[:k]]
    flags = _diverse_flags(dataset, query, ids)
    answers = [
        model.Answer(dataset.record(i), float(dists[i]), flag)
        for i, flag in zip(ids, flags)
    ]
    score = scoring.score([a.distance for a in answers], query.aggregate) if answers else float("nan")
    stats = model.ExecutionStats(tuples_read=dataset.n, wall_time=time.perf_counter() - started)
    return model.ResultSet(answers, score, stats)


def sequential_scan_kndn(dataset: model.Dataset, query: model.Query, *,
                         backend=None) -> model.ResultSet:
    """Buffered greedy consumed from a fully sorted in-memory stream.

    Reads the whole table by definition, so tuples_read is always n.
    """
    started = time.perf_counter()
    ctx = QueryContext(dataset, query, backend=backend)
    dists = ctx.all_distances()
    order = np.lexsort((np.arange(dataset.n), dists))
    stream = ((int(i), dataset.values[int(i)], float(dists[int(i)])) for i in order)
    state = solver.SolverState(
        leaders=[], k=query.k, buffer_capacity=query.k, safe_radius=solver.safe_radius(ctx)
    )
    solver.greedy_consume(stream, ctx, state, buffered=True)
    stats = model.ExecutionStats(tuples_read=dataset.n)
    result = solver.finish(ctx, state, stats)
    result.stats.wall_time = time.perf_counter() - started
    return result


def optimal_kndn(dataset: model.Dataset, query: model.Query, *,
                 n_limit: int = 400, k_limit: int = 5) -> model.ResultSet:
    """The best-scoring fully diverse k-set that contains the nearest tuple,
    found by exhaustive branch-and-bound over distance-ordered candidates.

    When no fully diverse k-set exists, the largest fully diverse set with
    the best score is returned, padded with the nearest unused tuples
    flagged non-diverse.  Refuses instances beyond (n_limit, k_limit).
    """
    query.validate_for(dataset)
    n = dataset.n
    if n > n_limit or query.k > k_limit:
        sets = math.comb(max(n - 1, 0), min(query.k - 1, max(n - 1, 0)))
        raise OracleLimitError(
            f"instance (n={n}, k={query.k}) exceeds limits (n<={n_limit}, k<={k_limit}); "
            f"enumeration would cover about {sets} candidate sets"
        )
    started = time.perf_counter()
    k = min(query.k, n)
    if k == 0:
        return model.ResultSet([], float("nan"), model.ExecutionStats())

    measure = DiversityMeasure.from_query(dataset, query)
    dists = _scan_distances(dataset, query)
    order = np.lexsort((np.arange(n), dists))
    cand = np.asarray(order, dtype=np.int64)

    if query.min_div <= 0.0:
        ok = np.ones((n, n), dtype=bool)
    else:
        ok = measure.pairwise_divdist(dataset.values) >= query.min_div
    ok = ok[np.ix_(cand, cand)]
    adj = [0] * n
    for i in range(n):
        mask = 0
        for j in np.nonzero(ok[i])[0]:
            mask |= 1 << int(j)
        adj[i] = mask & ~(1 << i)

    d_sorted = np.maximum(dists[cand], scoring.DISTANCE_FLOOR)
    if query.aggregate == "arithmetic":
        t = d_sorted.copy()
    elif query.aggregate == "geometric":
        t = np.log(d_sorted)
    else:
        t = -1.0 / d_sorted
    pref = np.concatenate(([0.0], np.cumsum(t)))

    best_sum = math.inf
    best_ids: tuple[int, ...] | None = None
    best_positions: list[int] = []

    def tie_eps() -> float:
        return 1e-12 * max(1.0, abs(best_sum))

    def record(chosen, total):
        nonlocal best_sum, best_ids, best_positions
        ids = tuple(sorted(int(cand[p]) for p in chosen))
        if total < best_sum - tie_eps() or (
            abs(total - best_sum) <= tie_eps() and (best_ids is None or ids < best_ids)
        ):
            best_sum = total
            best_ids = ids
            best_positions = list(chosen)

    def dfs(start, allowed, chosen, total, size):
        if len(chosen) == size:
            record(chosen, total)
            return
        need = size - len(chosen)
        for j in range(start, n - need + 1):
            if not (allowed >> j) & 1:
                continue
            bound = total + t[j] + (pref[j + need] - pref[j + 1])
            if bound > best_sum + tie_eps():
                break  # t is non-decreasing along positions, so later j only worsen
            chosen.append(j)
            dfs(j + 1, allowed & adj[j], chosen, total + t[j], size)
            chosen.pop()

    found: list[int] = []
    for size in range(k, 0, -1):
        best_sum, best_ids, best_positions = math.inf, None, []
        dfs(1, adj[0], [0], float(t[0]), size)
        if best_ids is not None:
            found = best_positions
            break

    chosen_ids = [int(cand[p]) for p in found]
    answers = [
        model.Answer(dataset.record(i), float(dists[i]), True)
        for i in sorted(chosen_ids, key=lambda i: (dists[i], i))
    ]
    if len(answers) < k:
        used = set(chosen_ids)
        for p in range(n):
            if len(answers) >= k:
                break
            i = int(cand[p])
            if i in used:
                continue
            answers.append(model.Answer(dataset.record(i), float(dists[i]), False))
    score = scoring.score([a.distance for a in answers], query.aggregate)
    stats = model.ExecutionStats(tuples_read=n, wall_time=time.perf_counter() - started)
    return model.ResultSet(answers, score, stats)
