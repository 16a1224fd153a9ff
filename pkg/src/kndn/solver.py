"""Greedy diverse-neighbor solvers over a distance-ordered tuple stream.

Two strategies share one engine:

* direct greedy admits a tuple whenever it is diverse from every current
  answer ("leader") and otherwise discards it.
* buffered greedy additionally keeps, per leader, a bounded buffer of
  "dedicated followers" (tuples non-diverse with exactly that leader and
  diverse with all others).  Once browsing has moved far enough away that no
  future tuple can conflict with them, two or more mutually diverse
  followers replace their leader, undoing an earlier greedy mistake.

Replacement safety is certified by a radius R: whenever every point
attribute is also a diversity attribute, two tuples that fail the diversity
threshold must lie within R of each other in query space, so a follower more
than R inside the browsing frontier is provably diverse from everything
still to come.  When that certificate is unavailable, replacement is
disabled and buffered greedy degenerates to direct greedy plus buffering.

The engine also hosts the MBR prune test used by the browser: a box whose
most-diverse corner still fails the threshold against a saturated leader, or
against more than one leader, cannot contain a future leader or dedicated
follower and is skipped entirely.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from kndn import model, scoring
from kndn.browse import Browser
from kndn.kernels import QueryContext

# Exhaustive subset selection is exponential in the buffer size; beyond this
# many eligible followers only the nearest ones are considered.
EXACT_SUBSET_LIMIT = 20


@dataclass(eq=False)
class Follower:
    id: int
    values: np.ndarray
    distance: float


@dataclass(eq=False)
class Leader:
    id: int
    values: np.ndarray
    distance: float
    protected: bool
    dvals: np.ndarray
    static_deltas: np.ndarray | None
    buffer: list[Follower] = field(default_factory=list)


@dataclass(eq=False)
class SolverState:
    leaders: list[Leader]
    k: int
    buffer_capacity: int
    safe_radius: float | None
    d_new: float = 0.0


def safe_radius(ctx: QueryContext) -> float | None:
    """Spatial radius guaranteed to contain every non-diverse partner of a
    point, or None when no such bound exists.

    Any non-diverse pair has every diversity delta below min_div / w_1; when
    the point attributes are a subset of the diversity attributes this caps
    their spatial separation at that delta bound scaled by the metric.
    """
    query = ctx.query
    if query.min_div <= 0.0:
        return 0.0
    if not set(query.point_names) <= set(query.diversity):
        return None
    delta_cap = min(query.min_div / float(ctx.weights[0]), 1.0)
    m = len(query.point)
    if query.metric == "euclidean":
        return delta_cap * math.sqrt(m)
    return delta_cap * m


def max_mutually_diverse_subset(candidates, ctx, cap: int | None = None):
    """Largest pairwise-diverse subset of the candidates, ties broken by
    smaller total distance and then by ids.  Exact for up to
    EXACT_SUBSET_LIMIT candidates; beyond that only the nearest ones enter
    the search.
    """
    cands = sorted(candidates, key=lambda f: (f.distance, f.id))
    if len(cands) > EXACT_SUBSET_LIMIT:
        cands = cands[:EXACT_SUBSET_LIMIT]
    n = len(cands)
    if n == 0:
        return []
    adj = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if ctx.is_div(cands[i].values, cands[j].values):
                adj[i] |= 1 << j
                adj[j] |= 1 << i
    limit = n if cap is None else min(cap, n)
    best_key = None
    best: list[Follower] = []

    def dfs(start, allowed, chosen, total):
        nonlocal best_key, best
        key = (-len(chosen), total, tuple(c.id for c in chosen))
        if best_key is None or key < best_key:
            best_key = key
            best = list(chosen)
        if len(chosen) == limit:
            return
        # cannot even tie the best size with what remains
        if len(chosen) + (allowed >> start).bit_count() < -best_key[0]:
            return
        for j in range(start, n):
            if not (allowed >> j) & 1:
                continue
            chosen.append(cands[j])
            dfs(j + 1, allowed & adj[j], chosen, total + cands[j].distance)
            chosen.pop()

    dfs(0, (1 << n) - 1, [], 0.0)
    return best


def mbr_is_prunable(low, high, state: SolverState, ctx: QueryContext) -> bool:
    """True when no point inside the box can still contribute to the result.

    Per leader, bound the diversity any inside point could reach by taking
    the farthest corner on indexed attributes and the worst case elsewhere.
    A box non-diverse against a saturated leader, or against more than one
    leader, holds neither future leaders nor dedicated followers.
    """
    if ctx.min_div <= 0.0 or not state.leaders:
        return False
    cnt = 0
    for leader in state.leaders:
        bound = ctx.corner_bound(low, high, leader.dvals, leader.static_deltas)
        if bound < ctx.min_div:
            if len(leader.buffer) >= state.buffer_capacity:
                return True
            cnt += 1
            if cnt > 1:
                return True
    return False


def _make_leader(ctx, rid, values, distance, protected):
    dvals = ctx.diversity_values(values)
    static = ctx.static_deltas(dvals) if ctx.dpos_tree is not None else None
    return Leader(rid, values, distance, protected, dvals, static)


def _conflicts(ctx, leaders, values, limit=2):
    found = []
    for leader in leaders:
        if not ctx.is_div(leader.values, values):
            found.append(leader)
            if len(found) >= limit:
                break
    return found


def _notify(observer, name, *args):
    if observer is not None:
        fn = getattr(observer, name, None)
        if fn is not None:
            fn(*args)


def _replacement_scan(state: SolverState, ctx, threshold, observer):
    """Replace leaders by groups of their settled, mutually diverse
    followers.  Only followers strictly inside the safety margin (distance
    below browsing distance minus R) are eligible.
    """
    if threshold <= 0.0:
        return
    leaders = state.leaders
    if not any(
        (not l.protected) and l.buffer and l.buffer[0].distance < threshold for l in leaders
    ):
        return
    for leader in sorted(
        (l for l in leaders if not l.protected), key=lambda l: (l.distance, l.id)
    ):
        if leader not in leaders:
            continue
        room = state.k - len(leaders) + 1
        if room < 2:
            return
        eligible = [f for f in leader.buffer if f.distance < threshold]
        if len(eligible) < 2:
            continue
        group = max_mutually_diverse_subset(eligible, ctx, cap=room)
        if len(group) < 2:
            continue
        leaders.remove(leader)
        promoted_ids = {f.id for f in group}
        pool = []
        for other in leaders:
            pool.extend(other.buffer)
            other.buffer = []
        pool.extend(f for f in leader.buffer if f.id not in promoted_ids)
        for f in sorted(group, key=lambda f: (f.distance, f.id)):
            leaders.append(_make_leader(ctx, f.id, f.values, f.distance, protected=False))
        for f in sorted(pool, key=lambda f: (f.distance, f.id)):
            conflicts = _conflicts(ctx, leaders, f.values)
            if len(conflicts) == 1 and len(conflicts[0].buffer) < state.buffer_capacity:
                conflicts[0].buffer.append(f)
        _notify(observer, "on_replacement", state, leader, group)


def greedy_consume(stream, ctx: QueryContext, state: SolverState, *, buffered: bool,
                   observer=None) -> None:
    """Run the greedy engine over (id, values, distance) triples in
    non-decreasing distance order, mutating state until it holds k leaders
    or the stream is exhausted.
    """
    leaders = state.leaders
    replacement = buffered and state.safe_radius is not None
    for rid, values, distance in stream:
        state.d_new = distance
        if replacement and leaders:
            _replacement_scan(state, ctx, distance - state.safe_radius, observer)
            if len(leaders) >= state.k:
                return
        conflicts = _conflicts(ctx, leaders, values)
        if not conflicts:
            leader = _make_leader(ctx, rid, values, distance, protected=not leaders)
            if buffered:
                for other in leaders:
                    if other.buffer:
                        other.buffer = [
                            f for f in other.buffer if ctx.is_div(f.values, values)
                        ]
            leaders.append(leader)
            _notify(observer, "on_round", state)
            if len(leaders) >= state.k:
                return
            continue
        if buffered and len(conflicts) == 1:
            target = conflicts[0]
            if len(target.buffer) < state.buffer_capacity:
                target.buffer.append(Follower(rid, values, distance))
        _notify(observer, "on_round", state)


def finish(ctx: QueryContext, state: SolverState,
           stats: model.ExecutionStats) -> model.ResultSet:
    """Assemble the result: leaders flagged diverse, then, if the browse ran
    out before k leaders existed, the nearest unused tuples flagged
    non-diverse.  The score always aggregates all returned distances.
    """
    dataset = ctx.dataset
    ordered = sorted(state.leaders, key=lambda l: (l.distance, l.id))
    answers = [model.Answer(dataset.record(l.id), float(l.distance), True) for l in ordered]
    want = min(state.k, dataset.n)
    if len(answers) < want:
        dists = ctx.all_distances()
        order = np.lexsort((np.arange(dataset.n), dists))
        used = {l.id for l in state.leaders}
        for i in order:
            if len(answers) >= want:
                break
            i = int(i)
            if i in used:
                continue
            answers.append(model.Answer(dataset.record(i), float(dists[i]), False))
    score = scoring.score([a.distance for a in answers], ctx.query.aggregate) \
        if answers else float("nan")
    return model.ResultSet(answers, score, stats)


def _run(dataset, tree, query, *, buffered, prune, observer, backend=None) -> model.ResultSet:
    started = time.perf_counter()
    ctx = QueryContext(dataset, query, backend=backend).bind(tree)
    state = SolverState(
        leaders=[],
        k=query.k,
        buffer_capacity=query.k if buffered else 0,
        safe_radius=safe_radius(ctx) if buffered else None,
    )
    predicate = (lambda low, high: mbr_is_prunable(low, high, state, ctx)) if prune else None
    browser = Browser(tree, ctx, prune=predicate)
    greedy_consume(browser, ctx, state, buffered=buffered, observer=observer)
    result = finish(ctx, state, browser.stats)
    result.stats.wall_time = time.perf_counter() - started
    return result


def direct_greedy(dataset, tree, query, *, prune: bool = True, observer=None,
                  backend=None) -> model.ResultSet:
    """Greedy diverse k-nearest answers: admit each browsed tuple that is
    diverse from everything admitted so far."""
    return _run(dataset, tree, query, buffered=False, prune=prune,
                observer=observer, backend=backend)


def buffered_greedy(dataset, tree, query, *, prune: bool = True, observer=None,
                    backend=None) -> model.ResultSet:
    """Greedy diverse k-nearest answers with follower buffering and safe
    leader replacement."""
    return _run(dataset, tree, query, buffered=True, prune=prune,
                observer=observer, backend=backend)
