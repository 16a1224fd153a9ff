"""Incremental nearest-neighbor cursor over an R-tree.

A Browser pops elements (index nodes or tuples) off a priority queue keyed
by distance to the query point, expanding nodes as they surface, so tuples
come back in non-decreasing distance order.  An optional prune predicate is
consulted both when an element is popped and before children are inserted;
queue insertions of leaf entries are what the tuples_read counter measures.

Ties are broken deterministically by (distance, element kind, id).  Nodes
order before tuples at equal distance: a node's key lower-bounds every
tuple inside it, so expanding tied nodes first guarantees that all tuples
at the tied distance are materialized before any of them is returned, which
keeps the output in exact (distance, id) order even across duplicates.
"""

from __future__ import annotations

import heapq

import numpy as np

from kndn import model

_NODE = 0
_TUPLE = 1


class Browser:
    """Resumable cursor yielding (record id, values row, distance)."""

    def __init__(self, tree, ctx, prune=None, stats: model.ExecutionStats | None = None):
        if ctx.tree is not tree:
            ctx.bind(tree)
        self.tree = tree
        self.ctx = ctx
        self.prune = prune
        self.stats = stats if stats is not None else model.ExecutionStats()
        self._heap: list[tuple] = []
        if tree.root is not None:
            root_key = ctx.mindist(tree.root.low, tree.root.high)
            self._push((root_key, _NODE, tree.root.node_id, tree.root))

    def _push(self, item) -> None:
        heapq.heappush(self._heap, item)
        if len(self._heap) > self.stats.pqueue_peak:
            self.stats.pqueue_peak = len(self._heap)

    def __iter__(self):
        return self

    def __next__(self):
        values = self.ctx.dataset.values
        while self._heap:
            dist, kind, eid, payload = heapq.heappop(self._heap)
            if kind == _TUPLE:
                # payload holds the tree-projected coordinates of the tuple
                if self.prune is not None and self.prune(payload, payload):
                    continue
                return eid, values[eid], dist
            node = payload
            self.stats.nodes_expanded += 1
            if self.prune is not None and self.prune(node.low, node.high):
                continue
            if node.is_leaf:
                if len(node.entry_ids) == 0:
                    continue
                dists = self.ctx.batch(node.entry_coords)
                for i in range(len(node.entry_ids)):
                    coords = node.entry_coords[i]
                    if self.prune is not None and self.prune(coords, coords):
                        continue
                    self.stats.tuples_read += 1
                    self._push((float(dists[i]), _TUPLE, int(node.entry_ids[i]), coords))
            else:
                for child in node.children:
                    if self.prune is not None and self.prune(child.low, child.high):
                        continue
                    key = self.ctx.mindist(child.low, child.high)
                    self._push((key, _NODE, child.node_id, child))
        raise StopIteration

    def next_nearest(self):
        """Like next(), but returns None once the browse is exhausted."""
        try:
            return next(self)
        except StopIteration:
            return None
