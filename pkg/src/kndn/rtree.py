"""Bulk-loaded R-tree over the numeric dimensions of a dataset.

The tree is packed bottom-up with sort-tile-recursive (STR) loading at the
configured fill fraction, which is deterministic for a fixed input order and
preserves the two properties the query algorithms rely on: every child MBR
is contained in its parent, and mindist(MBR, Q) lower-bounds the distance of
every point stored beneath it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from kndn import model

MAGIC = b"KNDNRTR\x01"
FORMAT_VERSION = 1


class IndexError_(ValueError):
    """A malformed index file or an invalid build request."""


@dataclass(frozen=True)
class RTreeConfig:
    branching: int = 64
    fill: float = 0.7

    def __post_init__(self):
        if self.branching < 2:
            raise IndexError_(f"branching factor must be at least 2, got {self.branching}")
        if not 0.0 < self.fill <= 1.0:
            raise IndexError_(f"fill fraction must lie in (0, 1], got {self.fill}")

    @property
    def capacity(self) -> int:
        return max(2, int(self.branching * self.fill))


class Node:
    """Either a leaf (entry ids plus their projected coordinates) or an
    internal node (child list).  low/high is the node MBR."""

    __slots__ = ("low", "high", "children", "entry_ids", "entry_coords", "node_id")

    def __init__(self, low, high, children=None, entry_ids=None, entry_coords=None):
        self.low = low
        self.high = high
        self.children = children
        self.entry_ids = entry_ids
        self.entry_coords = entry_coords
        self.node_id = -1

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class RTree:
    def __init__(self, dims, config: RTreeConfig, root: Node | None, n_entries: int):
        self.dims = tuple(int(d) for d in dims)
        self.config = config
        self.root = root
        self.n_entries = n_entries
        self.n_nodes = 0
        self._number_nodes()

    def _number_nodes(self):
        counter = 0
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            node.node_id = counter
            counter += 1
            if not node.is_leaf:
                stack.extend(reversed(node.children))
        self.n_nodes = counter

    def iter_nodes(self):
        stack = [self.root] if self.root is not None else []
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(reversed(node.children))

    def all_entry_ids(self) -> np.ndarray:
        parts = [n.entry_ids for n in self.iter_nodes() if n.is_leaf and len(n.entry_ids)]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def height(self) -> int:
        h, node = 0, self.root
        while node is not None:
            h += 1
            node = None if node.is_leaf else node.children[0]
        return h


def build(dataset: model.Dataset, dims=None, config: RTreeConfig | None = None) -> RTree:
    """Pack the dataset into an R-tree over the given numeric dimensions
    (all numeric columns by default)."""
    config = config or RTreeConfig()
    if dims is None:
        dims = dataset.numeric_columns()
    dims = [dataset.column(d) if isinstance(d, str) else int(d) for d in dims]
    if not dims:
        raise IndexError_("an index needs at least one dimension")
    for d in dims:
        if dataset.schema[d].kind != model.NUMERIC:
            raise IndexError_(f"cannot index categorical attribute {dataset.schema[d].name!r}")

    coords = np.ascontiguousarray(dataset.values[:, dims], dtype=np.float64)
    ids = np.arange(dataset.n, dtype=np.int64)
    if dataset.n == 0:
        empty = Node(np.zeros(len(dims)), np.zeros(len(dims)),
                     entry_ids=ids, entry_coords=coords)
        return RTree(dims, config, empty, 0)

    leaves = _str_tile(ids, coords, 0, len(dims), config.capacity)
    level = leaves
    while len(level) > 1:
        centers = np.array([(n.low + n.high) * 0.5 for n in level])
        order = np.arange(len(level), dtype=np.int64)
        level = _str_tile_nodes(level, order, centers, 0, len(dims), config.capacity)
    return RTree(dims, config, level[0], dataset.n)


def _chunk_sizes(n: int, groups: int) -> list[int]:
    base, rem = divmod(n, groups)
    return [base + (1 if i < rem else 0) for i in range(groups)]


def _str_tile(ids, coords, axis, ndims, capacity) -> list[Node]:
    n = len(ids)
    pages = math.ceil(n / capacity)
    if pages <= 1 or axis == ndims - 1:
        order = np.lexsort((ids, coords[:, axis]))
        ids, coords = ids[order], coords[order]
        out = []
        for size in _chunk_sizes(n, pages):
            chunk_ids = np.ascontiguousarray(ids[:size])
            chunk_coords = np.ascontiguousarray(coords[:size])
            ids, coords = ids[size:], coords[size:]
            out.append(
                Node(chunk_coords.min(axis=0), chunk_coords.max(axis=0),
                     entry_ids=chunk_ids, entry_coords=chunk_coords)
            )
        return out
    slabs = math.ceil(pages ** (1.0 / (ndims - axis)))
    order = np.lexsort((ids, coords[:, axis]))
    ids, coords = ids[order], coords[order]
    out = []
    for size in _chunk_sizes(n, slabs):
        out.extend(_str_tile(ids[:size], coords[:size], axis + 1, ndims, capacity))
        ids, coords = ids[size:], coords[size:]
    return out


def _str_tile_nodes(nodes, order_ids, centers, axis, ndims, capacity) -> list[Node]:
    n = len(nodes)
    pages = math.ceil(n / capacity)
    key = np.lexsort((order_ids, centers[:, axis]))
    nodes = [nodes[i] for i in key]
    order_ids, centers = order_ids[key], centers[key]
    if pages <= 1 or axis == ndims - 1:
        out = []
        for size in _chunk_sizes(n, pages):
            group, nodes = nodes[:size], nodes[size:]
            order_ids, centers = order_ids[size:], centers[size:]
            low = np.min([g.low for g in group], axis=0)
            high = np.max([g.high for g in group], axis=0)
            out.append(Node(low, high, children=group))
        return out
    slabs = math.ceil(pages ** (1.0 / (ndims - axis)))
    out = []
    for size in _chunk_sizes(n, slabs):
        out.extend(_str_tile_nodes(nodes[:size], order_ids[:size], centers[:size],
                                   axis + 1, ndims, capacity))
        nodes = nodes[size:]
        order_ids, centers = order_ids[size:], centers[size:]
    return out


def mindist(low, high, targets, metric: str = "euclidean") -> float:
    """Smallest possible distance between the query point and any point
    inside the box; dimensions the query does not constrain contribute zero.

    Reference implementation over aligned (low, high, targets) vectors where
    targets may be NaN for unconstrained dimensions.
    """
    low = np.asarray(low, dtype=np.float64)
    high = np.asarray(high, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    mask = ~np.isnan(t)
    below = np.where(mask & (t < low), low - t, 0.0)
    above = np.where(mask & (t > high), t - high, 0.0)
    gaps = below + above
    if metric == "euclidean":
        return float(np.sqrt(np.sum(gaps * gaps)))
    if metric == "manhattan":
        return float(np.sum(gaps))
    raise ValueError(f"unknown metric {metric!r}")


def validate(tree: RTree, dataset: model.Dataset | None = None) -> None:
    """Check structural invariants: bounds ordering, containment, fanout,
    and (when a dataset is given) that the stored multiset of ids matches."""
    eps = 1e-12
    for node in tree.iter_nodes():
        if np.any(node.low > node.high + eps):
            raise IndexError_("node has low > high")
        if np.any(node.low < -eps) or np.any(node.high > 1.0 + eps):
            raise IndexError_("node bounds escape the unit domain")
        if node.is_leaf:
            if len(node.entry_ids) > tree.config.branching:
                raise IndexError_("leaf exceeds branching factor")
            if len(node.entry_ids) and (
                np.any(node.entry_coords < node.low[None, :] - eps)
                or np.any(node.entry_coords > node.high[None, :] + eps)
            ):
                raise IndexError_("leaf entry escapes its MBR")
        else:
            if len(node.children) > tree.config.branching:
                raise IndexError_("internal node exceeds branching factor")
            for child in node.children:
                if np.any(child.low < node.low - eps) or np.any(child.high > node.high + eps):
                    raise IndexError_("child MBR escapes its parent")
    if dataset is not None:
        got = np.sort(tree.all_entry_ids())
        want = np.arange(dataset.n, dtype=np.int64)
        if got.shape != want.shape or np.any(got != want):
            raise IndexError_("tree does not contain exactly the dataset ids")


def save(tree: RTree, path) -> None:
    """Persist the index: versioned header, then nodes in depth-first order."""
    ndims = len(tree.dims)
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIId", FORMAT_VERSION, ndims, tree.config.branching, tree.config.fill))
        fh.write(struct.pack("<q", tree.n_entries))
        fh.write(np.asarray(tree.dims, dtype=np.int64).tobytes())

        def emit(node: Node):
            fh.write(struct.pack("<B", 1 if node.is_leaf else 0))
            fh.write(np.asarray(node.low, dtype=np.float64).tobytes())
            fh.write(np.asarray(node.high, dtype=np.float64).tobytes())
            if node.is_leaf:
                fh.write(struct.pack("<I", len(node.entry_ids)))
                fh.write(np.asarray(node.entry_ids, dtype=np.int64).tobytes())
                fh.write(np.asarray(node.entry_coords, dtype=np.float64).tobytes())
            else:
                fh.write(struct.pack("<I", len(node.children)))
                for child in node.children:
                    emit(child)

        if tree.root is not None:
            emit(tree.root)


def load(path, dataset: model.Dataset | None = None) -> RTree:
    """Load a persisted index and re-validate its invariants."""
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise IndexError_(f"{path}: not an index file (bad magic)")
    off = len(MAGIC)
    version, ndims, branching, fill = struct.unpack_from("<IIId", data, off)
    off += struct.calcsize("<IIId")
    if version != FORMAT_VERSION:
        raise IndexError_(f"{path}: unsupported index version {version}")
    (n_entries,) = struct.unpack_from("<q", data, off)
    off += 8
    dims = np.frombuffer(data, dtype=np.int64, count=ndims, offset=off)
    off += 8 * ndims

    def read_node(off: int) -> tuple[Node, int]:
        (kind,) = struct.unpack_from("<B", data, off)
        off += 1
        low = np.frombuffer(data, dtype=np.float64, count=ndims, offset=off).copy()
        off += 8 * ndims
        high = np.frombuffer(data, dtype=np.float64, count=ndims, offset=off).copy()
        off += 8 * ndims
        (count,) = struct.unpack_from("<I", data, off)
        off += 4
        if kind == 1:
            ids = np.frombuffer(data, dtype=np.int64, count=count, offset=off).copy()
            off += 8 * count
            coords = np.frombuffer(data, dtype=np.float64, count=count * ndims, offset=off)
            coords = coords.reshape(count, ndims).copy()
            off += 8 * count * ndims
            return Node(low, high, entry_ids=ids, entry_coords=coords), off
        children = []
        for _ in range(count):
            child, off = read_node(off)
            children.append(child)
        return Node(low, high, children=children), off

    root, off = read_node(off)
    if off != len(data):
        raise IndexError_(f"{path}: trailing bytes after the node records")
    tree = RTree(dims, RTreeConfig(branching, fill), root, int(n_entries))
    validate(tree, dataset)
    return tree
