"""Kernel backend selection and per-query precomputation.

The compiled extension is preferred when importable; otherwise the pure
Python fallback is used.  A QueryContext packs one (dataset, query) pair
into flat arrays once, so the per-tuple inner loops touch no Python-level
schema machinery.
"""

from __future__ import annotations

import importlib

import numpy as np

from kndn import diversity, model, scoring

try:
    from kndn import _kernels as _impl

    BACKEND = "compiled"
except ImportError:
    from kndn import _kernels_py as _impl

    BACKEND = "python"


def get_backend(name: str):
    """Load a specific backend module ('compiled' or 'python') for benchmarks."""
    if name == "python":
        return importlib.import_module("kndn._kernels_py")
    if name == "compiled":
        return importlib.import_module("kndn._kernels")
    raise ValueError(f"unknown backend {name!r}")


class QueryContext:
    """Precomputed, flattened view of one query against one dataset."""

    def __init__(self, dataset: model.Dataset, query: model.Query, backend=None):
        query.validate_for(dataset)
        self.dataset = dataset
        self.query = query
        self._impl = backend if backend is not None else _impl

        self.qcols = np.asarray([dataset.column(n) for n in query.point_names], dtype=np.int64)
        self.qvals = np.asarray(query.point_values, dtype=np.float64)
        self.metric = scoring.metric_code(query.metric)
        self.min_div = query.min_div

        self.measure = diversity.DiversityMeasure.from_query(dataset, query)
        self.dcols = np.asarray(self.measure.cols, dtype=np.int64)
        self.is_cat = np.asarray(
            [k == model.CATEGORICAL for k in self.measure.kinds], dtype=np.uint8
        )
        self.weights = np.asarray(self.measure.weights, dtype=np.float64)

        sim_off = np.full(len(self.dcols), -1, dtype=np.int64)
        flat: list[np.ndarray] = []
        self._min_other_sim: dict[int, np.ndarray] = {}
        offset = 0
        for j, sims in enumerate(self.measure.sims):
            if sims is None:
                continue
            sim_off[j] = offset
            flat.append(sims)
            offset += len(sims)
            self._min_other_sim[j] = _min_other(sims)
        self.sim_flat = np.concatenate(flat) if flat else np.empty(0)
        self.sim_off = sim_off

        # set by bind(); positions of query/diversity columns among tree dims
        self.tree = None
        self.qpos: np.ndarray | None = None
        self.dpos_tree: np.ndarray | None = None

    @property
    def l_dims(self) -> int:
        return len(self.dcols)

    def bind(self, tree) -> "QueryContext":
        """Attach an index so MBR-level kernels know each column's position."""
        dims = list(tree.dims)
        missing = [n for n, c in zip(self.query.point_names, self.qcols) if c not in dims]
        if missing:
            raise model.QueryError(f"index does not cover point attributes {missing}")
        self.tree = tree
        self.qpos = np.asarray([dims.index(c) for c in self.qcols], dtype=np.int64)
        self.dpos_tree = np.asarray(
            [dims.index(c) if c in dims else -1 for c in self.dcols], dtype=np.int64
        )
        return self

    # spatial side

    def spatial(self, row) -> float:
        return self._impl.spatial_distance(row, self.qcols, self.qvals, self.metric)

    def batch(self, coords, in_tree: bool = True) -> np.ndarray:
        pos = self.qpos if in_tree else self.qcols
        return self._impl.batch_spatial(coords, pos, self.qvals, self.metric)

    def all_distances(self) -> np.ndarray:
        return self.batch(self.dataset.values, in_tree=False)

    def mindist(self, low, high) -> float:
        return self._impl.mbr_mindist(low, high, self.qpos, self.qvals, self.metric)

    # diversity side

    def divdist(self, row1, row2) -> float:
        if self.l_dims == 0:
            return 0.0
        return self._impl.divdist_rows(
            row1, row2, self.dcols, self.is_cat, self.sim_flat, self.sim_off, self.weights
        )

    def is_div(self, row1, row2) -> bool:
        if self.min_div <= 0.0:
            return True
        return self.divdist(row1, row2) >= self.min_div

    def diversity_values(self, row) -> np.ndarray:
        return np.ascontiguousarray(row[self.dcols], dtype=np.float64)

    def static_deltas(self, dvals: np.ndarray) -> np.ndarray:
        """Per-attribute upper bound on the delta any point can achieve
        against a reference row, for diversity attributes the index does not
        span.  Indexed attributes are bounded from the MBR at query time and
        get a placeholder 0 here.
        """
        out = np.zeros(self.l_dims, dtype=np.float64)
        for j in range(self.l_dims):
            if self.dpos_tree is not None and self.dpos_tree[j] >= 0:
                continue
            if self.is_cat[j]:
                other = self._min_other_sim[j]
                ref = int(dvals[j])
                if np.isnan(other[ref]):
                    out[j] = 0.0
                else:
                    off = self.sim_off[j]
                    out[j] = 1.0 - self.sim_flat[off + ref] * other[ref]
            else:
                v = dvals[j]
                out[j] = max(v, 1.0 - v)
        return out

    def corner_bound(self, low, high, dvals, static_deltas) -> float:
        """Largest divdist any point inside the MBR could reach against a
        reference row; conservative on unindexed attributes.
        """
        if self.l_dims == 0:
            return 0.0
        return self._impl.mbr_divdist_bound(
            low, high, self.dpos_tree, dvals, static_deltas, self.weights
        )


def _min_other(sims: np.ndarray) -> np.ndarray:
    """For every value id, the smallest similarity among the other values
    (NaN when the domain has a single value)."""
    v = len(sims)
    out = np.empty(v)
    if v == 1:
        out[0] = np.nan
        return out
    order = np.argsort(sims, kind="stable")
    smallest, second = sims[order[0]], sims[order[1]]
    out[:] = smallest
    out[order[0]] = second
    return out
