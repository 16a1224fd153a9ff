"""Diversity math: decaying weights, attribute deltas, and pairwise divdist.

The diversity distance between two rows is a Gower-style weighted average of
their per-attribute differences, with the differences sorted in decreasing
order and dotted against a geometrically decaying weight vector.  Sorting
first means the largest disagreement always receives the largest weight, so
a pair is diverse only if it differs substantially somewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kndn import model


def make_weights(length: int, decay: float) -> np.ndarray:
    """Geometric weight vector w_j = decay^(j-1) * (1 - decay) / (1 - decay^L).

    Weights are positive, strictly decreasing, and sum to 1.  decay near 0
    concentrates all weight on the largest difference (a MAX metric); decay
    near 1 spreads weight evenly (a scaled Manhattan metric).
    """
    if length < 1:
        raise ValueError(f"weight vector length must be at least 1, got {length}")
    if not 0.0 < decay < 1.0:
        raise ValueError(f"decay must lie strictly inside (0, 1), got {decay}")
    j = np.arange(length, dtype=np.float64)
    w = decay**j * (1.0 - decay) / (1.0 - decay**length)
    return w


def categorical_sim(freqs) -> np.ndarray:
    """Per-value similarity scores from a frequency table.

    Sim(v) = 1 - sum over values u with freq(u) <= freq(v) of
    f_u (f_u - 1) / (n (n - 1)).  Rare values score high (close to 1), the
    single value of a one-value domain scores 0.
    """
    f = np.asarray(freqs, dtype=np.float64)
    n = f.sum()
    if n < 2:
        raise ValueError(f"similarity statistics need at least 2 rows, got {int(n)}")
    contrib = f * (f - 1.0) / (n * (n - 1.0))
    order = np.argsort(f, kind="stable")
    cum = np.cumsum(contrib[order])
    # for each value, accumulate every contribution with frequency <= its own
    upto = np.searchsorted(f[order], f, side="right")
    sims = 1.0 - np.where(upto > 0, cum[np.maximum(upto - 1, 0)], 0.0)
    return np.clip(sims, 0.0, 1.0)


def attr_delta(v1, v2, kind: str, sim: np.ndarray | None = None) -> float:
    """Difference of two values of one attribute, in [0, 1].

    Numeric: absolute difference of normalized values.  Categorical: 0 for
    identical symbols, else 1 - Sim(v1) * Sim(v2), so a mismatch on common
    values counts for more than a mismatch on rare ones.
    """
    if kind == model.NUMERIC:
        return abs(float(v1) - float(v2))
    if v1 == v2:
        return 0.0
    return 1.0 - float(sim[int(v1)]) * float(sim[int(v2)])


@dataclass(frozen=True)
class DiversityMeasure:
    """Pairwise diversity over the diversity attributes of one query.

    Bundles the column indices, per-column kinds, categorical similarity
    tables, and the weight vector, so divdist is a pure function of two rows.
    """

    cols: tuple[int, ...]
    kinds: tuple[str, ...]
    sims: tuple
    weights: np.ndarray
    min_div: float

    @classmethod
    def from_query(cls, dataset: model.Dataset, query: model.Query) -> "DiversityMeasure":
        query.validate_for(dataset)
        cols = tuple(dataset.column(name) for name in query.diversity)
        kinds = tuple(dataset.schema[c].kind for c in cols)
        sims = tuple(
            categorical_sim(dataset.cat_freqs[c]) if k == model.CATEGORICAL else None
            for c, k in zip(cols, kinds)
        )
        weights = make_weights(len(cols), query.decay) if cols else np.empty(0)
        return cls(cols, kinds, sims, weights, query.min_div)

    @property
    def length(self) -> int:
        return len(self.cols)

    def deltas(self, row1, row2) -> np.ndarray:
        out = np.empty(self.length)
        for j, c in enumerate(self.cols):
            out[j] = attr_delta(row1[c], row2[c], self.kinds[j], self.sims[j])
        return out

    def divdist(self, row1, row2) -> float:
        """Weighted diversity distance of two rows, in [0, 1]."""
        if self.length == 0:
            return 0.0
        d = np.sort(self.deltas(row1, row2))[::-1]
        return float(d @ self.weights)

    def is_div(self, row1, row2) -> bool:
        """True when the pair meets the minimum diversity threshold."""
        if self.min_div <= 0.0:
            return True
        return self.divdist(row1, row2) >= self.min_div

    def fully_diverse(self, rows) -> bool:
        """True when every unordered pair of rows is diverse (vacuous for < 2)."""
        rows = list(rows)
        for i in range(len(rows)):
            for j in range(i + 1, len(rows)):
                if not self.is_div(rows[i], rows[j]):
                    return False
        return True

    def pairwise_divdist(self, matrix: np.ndarray) -> np.ndarray:
        """(n, n) divdist matrix for all row pairs of a values matrix."""
        n = matrix.shape[0]
        if self.length == 0:
            return np.zeros((n, n))
        deltas = np.empty((n, n, self.length))
        for j, c in enumerate(self.cols):
            col = matrix[:, c]
            if self.kinds[j] == model.NUMERIC:
                deltas[:, :, j] = np.abs(col[:, None] - col[None, :])
            else:
                ids = col.astype(np.int64)
                s = self.sims[j][ids]
                d = 1.0 - s[:, None] * s[None, :]
                d[ids[:, None] == ids[None, :]] = 0.0
                deltas[:, :, j] = d
        deltas.sort(axis=2)
        return deltas[:, :, ::-1] @ self.weights
