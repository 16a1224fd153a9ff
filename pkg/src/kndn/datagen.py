"""Synthetic data and query workload generation.

Datasets draw every attribute independently from a Zipf distribution over v
discrete values mapped uniformly onto [0, 1]; workloads are uniform points
over the unit cube.  Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np

from kndn import model


def zipf_pmf(v: int, theta: float) -> np.ndarray:
    """Probability of ranks 1..v under Zipf with skew theta."""
    if v < 2:
        raise ValueError(f"need at least 2 distinct values, got {v}")
    ranks = np.arange(1, v + 1, dtype=np.float64)
    weights = ranks ** (-theta)
    return weights / weights.sum()


def gen_zipf(n: int, d: int, theta: float = 1.0, v: int = 1000,
             seed: int = 0, name_prefix: str = "d") -> model.Dataset:
    """A dataset of n rows over d numeric attributes, each independently
    Zipf(theta)-distributed over v values spread evenly across [0, 1]."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 rows and d >= 1 dimensions")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(zipf_pmf(v, theta))
    cdf[-1] = 1.0
    values = np.empty((n, d), dtype=np.float64)
    for c in range(d):
        ranks = np.searchsorted(cdf, rng.random(n), side="right")
        values[:, c] = ranks / (v - 1)
    schema = [model.AttributeSpec(f"{name_prefix}{c}", model.NUMERIC, 0.0, 1.0) for c in range(d)]
    bounds = {c: (0.0, 1.0) for c in range(d)}
    return model.Dataset(schema, values, bounds, {}, {})


def gen_workload(count: int, attrs, seed: int, *, k: int, min_div: float,
                 decay: float = 0.1, metric: str = "euclidean",
                 aggregate: str = "harmonic", diversity=None) -> list[model.Query]:
    """Uniform point queries over the unit cube spanned by the given
    attributes; k, min_div, and the remaining knobs come from the harness
    configuration."""
    if count < 1:
        raise ValueError(f"need at least one query, got {count}")
    attrs = list(attrs)
    rng = np.random.default_rng(seed)
    points = rng.random((count, len(attrs)))
    diversity = tuple(diversity) if diversity is not None else tuple(attrs)
    return [
        model.Query(
            point=tuple(zip(attrs, map(float, row))),
            k=k,
            min_div=min_div,
            diversity=diversity,
            decay=decay,
            metric=metric,
            aggregate=aggregate,
        )
        for row in points
    ]
