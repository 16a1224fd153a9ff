"""Shared fixtures and small dataset builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from kndn import datagen, model, rtree


def make_dataset(values, names=None) -> model.Dataset:
    """Dataset straight from a normalized (n, d) value matrix."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    d = values.shape[1]
    names = names or [f"d{i}" for i in range(d)]
    schema = [model.AttributeSpec(n, model.NUMERIC, 0.0, 1.0) for n in names]
    bounds = {c: (0.0, 1.0) for c in range(d)}
    return model.Dataset(schema, values, bounds, {}, {})


def make_uniform(n, d, seed) -> model.Dataset:
    rng = np.random.default_rng(seed)
    return make_dataset(rng.random((n, d)))


def make_mixed_dataset(seed=0, n=40) -> model.Dataset:
    """Two numeric columns plus one skewed categorical column."""
    rng = np.random.default_rng(seed)
    labels = ["red"] * (n // 2) + ["green"] * (n // 4) + ["blue"] * (n - n // 2 - n // 4)
    rng.shuffle(labels)
    rows = [[rng.random(), rng.random(), labels[i]] for i in range(n)]
    schema = [
        model.AttributeSpec("x", model.NUMERIC, 0.0, 1.0),
        model.AttributeSpec("y", model.NUMERIC, 0.0, 1.0),
        model.AttributeSpec("color", model.CATEGORICAL),
    ]
    return model.normalize(rows, schema)


def full_query(dataset, targets, k, min_div, **kwargs) -> model.Query:
    """Query over every numeric attribute, diversity on all attributes."""
    names = [s.name for s in dataset.schema if s.kind == model.NUMERIC]
    kwargs.setdefault("diversity", tuple(s.name for s in dataset.schema))
    return model.Query(
        point=tuple(zip(names, targets)), k=k, min_div=min_div, **kwargs
    )


@pytest.fixture(scope="session")
def zipf_small():
    dataset = datagen.gen_zipf(n=800, d=3, seed=42)
    return dataset, rtree.build(dataset)


@pytest.fixture(scope="session")
def uniform_small():
    dataset = make_uniform(500, 3, seed=7)
    return dataset, rtree.build(dataset)


# Five planted points around Q=(0.5, 0.5) where plain greedy admits a point
# (id 1) that blocks two better answers (ids 2, 3); with k=3 and
# min_div=0.1 the buffered strategy replaces it with them.
PLANT_POINTS = np.array(
    [
        [0.5, 0.502],   # 0: nearest, always kept
        [0.5, 0.615],   # 1: diverse from 0, blocks 2 and 3
        [0.445, 0.655],  # 2: non-diverse only with 1
        [0.56, 0.655],   # 3: non-diverse only with 1, diverse from 2
        [0.5, 0.92],     # 4: far but diverse from everything
    ]
)


@pytest.fixture()
def planted():
    dataset = make_dataset(PLANT_POINTS, names=["x", "y"])
    tree = rtree.build(dataset)
    query = model.Query(
        point=(("x", 0.5), ("y", 0.5)), k=3, min_div=0.1, diversity=("x", "y"), decay=0.1
    )
    return dataset, tree, query
