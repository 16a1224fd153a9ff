"""Spatial distance metrics, distance aggregates, and the result-set score."""

from __future__ import annotations

import numpy as np

from kndn import model

# Uniform floor applied before aggregation so exact query-point duplicates
# keep the geometric and harmonic means finite.
DISTANCE_FLOOR = 1e-9

EUCLIDEAN = 0
MANHATTAN = 1

_METRIC_CODES = {"euclidean": EUCLIDEAN, "manhattan": MANHATTAN}


def metric_code(name: str) -> int:
    return _METRIC_CODES[name]


def spatialdist(row, cols, targets, metric: str = "euclidean") -> float:
    """Distance between a row and the query point over the point attributes."""
    diffs = np.asarray([float(row[c]) - float(t) for c, t in zip(cols, targets)])
    if metric == "euclidean":
        return float(np.sqrt(np.sum(diffs * diffs)))
    if metric == "manhattan":
        return float(np.sum(np.abs(diffs)))
    raise ValueError(f"unknown metric {metric!r}")


def aggregate(distances, kind: str) -> float:
    """Mean of a distance multiset under the chosen aggregate.

    All three choices are monotone: moving any answer farther away never
    decreases the aggregate.
    """
    d = np.maximum(np.asarray(distances, dtype=np.float64), DISTANCE_FLOOR)
    if d.size == 0:
        raise ValueError("cannot aggregate an empty distance set")
    if kind == "arithmetic":
        return float(np.mean(d))
    if kind == "geometric":
        return float(np.exp(np.mean(np.log(d))))
    if kind == "harmonic":
        return float(d.size / np.sum(1.0 / d))
    raise ValueError(f"unknown aggregate {kind!r}")


def score(distances, kind: str = "harmonic") -> float:
    """Reciprocal of the aggregated answer distances; higher is closer."""
    return 1.0 / aggregate(distances, kind)


def score_result(result: model.ResultSet, query: model.Query) -> float:
    if not result.answers:
        raise ValueError("score is undefined for an empty result set")
    return score(result.distances, query.aggregate)
