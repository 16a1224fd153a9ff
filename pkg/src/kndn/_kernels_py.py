"""Pure-Python implementations of the hot query kernels.

Selected automatically when the compiled extension is unavailable.  The
accumulation order matches the compiled code so both backends produce
bit-identical floats.
"""

from __future__ import annotations

from math import fabs, sqrt

import numpy as np

EUCLIDEAN = 0
MANHATTAN = 1


def spatial_distance(row, qcols, qvals, metric):
    acc = 0.0
    if metric == EUCLIDEAN:
        for j in range(len(qcols)):
            d = row[qcols[j]] - qvals[j]
            acc += d * d
        return sqrt(acc)
    for j in range(len(qcols)):
        acc += fabs(row[qcols[j]] - qvals[j])
    return acc


def batch_spatial(coords, qpos, qvals, metric):
    diffs = coords[:, qpos] - qvals
    if metric == EUCLIDEAN:
        return np.sqrt(np.sum(diffs * diffs, axis=1))
    return np.sum(np.abs(diffs), axis=1)


def mbr_mindist(low, high, qpos, qvals, metric):
    acc = 0.0
    if metric == EUCLIDEAN:
        for j in range(len(qpos)):
            p = qpos[j]
            v = qvals[j]
            if v < low[p]:
                d = low[p] - v
            elif v > high[p]:
                d = v - high[p]
            else:
                continue
            acc += d * d
        return sqrt(acc)
    for j in range(len(qpos)):
        p = qpos[j]
        v = qvals[j]
        if v < low[p]:
            acc += low[p] - v
        elif v > high[p]:
            acc += v - high[p]
    return acc


def divdist_rows(a, b, dcols, is_cat, sim_flat, sim_off, weights):
    deltas = []
    for j in range(len(dcols)):
        c = dcols[j]
        if is_cat[j]:
            ia = int(a[c])
            ib = int(b[c])
            if ia == ib:
                deltas.append(0.0)
            else:
                off = sim_off[j]
                deltas.append(1.0 - sim_flat[off + ia] * sim_flat[off + ib])
        else:
            deltas.append(fabs(a[c] - b[c]))
    deltas.sort(reverse=True)
    acc = 0.0
    for j in range(len(deltas)):
        acc += weights[j] * deltas[j]
    return acc


def mbr_divdist_bound(low, high, dpos, ref, static_delta, weights):
    deltas = []
    for j in range(len(dpos)):
        p = dpos[j]
        if p >= 0:
            d1 = fabs(low[p] - ref[j])
            d2 = fabs(high[p] - ref[j])
            deltas.append(d1 if d1 > d2 else d2)
        else:
            deltas.append(static_delta[j])
    deltas.sort(reverse=True)
    acc = 0.0
    for j in range(len(deltas)):
        acc += weights[j] * deltas[j]
    return acc
