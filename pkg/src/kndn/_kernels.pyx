# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot query kernels: spatial distances, MBR bounds, and divdist."""

import numpy as np

from libc.math cimport fabs, sqrt

EUCLIDEAN = 0
MANHATTAN = 1

DEF MAX_DIMS = 64


def spatial_distance(const double[::1] row, const long long[::1] qcols,
                     const double[::1] qvals, int metric):
    cdef double acc = 0.0, d
    cdef Py_ssize_t j
    if metric == 0:
        for j in range(qcols.shape[0]):
            d = row[qcols[j]] - qvals[j]
            acc += d * d
        return sqrt(acc)
    for j in range(qcols.shape[0]):
        acc += fabs(row[qcols[j]] - qvals[j])
    return acc


def batch_spatial(const double[:, ::1] coords, const long long[::1] qpos,
                  const double[::1] qvals, int metric):
    cdef Py_ssize_t n = coords.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, d
    cdef Py_ssize_t i, j
    if metric == 0:
        for i in range(n):
            acc = 0.0
            for j in range(qpos.shape[0]):
                d = coords[i, qpos[j]] - qvals[j]
                acc += d * d
            o[i] = sqrt(acc)
    else:
        for i in range(n):
            acc = 0.0
            for j in range(qpos.shape[0]):
                acc += fabs(coords[i, qpos[j]] - qvals[j])
            o[i] = acc
    return out


def mbr_mindist(const double[::1] low, const double[::1] high,
                const long long[::1] qpos, const double[::1] qvals, int metric):
    cdef double acc = 0.0, d, v
    cdef Py_ssize_t j, p
    if metric == 0:
        for j in range(qpos.shape[0]):
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
    for j in range(qpos.shape[0]):
        p = qpos[j]
        v = qvals[j]
        if v < low[p]:
            acc += low[p] - v
        elif v > high[p]:
            acc += v - high[p]
    return acc


cdef inline double _weighted_sorted_sum(double* deltas, Py_ssize_t n,
                                        const double[::1] weights) nogil:
    # insertion sort, descending; n is small (diversity dimensions)
    cdef Py_ssize_t i, j
    cdef double key, acc = 0.0
    for i in range(1, n):
        key = deltas[i]
        j = i - 1
        while j >= 0 and deltas[j] < key:
            deltas[j + 1] = deltas[j]
            j -= 1
        deltas[j + 1] = key
    for i in range(n):
        acc += weights[i] * deltas[i]
    return acc


def divdist_rows(const double[::1] a, const double[::1] b,
                 const long long[::1] dcols, const unsigned char[::1] is_cat,
                 const double[::1] sim_flat, const long long[::1] sim_off,
                 const double[::1] weights):
    cdef double deltas[MAX_DIMS]
    cdef Py_ssize_t j, c, n = dcols.shape[0]
    cdef long long ia, ib, off
    if n > MAX_DIMS:
        raise ValueError("too many diversity dimensions for the compiled kernel")
    for j in range(n):
        c = dcols[j]
        if is_cat[j]:
            ia = <long long> a[c]
            ib = <long long> b[c]
            if ia == ib:
                deltas[j] = 0.0
            else:
                off = sim_off[j]
                deltas[j] = 1.0 - sim_flat[off + ia] * sim_flat[off + ib]
        else:
            deltas[j] = fabs(a[c] - b[c])
    return _weighted_sorted_sum(deltas, n, weights)


def mbr_divdist_bound(const double[::1] low, const double[::1] high,
                      const long long[::1] dpos, const double[::1] ref,
                      const double[::1] static_delta, const double[::1] weights):
    cdef double deltas[MAX_DIMS]
    cdef double d1, d2
    cdef Py_ssize_t j, n = dpos.shape[0]
    cdef long long p
    if n > MAX_DIMS:
        raise ValueError("too many diversity dimensions for the compiled kernel")
    for j in range(n):
        p = dpos[j]
        if p >= 0:
            d1 = fabs(low[p] - ref[j])
            d2 = fabs(high[p] - ref[j])
            deltas[j] = d1 if d1 > d2 else d2
        else:
            deltas[j] = static_delta[j]
    return _weighted_sorted_sum(deltas, n, weights)
