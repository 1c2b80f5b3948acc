"""Seeded Louvain modularity optimization on CSR arrays.

Gains are compared as ``a * 2m - tot * k`` on integer-valued float64s, so a
move happens only on a strict improvement and runs are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def csr_from_edges(n, u, v):
    """Symmetric CSR (unit weights) of an undirected simple edge list."""
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64), np.ones(len(dst), dtype=np.float64)


@njit(cache=True)
def _local_moving(n, indptr, indices, weights, selfw, order, resolution):
    m2 = 0.0
    k = np.zeros(n)
    for i in range(n):
        s = 2.0 * selfw[i]
        for p in range(indptr[i], indptr[i + 1]):
            s += weights[p]
        k[i] = s
        m2 += s
    comm = np.arange(n)
    tot = k.copy()
    nw = np.zeros(n)
    touched = np.zeros(n, dtype=np.bool_)
    ncomms = np.empty(n, dtype=np.int64)
    moved_any = False
    if m2 == 0.0:
        return comm, moved_any
    improved = True
    while improved:
        improved = False
        for idx in range(n):
            i = order[idx]
            ci = comm[i]
            cnt = 0
            for p in range(indptr[i], indptr[i + 1]):
                c = comm[indices[p]]
                if not touched[c]:
                    touched[c] = True
                    ncomms[cnt] = c
                    cnt += 1
                nw[c] += weights[p]
            ki = k[i]
            tot[ci] -= ki
            best = ci
            best_gain = nw[ci] * m2 - resolution * tot[ci] * ki
            for t in range(cnt):
                c = ncomms[t]
                gain = nw[c] * m2 - resolution * tot[c] * ki
                if gain > best_gain:
                    best_gain = gain
                    best = c
            tot[best] += ki
            if best != ci:
                comm[i] = best
                improved = True
                moved_any = True
            for t in range(cnt):
                c = ncomms[t]
                nw[c] = 0.0
                touched[c] = False
    return comm, moved_any


@njit(cache=True)
def _aggregate(n, indptr, indices, weights, selfw, comm, n_new):
    new_self = np.zeros(n_new)
    for i in range(n):
        new_self[comm[i]] += selfw[i]
    m = len(indices)
    keys = np.empty(m, dtype=np.int64)
    kw = np.empty(m)
    cnt = 0
    for i in range(n):
        ci = comm[i]
        for p in range(indptr[i], indptr[i + 1]):
            cj = comm[indices[p]]
            if ci == cj:
                # each undirected edge is seen from both ends
                new_self[ci] += 0.5 * weights[p]
            else:
                keys[cnt] = ci * n_new + cj
                kw[cnt] = weights[p]
                cnt += 1
    keys = keys[:cnt]
    kw = kw[:cnt]
    order = np.argsort(keys, kind="mergesort")
    new_indptr = np.zeros(n_new + 1, dtype=np.int64)
    new_indices = np.empty(cnt, dtype=np.int64)
    new_weights = np.empty(cnt)
    out = -1
    last = -1
    for t in range(cnt):
        key = keys[order[t]]
        if key != last:
            out += 1
            last = key
            new_indices[out] = key % n_new
            new_weights[out] = 0.0
            new_indptr[key // n_new + 1] += 1
        new_weights[out] += kw[order[t]]
    for c in range(n_new):
        new_indptr[c + 1] += new_indptr[c]
    return new_indptr, new_indices[: out + 1], new_weights[: out + 1], new_self


def louvain(n, u, v, seed, resolution=1.0):
    """Community label per node (labels not normalized).

    Each level visits nodes in a fresh permutation drawn from
    ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    node_comm = np.arange(n, dtype=np.int64)
    if n == 0 or len(u) == 0:
        return node_comm
    indptr, indices, weights = csr_from_edges(n, np.asarray(u, np.int64), np.asarray(v, np.int64))
    selfw = np.zeros(n)
    size = n
    while True:
        order = rng.permutation(size).astype(np.int64)
        comm, moved = _local_moving(size, indptr, indices, weights, selfw, order, float(resolution))
        if not moved:
            break
        _, dense = np.unique(comm, return_inverse=True)
        dense = dense.astype(np.int64)
        n_new = int(dense.max()) + 1
        node_comm = dense[node_comm]
        indptr, indices, weights, selfw = _aggregate(size, indptr, indices, weights, selfw, dense, n_new)
        size = n_new
    return node_comm
