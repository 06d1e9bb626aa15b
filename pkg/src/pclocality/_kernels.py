"""Compiled per-trial percolation kernels.

Every kernel derives its edge variates from ``(master seed, trial, edge hash)``
alone and writes one result per trial, so output does not depend on the
number of threads. Edge ``e`` is open in trial ``t`` iff ``U(e, t) < p``.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(inline="always", cache=True)
def splitmix64(x):
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@njit(inline="always", cache=True)
def trial_key(seed_mix, trial):
    # seed_mix is splitmix64(master_seed), precomputed once per call.
    return splitmix64(seed_mix ^ np.uint64(trial))


@njit(inline="always", cache=True)
def uniform(h, key):
    return np.float64(splitmix64(h ^ key) >> _S11) * _INV_2_53


@njit(inline="always", cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(inline="always", cache=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1


@njit(cache=True)
def open_bits(hashes, p, seed_mix, trial):
    key = trial_key(seed_mix, trial)
    out = np.zeros(hashes.shape[0], dtype=np.bool_)
    for e in range(hashes.shape[0]):
        out[e] = uniform(hashes[e], key) < p
    return out


@njit(parallel=True, cache=True)
def connection_hits(n, edges, hashes, targets, p, seed_mix, first, trials, chunk):
    """Per-chunk counts of trials in which the root (vertex 0) and each target share a cluster."""
    n_chunks = (trials + chunk - 1) // chunk
    counts = np.zeros((n_chunks, targets.shape[0]), dtype=np.int64)
    m = edges.shape[0]
    for c in prange(n_chunks):
        parent = np.empty(n, dtype=np.int64)
        rank = np.empty(n, dtype=np.int8)
        stop = min(trials, (c + 1) * chunk)
        for t in range(c * chunk, stop):
            key = trial_key(seed_mix, first + t)
            for i in range(n):
                parent[i] = i
                rank[i] = 0
            for e in range(m):
                if uniform(hashes[e], key) < p:
                    _union(parent, rank, edges[e, 0], edges[e, 1])
            r0 = _find(parent, 0)
            for k in range(targets.shape[0]):
                if _find(parent, targets[k]) == r0:
                    counts[c, k] += 1
    return counts


@njit(parallel=True, cache=True)
def reach_hits(indptr, nbr, eid, level, hashes, radius, p, seed_mix, first, trials, chunk):
    """Per-chunk counts of trials whose open cluster of the root touches ``level == radius``.

    Breadth-first search that draws an edge's variate only when the edge is reached.
    """
    n = indptr.shape[0] - 1
    n_chunks = (trials + chunk - 1) // chunk
    counts = np.zeros(n_chunks, dtype=np.int64)
    for c in prange(n_chunks):
        seen = np.zeros(n, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        stop = min(trials, (c + 1) * chunk)
        for t in range(c * chunk, stop):
            stamp = t + 1
            key = trial_key(seed_mix, first + t)
            head = 0
            tail = 1
            queue[0] = 0
            seen[0] = stamp
            hit = radius == 0
            while head < tail and not hit:
                v = queue[head]
                head += 1
                for k in range(indptr[v], indptr[v + 1]):
                    w = nbr[k]
                    if seen[w] == stamp or level[w] > radius:
                        continue
                    if uniform(hashes[eid[k]], key) < p:
                        if level[w] == radius:
                            hit = True
                            break
                        seen[w] = stamp
                        queue[tail] = w
                        tail += 1
            if hit:
                counts[c] += 1
    return counts


@njit(cache=True)
def _heap_push(hv, hi, size, val, item):
    k = size
    hv[k] = val
    hi[k] = item
    while k > 0:
        parent = (k - 1) >> 1
        if hv[parent] <= hv[k]:
            break
        hv[parent], hv[k] = hv[k], hv[parent]
        hi[parent], hi[k] = hi[k], hi[parent]
        k = parent
    return size + 1


@njit(cache=True)
def _heap_pop(hv, hi, size):
    val = hv[0]
    item = hi[0]
    size -= 1
    hv[0] = hv[size]
    hi[0] = hi[size]
    k = 0
    while True:
        left = 2 * k + 1
        if left >= size:
            break
        right = left + 1
        child = right if right < size and hv[right] < hv[left] else left
        if hv[k] <= hv[child]:
            break
        hv[k], hv[child] = hv[child], hv[k]
        hi[k], hi[child] = hi[child], hi[k]
        k = child
    return val, item, size


@njit(parallel=True, cache=True)
def reach_thresholds(indptr, nbr, eid, level, hashes, radii, seed_mix, first, trials):
    """For each trial and each radius ``n`` in ``radii`` (increasing), the smallest bottleneck
    ``max U(e)`` over paths from the root to the sphere of radius ``n``.

    The root reaches that sphere at parameter ``p`` iff the value is ``< p``. Vertices are
    settled in nondecreasing bottleneck order (a Prim-style search), so the first settled
    vertex at level ``n`` gives the value for radius ``n``.
    """
    n = indptr.shape[0] - 1
    k_r = radii.shape[0]
    rmax = radii[k_r - 1]
    out = np.empty((trials, k_r), dtype=np.float64)
    cap = indptr[n] + 1
    for t in prange(trials):
        key = trial_key(seed_mix, first + t)
        best = np.full(n, 2.0)
        done = np.zeros(n, dtype=np.bool_)
        hv = np.empty(cap, dtype=np.float64)
        hi = np.empty(cap, dtype=np.int64)
        for j in range(k_r):
            out[t, j] = 1.0
        size = _heap_push(hv, hi, 0, 0.0, 0)
        best[0] = 0.0
        next_r = 0
        while size > 0 and next_r < k_r:
            val, v, size = _heap_pop(hv, hi, size)
            if done[v]:
                continue
            done[v] = True
            while next_r < k_r and level[v] >= radii[next_r]:
                out[t, next_r] = val
                next_r += 1
            if level[v] >= rmax:
                continue
            for k in range(indptr[v], indptr[v + 1]):
                w = nbr[k]
                if done[w]:
                    continue
                u = uniform(hashes[eid[k]], key)
                cand = u if u > val else val
                if cand < best[w]:
                    best[w] = cand
                    size = _heap_push(hv, hi, size, cand, w)
    return out


@njit(cache=True)
def exact_connection(n, edges, targets, p):
    """Sum over all ``2**m`` open sets of the probability that the root meets each target."""
    m = edges.shape[0]
    out = np.zeros(targets.shape[0])
    parent = np.empty(n, dtype=np.int64)
    rank = np.empty(n, dtype=np.int8)
    q = 1.0 - p
    for mask in range(1 << m):
        k = 0
        for i in range(n):
            parent[i] = i
            rank[i] = 0
        for e in range(m):
            if (mask >> e) & 1:
                k += 1
                _union(parent, rank, edges[e, 0], edges[e, 1])
        w = p**k * q ** (m - k)
        if w == 0.0:
            continue
        r0 = _find(parent, 0)
        for j in range(targets.shape[0]):
            if _find(parent, targets[j]) == r0:
                out[j] += w
    return out
