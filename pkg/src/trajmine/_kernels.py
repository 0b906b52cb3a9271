"""Compiled inner loops: LCS, condensed pair matrix, NN-chain Ward."""

import os
import warnings

import numba
import numpy as np
from numba import njit, prange

# an outdated system TBB is skipped by numba anyway; the fallback layer is fine
warnings.filterwarnings("ignore", message=r"The TBB threading layer requires", category=numba.NumbaWarning)


def configure_threads(workers=None):
    """Cap numba's pool at `workers`, else TRAJMINE_THREADS, else leave as is."""
    if workers is None:
        env = os.environ.get("TRAJMINE_THREADS")
        if not env:
            return numba.get_num_threads()
        workers = int(env)
    workers = max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(workers)
    return workers


@njit(cache=True, nogil=True)
def lcs_encoded(a, b):
    if a.shape[0] < b.shape[0]:
        a, b = b, a
    m = b.shape[0]
    prev = np.zeros(m + 1, dtype=np.int32)
    cur = np.zeros(m + 1, dtype=np.int32)
    for i in range(a.shape[0]):
        ai = a[i]
        for j in range(m):
            if ai == b[j]:
                cur[j + 1] = prev[j] + 1
            elif cur[j] >= prev[j + 1]:
                cur[j + 1] = cur[j]
            else:
                cur[j + 1] = prev[j + 1]
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True, parallel=True)
def condensed_distances(flat, offsets):
    n = offsets.shape[0] - 1
    out = np.empty(n * (n - 1) // 2, dtype=np.uint32)
    for i in prange(n - 1):
        a = flat[offsets[i]:offsets[i + 1]]
        la = a.shape[0]
        base = n * i - (i * (i + 1)) // 2 - i - 1
        for j in range(i + 1, n):
            b = flat[offsets[j]:offsets[j + 1]]
            out[base + j] = la + b.shape[0] - 2 * lcs_encoded(a, b)
    return out


@njit(cache=True, inline="always")
def _cidx(n, i, j):
    if i > j:
        i, j = j, i
    return n * i - (i * (i + 1)) // 2 + j - i - 1


@njit(cache=True)
def ward_nn_chain(dist, n):
    """Ward agglomeration by nearest-neighbour chain on a condensed matrix.

    `dist` is overwritten. Returns merges as (slot_a, slot_b, height) in the
    order they were found; the caller sorts them by height.
    """
    size = np.ones(n, dtype=np.float64)
    active = np.ones(n, dtype=np.bool_)
    chain = np.empty(n, dtype=np.int64)
    out_a = np.empty(n - 1, dtype=np.int64)
    out_b = np.empty(n - 1, dtype=np.int64)
    out_h = np.empty(n - 1, dtype=np.float64)
    top = 0
    for step in range(n - 1):
        if top == 0:
            for i in range(n):
                if active[i]:
                    chain[0] = i
                    top = 1
                    break
        while True:
            x = chain[top - 1]
            if top > 1:
                y = chain[top - 2]
                best = dist[_cidx(n, x, y)]
            else:
                y = -1
                best = np.inf
            for i in range(n):
                if i != x and active[i]:
                    d = dist[_cidx(n, x, i)]
                    if d < best:
                        best = d
                        y = i
            if top > 1 and y == chain[top - 2]:
                break
            chain[top] = y
            top += 1
        top -= 2
        x = chain[top + 1]
        y = chain[top]
        if x > y:
            x, y = y, x
        out_a[step] = x
        out_b[step] = y
        out_h[step] = best
        sx = size[x]
        sy = size[y]
        for k in range(n):
            if k == x or k == y or not active[k]:
                continue
            sk = size[k]
            t = sx + sy + sk
            dxk = dist[_cidx(n, x, k)]
            dyk = dist[_cidx(n, y, k)]
            d = ((sx + sk) / t) * dxk + ((sy + sk) / t) * dyk - (sk / t) * best
            # exact Ward never drops below min(dxk, dyk); rounding can by one ulp
            lo = min(dxk, dyk)
            dist[_cidx(n, y, k)] = d if d >= lo else lo
        active[x] = False
        size[y] = sx + sy
    return out_a, out_b, out_h
