# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: sliding-median subtraction, Viterbi decoding, forest prediction.

The numpy fallback in ``_python_ref`` implements the same contracts; ``kernels``
selects between the two at import time.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline void _bit_add(int* bit, int n, int pos, int delta) nogil:
    cdef int i = pos + 1
    while i <= n:
        bit[i] += delta
        i += i & (-i)


cdef inline int _bit_select(int* bit, int n, int log2n, int k) nogil:
    # Smallest 0-based rank with cumulative count >= k (k is 1-based).
    cdef int pos = 0
    cdef int rem = k
    cdef int step = 1 << log2n
    while step > 0:
        if pos + step <= n and bit[pos + step] < rem:
            pos += step
            rem -= bit[pos]
        step >>= 1
    return pos


def median_subtract(cnp.ndarray[cnp.float64_t, ndim=2] mags, int radius, bint clamp):
    """Per-band sliding-window median subtraction, window truncated at edges.

    out[t, b] = mags[t, b] - median(mags[max(0, t-radius) .. min(n-1, t+radius), b])
    clamped at zero when ``clamp`` is set. Even-width edge windows use the
    mean of the two middle order statistics, matching numpy's median.
    """
    cdef Py_ssize_t n = mags.shape[0]
    cdef Py_ssize_t nb = mags.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=2] order = np.argsort(mags, axis=0, kind="stable").astype(np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] ranks = np.empty((n, nb), dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty_like(mags)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] bit_arr = np.zeros(n + 1, dtype=np.int32)

    cdef int* bit = <int*> bit_arr.data
    cdef Py_ssize_t b, t, hi, lo
    cdef int cnt, k1, k2, p1, p2, log2n
    cdef double med, v

    log2n = 0
    while (<Py_ssize_t> 1 << (log2n + 1)) <= n:
        log2n += 1

    for b in range(nb):
        for t in range(n):
            ranks[order[t, b], b] = <int> t

    for b in range(nb):
        bit_arr.fill(0)
        cnt = 0
        hi = radius if radius < n - 1 else n - 1
        for t in range(hi + 1):
            _bit_add(bit, <int> n, ranks[t, b], 1)
            cnt += 1
        for t in range(n):
            if t > 0:
                hi = t + radius
                if hi < n:
                    _bit_add(bit, <int> n, ranks[hi, b], 1)
                    cnt += 1
                lo = t - radius - 1
                if lo >= 0:
                    _bit_add(bit, <int> n, ranks[lo, b], -1)
                    cnt -= 1
            k1 = (cnt - 1) >> 1
            k2 = cnt >> 1
            p1 = _bit_select(bit, <int> n, log2n, k1 + 1)
            med = mags[order[p1, b], b]
            if k2 != k1:
                p2 = _bit_select(bit, <int> n, log2n, k2 + 1)
                med = 0.5 * (med + mags[order[p2, b], b])
            v = mags[t, b] - med
            if clamp and v < 0.0:
                v = 0.0
            out[t, b] = v
    return out


def viterbi(cnp.ndarray[cnp.float64_t, ndim=1] log_init,
            cnp.ndarray[cnp.float64_t, ndim=2] log_trans,
            cnp.ndarray[cnp.float64_t, ndim=2] log_lik):
    """Max-product decoding; ties go to the lower state index.

    Returns (path int64[T], log_prob). Raises ValueError when no state can
    explain a frame (all scores -inf).
    """
    cdef Py_ssize_t T = log_lik.shape[0]
    cdef Py_ssize_t S = log_lik.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev = np.empty(S, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cur = np.empty(S, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] backptr = np.zeros((T, S), dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path = np.empty(T, dtype=np.int64)
    cdef Py_ssize_t t, i, j
    cdef double best, score, neg_inf
    cdef int arg

    neg_inf = -np.inf
    for j in range(S):
        prev[j] = log_init[j] + log_lik[0, j]
    best = neg_inf
    for j in range(S):
        if prev[j] > best:
            best = prev[j]
    if best == neg_inf:
        raise ValueError("model cannot explain observation at frame 0")

    for t in range(1, T):
        for j in range(S):
            best = neg_inf
            arg = 0
            for i in range(S):
                score = prev[i] + log_trans[i, j]
                if score > best:
                    best = score
                    arg = <int> i
            cur[j] = best + log_lik[t, j]
            backptr[t, j] = arg
        best = neg_inf
        for j in range(S):
            if cur[j] > best:
                best = cur[j]
        if best == neg_inf:
            raise ValueError(f"model cannot explain observation at frame {t}")
        for j in range(S):
            prev[j] = cur[j]

    best = neg_inf
    arg = 0
    for j in range(S):
        if prev[j] > best:
            best = prev[j]
            arg = <int> j
    path[T - 1] = arg
    for t in range(T - 2, -1, -1):
        path[t] = backptr[t + 1, path[t + 1]]
    return path, best


def forest_predict(cnp.ndarray[cnp.float32_t, ndim=2] X,
                   cnp.ndarray[cnp.int32_t, ndim=1] feature,
                   cnp.ndarray[cnp.float64_t, ndim=1] threshold,
                   cnp.ndarray[cnp.int32_t, ndim=1] left,
                   cnp.ndarray[cnp.int32_t, ndim=1] right,
                   cnp.ndarray[cnp.float64_t, ndim=1] value,
                   cnp.ndarray[cnp.int64_t, ndim=1] tree_offsets):
    """Mean leaf value over trees; feature < threshold descends left."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_trees = tree_offsets.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n, dtype=np.float64)
    cdef Py_ssize_t s, tr
    cdef cnp.int64_t root
    cdef int node
    with nogil:
        for tr in range(n_trees):
            root = tree_offsets[tr]
            for s in range(n):
                node = <int> root
                while left[node] >= 0:
                    if X[s, feature[node]] < threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                out[s] += value[node]
    out /= <double> n_trees
    return out
