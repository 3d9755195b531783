# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: backoff trigram scoring and dependency-length sums.

Mirrors the NumPy fallbacks in wordorder.kernels; same packed-key table
layout, same results.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _bsearch(const cnp.int64_t[::1] keys, cnp.int64_t q) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < q:
            lo = mid + 1
        else:
            hi = mid
    if lo < keys.shape[0] and keys[lo] == q:
        return lo
    return -1


def trigram_logprobs(cnp.int64_t[::1] ids,
                     cnp.int64_t V,
                     cnp.float64_t[::1] uni_logp,
                     cnp.int64_t[::1] bi_keys,
                     cnp.float64_t[::1] bi_logp,
                     cnp.float64_t[::1] bi_alpha,
                     cnp.int64_t[::1] tri_keys,
                     cnp.float64_t[::1] tri_logp,
                     cnp.int64_t[::1] tri_ctx_keys,
                     cnp.float64_t[::1] tri_ctx_alpha):
    cdef Py_ssize_t m = ids.shape[0] - 2
    if m < 0:
        m = 0
    out = np.empty(m, dtype=np.float64)
    cdef cnp.float64_t[::1] o = out
    cdef Py_ssize_t i, j
    cdef cnp.int64_t a, b, c
    cdef double acc
    with nogil:
        for i in range(m):
            a = ids[i]
            b = ids[i + 1]
            c = ids[i + 2]
            j = _bsearch(tri_keys, (a * V + b) * V + c)
            if j >= 0:
                o[i] = tri_logp[j]
                continue
            acc = 0.0
            j = _bsearch(tri_ctx_keys, a * V + b)
            if j >= 0:
                acc = tri_ctx_alpha[j]
            j = _bsearch(bi_keys, b * V + c)
            if j >= 0:
                o[i] = acc + bi_logp[j]
            else:
                o[i] = acc + bi_alpha[b] + uni_logp[c]
    return out


def dep_length(cnp.int64_t[::1] heads, cnp.int64_t[::1] ordering):
    cdef Py_ssize_t n = heads.shape[0]
    cdef cnp.int64_t[::1] pos = np.empty(n + 1, dtype=np.int64)
    cdef Py_ssize_t i
    cdef cnp.int64_t total = 0, gap
    with nogil:
        for i in range(n):
            pos[ordering[i]] = i
        for i in range(n):
            if heads[i] != 0:
                gap = pos[heads[i]] - pos[i + 1]
                if gap < 0:
                    gap = -gap
                gap -= 1
                if gap > 0:
                    total += gap
    return total


def dep_length_batch(cnp.int64_t[::1] heads, cnp.int64_t[:, ::1] orderings):
    cdef Py_ssize_t m = orderings.shape[0]
    cdef Py_ssize_t n = orderings.shape[1]
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef cnp.int64_t[::1] pos = np.empty(n + 1, dtype=np.int64)
    cdef Py_ssize_t r, i
    cdef cnp.int64_t total, gap
    with nogil:
        for r in range(m):
            for i in range(n):
                pos[orderings[r, i]] = i
            total = 0
            for i in range(n):
                if heads[i] != 0:
                    gap = pos[heads[i]] - pos[i + 1]
                    if gap < 0:
                        gap = -gap
                    gap -= 1
                    if gap > 0:
                        total += gap
            o[r] = total
    return out
