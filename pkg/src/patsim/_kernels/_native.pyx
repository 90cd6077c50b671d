# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""C implementation of the selection kernel.

Maintains a bounded heap of the best k entries while scanning the scores
once: O(n log k) time, O(k) memory, no full sort. The heap root is the
worst kept entry; a scanned entry replaces it when it wins on
(score descending, tie_rank ascending).
"""

from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp


cdef inline bint _beats(double s_new, cnp.int64_t r_new,
                        double s_old, cnp.int64_t r_old) noexcept nogil:
    if s_new != s_old:
        return s_new > s_old
    return r_new < r_old


cdef inline void _sift_down(double* hs, cnp.int64_t* hr, cnp.int64_t* hi,
                            Py_ssize_t pos, Py_ssize_t size) noexcept nogil:
    cdef Py_ssize_t child
    cdef double s = hs[pos]
    cdef cnp.int64_t r = hr[pos], idx = hi[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        # pick the worse child so the worst entry stays on top
        if child + 1 < size and _beats(hs[child], hr[child], hs[child + 1], hr[child + 1]):
            child += 1
        if _beats(s, r, hs[child], hr[child]):
            hs[pos] = hs[child]
            hr[pos] = hr[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hs[pos] = s
    hr[pos] = r
    hi[pos] = idx


def topk_select(const double[::1] scores, const cnp.int64_t[::1] tie_rank, Py_ssize_t k):
    """Indices of the k best entries by (score descending, tie_rank ascending)."""
    cdef Py_ssize_t n = scores.shape[0]
    if tie_rank.shape[0] != n:
        raise ValueError("scores and tie_rank must be equal-length 1-d arrays")
    if k > n:
        k = n
    if k <= 0:
        return np.empty(0, dtype=np.int64)

    out = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] out_view = out
    cdef double* hs = <double*> malloc(k * sizeof(double))
    cdef cnp.int64_t* hr = <cnp.int64_t*> malloc(k * sizeof(cnp.int64_t))
    cdef cnp.int64_t* hi = <cnp.int64_t*> malloc(k * sizeof(cnp.int64_t))
    if hs == NULL or hr == NULL or hi == NULL:
        free(hs)
        free(hr)
        free(hi)
        raise MemoryError()

    cdef Py_ssize_t i, j
    with nogil:
        for i in range(k):
            hs[i] = scores[i]
            hr[i] = tie_rank[i]
            hi[i] = i
        for i in range((k - 2) // 2, -1, -1):
            _sift_down(hs, hr, hi, i, k)
        for i in range(k, n):
            if _beats(scores[i], tie_rank[i], hs[0], hr[0]):
                hs[0] = scores[i]
                hr[0] = tie_rank[i]
                hi[0] = i
                _sift_down(hs, hr, hi, 0, k)
        # pop worst-first into the tail of the output
        for j in range(k - 1, -1, -1):
            out_view[j] = hi[0]
            hs[0] = hs[j]
            hr[0] = hr[j]
            hi[0] = hi[j]
            _sift_down(hs, hr, hi, 0, j)

    free(hs)
    free(hr)
    free(hi)
    return out
