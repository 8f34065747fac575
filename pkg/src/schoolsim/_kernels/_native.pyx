# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled LCS kernel (same contract as the pure-Python fallback)."""

from libc.stdlib cimport free, malloc


def lcs_length_ids(x, y):
    """Length of the longest common subsequence of two id sequences."""
    cdef long long[::1] xv = x
    cdef long long[::1] yv = y
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t m = yv.shape[0]
    if n == 0 or m == 0:
        return 0
    if n < m:
        xv, yv = yv, xv
        n, m = m, n
    cdef long long *prev = <long long *> malloc((m + 1) * sizeof(long long))
    cdef long long *curr = <long long *> malloc((m + 1) * sizeof(long long))
    if prev == NULL or curr == NULL:
        free(prev)
        free(curr)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef long long xi, a, b
    cdef long long *tmp
    try:
        for j in range(m + 1):
            prev[j] = 0
            curr[j] = 0
        for i in range(n):
            xi = xv[i]
            for j in range(1, m + 1):
                if xi == yv[j - 1]:
                    curr[j] = prev[j - 1] + 1
                else:
                    a = prev[j]
                    b = curr[j - 1]
                    curr[j] = a if a >= b else b
            tmp = prev
            prev = curr
            curr = tmp
        return prev[m]
    finally:
        free(prev)
        free(curr)
