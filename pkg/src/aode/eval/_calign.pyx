# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled minimum-edit-distance alignment; same contract as ``_align_py``."""

from libc.stdlib cimport malloc, free


def align_counts(ref, hyp):
    cdef Py_ssize_t n = len(ref)
    cdef Py_ssize_t m = len(hyp)
    cdef Py_ssize_t width = m + 1
    cdef Py_ssize_t i, j, row, prev
    cdef long r, diag, up, left, best, here, cost
    cdef long subs = 0, dels = 0, ins = 0
    cdef long *a = <long *> malloc(max(n, 1) * sizeof(long))
    cdef long *b = <long *> malloc(max(m, 1) * sizeof(long))
    cdef long *dist = <long *> malloc((n + 1) * width * sizeof(long))
    if a == NULL or b == NULL or dist == NULL:
        free(a)
        free(b)
        free(dist)
        raise MemoryError()
    try:
        for i in range(n):
            a[i] = ref[i]
        for j in range(m):
            b[j] = hyp[j]
        for j in range(width):
            dist[j] = j
        for i in range(1, n + 1):
            row = i * width
            prev = row - width
            dist[row] = i
            r = a[i - 1]
            for j in range(1, width):
                diag = dist[prev + j - 1] + (r != b[j - 1])
                up = dist[prev + j] + 1
                left = dist[row + j - 1] + 1
                best = diag if diag < up else up
                dist[row + j] = best if best < left else left

        i = n
        j = m
        while i > 0 or j > 0:
            here = dist[i * width + j]
            if i > 0 and j > 0:
                cost = a[i - 1] != b[j - 1]
                if dist[(i - 1) * width + j - 1] + cost == here:
                    subs += cost
                    i -= 1
                    j -= 1
                    continue
            if j > 0 and dist[i * width + j - 1] + 1 == here:
                ins += 1
                j -= 1
                continue
            dels += 1
            i -= 1
        return subs, dels, ins
    finally:
        free(a)
        free(b)
        free(dist)
