# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled mining kernels; see ``_pykernels`` for the data layout."""

from cpython.array cimport array, clone

cdef array _INT_TEMPLATE = array("i")


def count_extensions(const int[:] flat, const int[:] offsets, const int[:] proj_seq,
                     const int[:] proj_pos, int n_items):
    cdef array counts = clone(_INT_TEMPLATE, n_items, True)
    cdef array last = clone(_INT_TEMPLATE, n_items, False)
    cdef int[:] c = counts
    cdef int[:] seen = last
    cdef Py_ssize_t j, i, end, n = proj_seq.shape[0]
    cdef int item
    for i in range(n_items):
        seen[i] = -1
    for j in range(n):
        end = offsets[proj_seq[j] + 1]
        for i in range(proj_pos[j] + 1, end):
            item = flat[i]
            if seen[item] != j:
                seen[item] = <int>j
                c[item] += 1
    return counts


def project(const int[:] flat, const int[:] offsets, const int[:] proj_seq,
            const int[:] proj_pos, int item):
    cdef Py_ssize_t n = proj_seq.shape[0]
    cdef array out_seq = clone(_INT_TEMPLATE, n, False)
    cdef array out_pos = clone(_INT_TEMPLATE, n, False)
    cdef int[:] os = out_seq
    cdef int[:] op = out_pos
    cdef Py_ssize_t j, i, end, kept = 0
    for j in range(n):
        end = offsets[proj_seq[j] + 1]
        for i in range(proj_pos[j] + 1, end):
            if flat[i] == item:
                os[kept] = proj_seq[j]
                op[kept] = <int>i
                kept += 1
                break
    out_seq = out_seq[:kept]
    out_pos = out_pos[:kept]
    return out_seq, out_pos
