# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled segment-reduce / gather kernels (hot inner loops)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def segment_sum(double[:, ::1] feats, long[::1] sorted_idx, long[::1] offsets):
    cdef Py_ssize_t n_seg = offsets.shape[0] - 1
    cdef Py_ssize_t c = feats.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_seg, c))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t s, j, k, row
    for s in range(n_seg):
        for j in range(offsets[s], offsets[s + 1]):
            row = sorted_idx[j]
            for k in range(c):
                o[s, k] += feats[row, k]
    return out


def segment_mean(double[:, ::1] feats, long[::1] sorted_idx, long[::1] offsets):
    # base + sum(x - base) / count: bit-exact when all rows agree
    cdef Py_ssize_t n_seg = offsets.shape[0] - 1
    cdef Py_ssize_t c = feats.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_seg, c))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t s, j, k, row, base
    cdef double cnt
    for s in range(n_seg):
        base = sorted_idx[offsets[s]]
        cnt = offsets[s + 1] - offsets[s]
        for j in range(offsets[s], offsets[s + 1]):
            row = sorted_idx[j]
            for k in range(c):
                o[s, k] += feats[row, k] - feats[base, k]
        for k in range(c):
            o[s, k] = feats[base, k] + o[s, k] / cnt
    return out


def segment_max(double[:, ::1] feats, long[::1] sorted_idx, long[::1] offsets):
    cdef Py_ssize_t n_seg = offsets.shape[0] - 1
    cdef Py_ssize_t c = feats.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_seg, c))
    cdef cnp.ndarray[cnp.int64_t, ndim=2] arg = np.empty((n_seg, c), dtype=np.int64)
    cdef double[:, ::1] o = out
    cdef long[:, ::1] a = arg
    cdef Py_ssize_t s, j, k, row
    cdef double v
    for s in range(n_seg):
        row = sorted_idx[offsets[s]]
        for k in range(c):
            o[s, k] = feats[row, k]
            a[s, k] = row
        for j in range(offsets[s] + 1, offsets[s + 1]):
            row = sorted_idx[j]
            for k in range(c):
                v = feats[row, k]
                if v > o[s, k]:
                    o[s, k] = v
                    a[s, k] = row
    return out, arg


def gather_rows(double[:, ::1] vfeats, long[::1] p2v):
    cdef Py_ssize_t n = p2v.shape[0]
    cdef Py_ssize_t c = vfeats.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, c))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, k
    cdef long v
    for i in range(n):
        v = p2v[i]
        if v >= 0:
            for k in range(c):
                o[i, k] = vfeats[v, k]
    return out


def scatter_add_rows(double[:, ::1] rows, long[::1] p2v, Py_ssize_t n_out):
    cdef Py_ssize_t n = p2v.shape[0]
    cdef Py_ssize_t c = rows.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_out, c))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, k
    cdef long v
    for i in range(n):
        v = p2v[i]
        if v >= 0:
            for k in range(c):
                o[v, k] += rows[i, k]
    return out
