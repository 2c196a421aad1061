# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the interference error-rate evaluators.

Semantics match ``_kernels_py`` exactly; see that module for the reference
implementations.
"""

import numpy as np

from libc.math cimport erfc, exp, expm1, sqrt, floor, ceil, INFINITY, M_SQRT1_2
from scipy.special.cython_special cimport log_ndtr

cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline double _q(double x) noexcept nogil:
    if x > 38.5:
        return 0.0
    return 0.5 * erfc(x * M_SQRT1_2)


def pairwise_q_sums(const double[:, ::1] v, const unsigned char[:, ::1] valid,
                    int N, const double[::1] scales, double[::1] out):
    """Accumulate the |D|+1 Q-function approximation over configurations."""
    cdef Py_ssize_t B = v.shape[0], M = v.shape[1], S = scales.shape[0]
    cdef Py_ssize_t b, j, si, arg1
    cdef double top1, top2, x, vmax, acc, sc
    cdef int nd
    with nogil:
        for b in range(B):
            top1 = -INFINITY
            top2 = -INFINITY
            arg1 = -1
            nd = 0
            for j in range(M):
                if not valid[b, j]:
                    continue
                nd += 1
                x = v[b, j]
                if x > top1:
                    top2 = top1
                    top1 = x
                    arg1 = j
                elif x > top2:
                    top2 = x
            for si in range(S):
                sc = scales[si]
                acc = 0.0
                for j in range(M):
                    if not valid[b, j]:
                        continue
                    vmax = top2 if j == arg1 else top1
                    acc += _q((N + v[b, j] - vmax) * sc)
                acc += (N - nd) * _q((N - top1) * sc)
                out[si] += acc / N


def max_projection_sums(const double[:, ::1] proj, const unsigned char[:, ::1] eligible,
                        const double[::1] scales, double[::1] out):
    """Accumulate the symbol-averaged maximum-projection bound over configurations."""
    cdef Py_ssize_t B = proj.shape[0], N = proj.shape[1], S = scales.shape[0]
    cdef Py_ssize_t b, k, s, si, arg1
    cdef double top1, top2, x, vmax, acc, sc
    with nogil:
        for b in range(B):
            top1 = -INFINITY
            top2 = -INFINITY
            arg1 = -1
            for k in range(N):
                if not eligible[b, k]:
                    continue
                x = proj[b, k]
                if x > top1:
                    top2 = top1
                    top1 = x
                    arg1 = k
                elif x > top2:
                    top2 = x
            for si in range(S):
                sc = scales[si]
                acc = 0.0
                for s in range(N):
                    vmax = top2 if s == arg1 else top1
                    if vmax == -INFINITY:
                        continue
                    acc += _q((N + proj[b, s] - vmax) * sc)
                out[si] += acc / N


def exact_error_probs(const double[:, ::1] mu, double sigma, double width, int ny,
                      double[:, ::1] out):
    """Per-symbol error probability for each configuration row of bin means."""
    cdef Py_ssize_t B = mu.shape[0], N = mu.shape[1]
    cdef double h = 2.0 * width * sigma / (ny - 1)
    cdef double half = width * sigma
    cdef Py_ssize_t b, k, s, i, g, nseg, t, T, pos
    cdef double y, acc, c, u, ls
    cdef long long[::1] a = np.empty(N, dtype=np.int64)
    cdef long long[::1] e = np.empty(N, dtype=np.int64)
    cdef long long[::1] base = np.empty(N, dtype=np.int64)
    cdef long long[::1] seg_start = np.empty(N, dtype=np.int64)
    cdef long long[::1] seg_end = np.empty(N, dtype=np.int64)
    cdef long long[::1] seg_off = np.empty(N + 1, dtype=np.int64)
    cdef long long[::1] order
    cdef long long[::1] seg_of = np.empty(N, dtype=np.int64)
    cdef double[::1] total = np.empty(0)
    cdef long long idx
    for b in range(B):
        for s in range(N):
            c = N + mu[b, s]
            a[s] = <long long>ceil((c - half) / h - 1e-9)
            e[s] = <long long>floor((c + half) / h + 1e-9)
        order = np.argsort(a, kind="stable")
        nseg = 0
        for i in range(N):
            s = order[i]
            if nseg > 0 and a[s] <= seg_end[nseg - 1] + 1:
                if e[s] > seg_end[nseg - 1]:
                    seg_end[nseg - 1] = e[s]
            else:
                seg_start[nseg] = a[s]
                seg_end[nseg] = e[s]
                nseg += 1
            seg_of[s] = nseg - 1
        seg_off[0] = 0
        for g in range(nseg):
            seg_off[g + 1] = seg_off[g] + seg_end[g] - seg_start[g] + 1
        T = seg_off[nseg]
        if total.shape[0] < T:
            total = np.empty(T)
        with nogil:
            for g in range(nseg):
                for idx in range(seg_start[g], seg_end[g] + 1):
                    y = idx * h
                    acc = 0.0
                    for k in range(N):
                        acc = acc + log_ndtr((y - mu[b, k]) / sigma)
                    total[seg_off[g] + idx - seg_start[g]] = acc
            for s in range(N):
                g = seg_of[s]
                c = N + mu[b, s]
                acc = 0.0
                for idx in range(a[s], e[s] + 1):
                    y = idx * h
                    pos = seg_off[g] + idx - seg_start[g]
                    u = (y - c) / sigma
                    ls = log_ndtr((y - mu[b, s]) / sigma)
                    acc = acc + exp(-0.5 * u * u) * (-expm1(total[pos] - ls))
                out[b, s] = acc * h * INV_SQRT_2PI / sigma
