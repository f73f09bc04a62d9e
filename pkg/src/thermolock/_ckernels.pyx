# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Same API as ``_pykernels``; see that module for semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline int _parity(uint64_t v) nogil:
    return __builtin_parityll(v)

cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil
    int __builtin_clzll(unsigned long long) nogil


cdef inline int _row(const uint64_t[::1] xw, const uint64_t[::1] yw, Py_ssize_t wx, Py_ssize_t i) nogil:
    cdef Py_ssize_t w = i >> 6, k
    cdef int b = i & 63
    cdef uint64_t acc = 0, win
    if b == 0:
        for k in range(wx):
            acc ^= yw[w + k] & xw[k]
    else:
        for k in range(wx):
            win = (yw[w + k] >> b) | (yw[w + k + 1] << (64 - b))
            acc ^= win & xw[k]
    return _parity(acc)


def toeplitz_bits(const uint64_t[::1] xw, const uint64_t[::1] yw, Py_ssize_t n, Py_ssize_t t):
    cdef Py_ssize_t wx = (n + 63) >> 6, i
    if yw.shape[0] < ((t - 1) >> 6) + wx + 1 or xw.shape[0] < wx:
        raise ValueError("packed operands too short")
    out = np.empty(t, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    with nogil:
        for i in range(t):
            o[i] = _row(xw, yw, wx, i)
    return out


def toeplitz_batch(const uint64_t[:, ::1] xs, const uint64_t[:, ::1] ys, Py_ssize_t n, Py_ssize_t t):
    cdef Py_ssize_t m = xs.shape[0], wx = (n + 63) >> 6, r, i
    if t > 64:
        raise ValueError("batch tags are limited to 64 bits")
    if ys.shape[0] != m or ys.shape[1] < ((t - 1) >> 6) + wx + 1 or xs.shape[1] < wx:
        raise ValueError("packed operands too short")
    out = np.empty(m, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef uint64_t tag
    with nogil:
        for r in range(m):
            tag = 0
            for i in range(t):
                tag |= (<uint64_t>_row(xs[r], ys[r], wx, i)) << i
            o[r] = tag
    return out


def erasure_counts(const int64_t[::1] outputs, int width, int g, int t):
    cdef Py_ssize_t i, size = outputs.shape[0]
    cdef int s, lz
    cdef int64_t v
    counts = np.zeros(t + 1, dtype=np.int64)
    cdef int64_t[::1] c = counts
    hist = np.zeros(width + 1, dtype=np.int64)
    cdef int64_t[::1] h = hist
    with nogil:
        for i in range(size):
            v = outputs[i]
            if v == 0:
                lz = width
            else:
                lz = width - (64 - __builtin_clzll(<unsigned long long>v))
            h[lz] += 1
        for s in range(t + 1):
            for lz in range(g + s, width + 1):
                c[s] += h[lz]
    return counts


def memory_oracle(int n, int g, const int64_t[::1] weights):
    """Best weighted score over all maps {0,1}^n -> {0,1}^g; returns (score, best_map)."""
    cdef int nx = 1 << n, nm = 1 << g, subsets = 1 << n
    cdef Py_ssize_t n_maps = (<Py_ssize_t>nm) ** nx
    cdef Py_ssize_t code, tmp, best_code = 0
    cdef int x, m, s, p, k, j
    cdef int64_t score, best = -1, mx
    mapping = np.zeros(nx, dtype=np.int64)
    cdef int64_t[::1] mp = mapping
    counts = np.zeros(nx, dtype=np.int64)
    cdef int64_t[::1] cnt = counts
    proj = np.zeros((subsets, nx), dtype=np.int64)
    cdef int64_t[:, ::1] pr = proj
    for s in range(subsets):
        for x in range(nx):
            p = 0
            for j in range(n):
                if (s >> j) & 1:
                    p = (p << 1) | ((x >> (n - 1 - j)) & 1)
            pr[s, x] = p
    with nogil:
        for code in range(n_maps):
            tmp = code
            for x in range(nx):
                mp[x] = tmp % nm
                tmp = tmp // nm
            score = 0
            for s in range(subsets):
                if weights[s] == 0:
                    continue
                for m in range(nm):
                    for k in range(nx):
                        cnt[k] = 0
                    mx = 0
                    for x in range(nx):
                        if mp[x] == m:
                            cnt[pr[s, x]] += 1
                            if cnt[pr[s, x]] > mx:
                                mx = cnt[pr[s, x]]
                    score += weights[s] * mx
            if score > best:
                best = score
                best_code = code
    tmp = best_code
    for x in range(nx):
        mapping[x] = tmp % nm
        tmp = tmp // nm
    return int(best), mapping
