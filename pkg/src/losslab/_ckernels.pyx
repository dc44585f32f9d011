# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte-Carlo kernels.

Same random recipe and accumulation order as ``losslab._pykernels``; see
``losslab.rng`` for the stream definition.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, exp, tanh, pow
from libc.stdint cimport uint64_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t fmix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t seed, uint64_t k) noexcept nogil:
    return <double>(fmix64(seed + (k + 1) * GOLDEN) >> 11) * INV53


cdef inline double normal(uint64_t seed, uint64_t j) noexcept nogil:
    cdef double u1 = 1.0 - uniform(seed, 2 * j)
    cdef double u2 = uniform(seed, 2 * j + 1)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


def mc_losses(
    cnp.uint64_t[::1] seeds,
    cnp.int64_t[::1] dims,
    double[::1] layer_scale,
    bint uniform_init,
    bint relu,
    double[:, ::1] X,
    double[::1] y,
    double eps,
):
    cdef Py_ssize_t T = seeds.shape[0]
    cdef Py_ssize_t S = X.shape[0]
    cdef Py_ssize_t n_layers = dims.shape[0] - 1
    cdef Py_ssize_t n_w = 0, max_w = 0
    cdef Py_ssize_t t, s, layer, i, k, off, fi, fo
    cdef double acc, z, p, total, yv
    cdef uint64_t sd
    for layer in range(n_layers):
        n_w += dims[layer] * dims[layer + 1]
    for layer in range(n_layers + 1):
        if dims[layer] > max_w:
            max_w = dims[layer]
    out = np.empty(T, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double *W = <double *> malloc(n_w * sizeof(double))
    cdef double *h = <double *> malloc(max_w * sizeof(double))
    cdef double *g = <double *> malloc(max_w * sizeof(double))
    if W == NULL or h == NULL or g == NULL:
        free(W); free(h); free(g)
        raise MemoryError()
    try:
        with nogil:
            for t in range(T):
                sd = seeds[t]
                off = 0
                for layer in range(n_layers):
                    fi = dims[layer]
                    fo = dims[layer + 1]
                    for i in range(fi * fo):
                        if uniform_init:
                            W[off + i] = (2.0 * uniform(sd, off + i) - 1.0) * layer_scale[layer]
                        else:
                            W[off + i] = normal(sd, off + i) * layer_scale[layer]
                    off += fi * fo
                total = 0.0
                for s in range(S):
                    for k in range(dims[0]):
                        h[k] = X[s, k]
                    off = 0
                    for layer in range(n_layers):
                        fi = dims[layer]
                        fo = dims[layer + 1]
                        for i in range(fo):
                            acc = 0.0
                            for k in range(fi):
                                acc = acc + W[off + i * fi + k] * h[k]
                            if layer < n_layers - 1:
                                if relu:
                                    g[i] = acc if acc > 0.0 else 0.0
                                else:
                                    g[i] = tanh(acc)
                            else:
                                g[i] = acc
                        off += fi * fo
                        for i in range(fo):
                            h[i] = g[i]
                    z = h[0]
                    p = 1.0 / (1.0 + exp(-z))
                    if p < eps:
                        p = eps
                    if p > 1.0 - eps:
                        p = 1.0 - eps
                    yv = y[s]
                    total = total + -(yv * log(p) + (1.0 - yv) * log(1.0 - p))
                out_v[t] = total / S
    finally:
        free(W); free(h); free(g)
    return out


cdef inline double ball_norm_scale(uint64_t sd, Py_ssize_t n, double r,
                                   Py_ssize_t normal_start, Py_ssize_t radius_draw,
                                   double *buf) noexcept nogil:
    cdef Py_ssize_t j
    cdef double ss = 0.0
    for j in range(n):
        buf[j] = normal(sd, normal_start + j)
        ss = ss + buf[j] * buf[j]
    return r * pow(uniform(sd, radius_draw), 1.0 / n) / sqrt(ss)


def pair_distances(cnp.uint64_t[::1] seeds, Py_ssize_t n, double r):
    cdef Py_ssize_t T = seeds.shape[0]
    cdef Py_ssize_t t, j
    cdef double sa, sb, d, ss
    cdef uint64_t sd
    out = np.empty(T, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double *a = <double *> malloc(n * sizeof(double))
    cdef double *b = <double *> malloc(n * sizeof(double))
    if a == NULL or b == NULL:
        free(a); free(b)
        raise MemoryError()
    try:
        with nogil:
            for t in range(T):
                sd = seeds[t]
                sa = ball_norm_scale(sd, n, r, 0, 2 * n, a)
                sb = ball_norm_scale(sd, n, r, n + 1, 4 * n + 2, b)
                ss = 0.0
                for j in range(n):
                    d = a[j] * sa - b[j] * sb
                    ss = ss + d * d
                out_v[t] = sqrt(ss)
    finally:
        free(a); free(b)
    return out
