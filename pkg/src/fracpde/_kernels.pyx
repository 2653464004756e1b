# cython: language_level=3
"""Compiled inner loops for the dense memory operators.

Every function here has a numpy twin in ``_kernels_py`` with the same
signature; ``fracpde.kernels`` picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, pow

cnp.import_array()


def l1_caputo(const double[::1] f, const double[::1] b, double scale):
    """out[i] = scale * sum_{k<i} b[k] * (f[i-k] - f[i-k-1]); out[0] = 0."""
    cdef Py_ssize_t n = f.shape[0], i, k
    cdef double acc
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(1, n):
        acc = 0.0
        for k in range(i):
            acc += b[k] * (f[i - k] - f[i - k - 1])
        o[i] = scale * acc
    return out


def product_convolution(const double[::1] f, const double[::1] c0, const double[::1] c1):
    """out[i] = sum_{m=1..i} c0[m] * f[i-m] + c1[m] * f[i-m+1]."""
    cdef Py_ssize_t n = f.shape[0], i, m
    cdef double acc
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(1, n):
        acc = 0.0
        for m in range(1, i + 1):
            acc += c0[m] * f[i - m] + c1[m] * f[i - m + 1]
        o[i] = acc
    return out


def flux_matrix(const double[::1] w, Py_ssize_t n):
    """Dense (n-1) x n matrix with F[i, k+1] += w[i-k], F[i, k] -= w[i-k] for k <= i."""
    out = np.zeros((n - 1, n), dtype=np.float64)
    cdef double[:, ::1] F = out
    cdef Py_ssize_t i, k
    cdef double c
    for i in range(n - 1):
        for k in range(i + 1):
            c = w[i - k]
            F[i, k + 1] += c
            F[i, k] -= c
    return out


def volterra_poly(const double[::1] p, double dx, int power):
    """Trapezoid rule for out[i] = int_0^{x_i} (x_i - y)^power p(y) dy on a uniform grid."""
    cdef Py_ssize_t n = p.shape[0], i, j
    cdef double acc, xi
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(1, n):
        xi = i * dx
        acc = 0.5 * pow(xi, power) * p[0]
        for j in range(1, i):
            acc += pow((i - j) * dx, power) * p[j]
        # the j = i endpoint carries the factor 0^power, which is 0 for power >= 1
        if power == 0:
            acc += 0.5 * p[i]
        o[i] = acc * dx
    return out


def green_sum(const double[::1] z, const double[::1] s, const double[::1] w,
              const double[::1] gre, const double[::1] gim):
    """Quadrature of e^{-i s z} (gre + i gim) against weights w, real and imaginary parts."""
    cdef Py_ssize_t nz = z.shape[0], ns = s.shape[0], j, k
    cdef double re, im, c, sn, zj, arg
    re_out = np.zeros(nz, dtype=np.float64)
    im_out = np.zeros(nz, dtype=np.float64)
    cdef double[::1] ro = re_out
    cdef double[::1] io = im_out
    for j in range(nz):
        zj = z[j]
        re = 0.0
        im = 0.0
        for k in range(ns):
            arg = s[k] * zj
            c = cos(arg)
            sn = sin(arg)
            re += w[k] * (c * gre[k] + sn * gim[k])
            im += w[k] * (c * gim[k] - sn * gre[k])
        ro[j] = re
        io[j] = im
    return re_out, im_out
