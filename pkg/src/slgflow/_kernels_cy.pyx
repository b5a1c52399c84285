# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil kernels: fused gather + 2x2 eigenvalue sweep."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def stencil_apply(double[::1] u_flat, long[:, ::1] idx, double[:, ::1] coef):
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t w = idx.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t k, j
    cdef double acc
    for k in range(n):
        acc = 0.0
        for j in range(w):
            acc += coef[k, j] * u_flat[idx[k, j]]
        o[k] = acc
    return out


def hessian_eigs(double[::1] u_flat,
                 long[:, ::1] xx_i, double[:, ::1] xx_c,
                 long[:, ::1] yy_i, double[:, ::1] yy_c,
                 long[:, ::1] xy_i, double[:, ::1] xy_c):
    cdef Py_ssize_t n = xx_i.shape[0]
    cdef Py_ssize_t wa = xx_i.shape[1]
    cdef Py_ssize_t wm = xy_i.shape[1]
    cdef cnp.ndarray[double, ndim=1] hxx = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] hyy = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] hxy = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] lo = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] hi = np.empty(n)
    cdef double[::1] vxx = hxx
    cdef double[::1] vyy = hyy
    cdef double[::1] vxy = hxy
    cdef double[::1] vlo = lo
    cdef double[::1] vhi = hi
    cdef Py_ssize_t k, j
    cdef double axx, ayy, axy, mid, rad
    for k in range(n):
        axx = 0.0
        ayy = 0.0
        axy = 0.0
        for j in range(wa):
            axx += xx_c[k, j] * u_flat[xx_i[k, j]]
            ayy += yy_c[k, j] * u_flat[yy_i[k, j]]
        for j in range(wm):
            axy += xy_c[k, j] * u_flat[xy_i[k, j]]
        mid = 0.5 * (axx + ayy)
        rad = sqrt(0.25 * (axx - ayy) * (axx - ayy) + axy * axy)
        vxx[k] = axx
        vyy[k] = ayy
        vxy[k] = axy
        vlo[k] = mid - rad
        vhi[k] = mid + rad
    return hxx, hyy, hxy, lo, hi
