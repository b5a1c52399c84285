"""Numpy reference implementation of the stencil kernels.

The compiled twin in `_kernels_cy` exposes the same two functions; either
backend may be selected at import time through `slgflow.kernels`.
"""

import numpy as np


def stencil_apply(u_flat, idx, coef):
    """Apply padded index/coefficient table rows: out[k] = sum_j c[k,j] u[i[k,j]]."""
    return np.einsum("kj,kj->k", u_flat[idx], coef)


def hessian_eigs(u_flat, xx_i, xx_c, yy_i, yy_c, xy_i, xy_c):
    """Per-node Hessian entries and sorted eigenvalues of the 2x2 symmetric matrix."""
    hxx = stencil_apply(u_flat, xx_i, xx_c)
    hyy = stencil_apply(u_flat, yy_i, yy_c)
    hxy = stencil_apply(u_flat, xy_i, xy_c)
    mid = 0.5 * (hxx + hyy)
    rad = np.hypot(0.5 * (hxx - hyy), hxy)
    return hxx, hyy, hxy, mid - rad, mid + rad
