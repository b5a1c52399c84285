"""Grid fields and batch derivative evaluation over classified grids.

Exterior lattice entries are NaN on purpose: any stencil that accidentally
reads one poisons its output and the bug surfaces immediately.  All valid
stencil rows only reference active nodes.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class GridField:
    """Discrete scalar field on the active nodes of a grid, with a time stamp."""

    grid: object
    values: np.ndarray  # (nx, ny); NaN outside the active set
    t: float = 0.0

    def copy(self):
        return GridField(grid=self.grid, values=self.values.copy(), t=self.t)

    def active_values(self):
        return self.values.ravel()[self.grid.active_flat]

    def set_active_values(self, vals):
        self.values.ravel()[self.grid.active_flat] = vals

    def check_finite(self):
        if not np.all(np.isfinite(self.active_values())):
            raise ValueError("field has non-finite values at active nodes")


def sample_field(grid, fn, t=0.0):
    """GridField from a callable fn(points (...,2)) -> values."""
    values = np.full((grid.nx, grid.ny), np.nan)
    values.ravel()[grid.active_flat] = fn(grid.coords)
    return GridField(grid=grid, values=values, t=t)


def hessians(field, pos=None):
    """Hessian entries and eigenvalues at active positions (default: all).

    Returns (hxx, hyy, hxy, lam_lo, lam_hi); stencils are quadratic-exact,
    centered at interior nodes and one-sided-biased at boundary nodes.
    """
    g = field.grid
    u = field.values.ravel()
    if pos is None:
        return kernels.hessian_eigs(u, g.xx_i, g.xx_c, g.yy_i, g.yy_c,
                                    g.xy_i, g.xy_c)
    return kernels.hessian_eigs(u, g.xx_i[pos], g.xx_c[pos],
                                g.yy_i[pos], g.yy_c[pos],
                                g.xy_i[pos], g.xy_c[pos])


def node_gradients(field, pos=None):
    """Gradient estimates at the node points (one-sided bias removed)."""
    g = field.grid
    u = field.values.ravel()
    if pos is None:
        gx = kernels.stencil_apply(u, g.gx_i, g.gx_c)
        gy = kernels.stencil_apply(u, g.gy_i, g.gy_c)
    else:
        gx = kernels.stencil_apply(u, g.gx_i[pos], g.gx_c[pos])
        gy = kernels.stencil_apply(u, g.gy_i[pos], g.gy_c[pos])
    return np.stack([gx, gy], axis=-1)


def raw_gradients(field, pos=None):
    """Plain centered/one-sided two-point gradients (no bias correction)."""
    g = field.grid
    u = field.values.ravel()
    if pos is None:
        gx = kernels.stencil_apply(u, g.rgx_i, g.rgx_c)
        gy = kernels.stencil_apply(u, g.rgy_i, g.rgy_c)
    else:
        gx = kernels.stencil_apply(u, g.rgx_i[pos], g.rgx_c[pos])
        gy = kernels.stencil_apply(u, g.rgy_i[pos], g.rgy_c[pos])
    return np.stack([gx, gy], axis=-1)


def hessian_at(field, node):
    """2x2 discrete Hessian at lattice node (i, j); node must be active."""
    g = field.grid
    k = g.active_pos_of(*node)
    if k < 0:
        from .geometry import StencilError
        raise StencilError(f"node {node} is not an active grid node")
    hxx, hyy, hxy, _, _ = hessians(field, pos=np.array([k]))
    return np.array([[hxx[0], hxy[0]], [hxy[0], hyy[0]]])


def min_hessian_eig(field):
    """Smallest discrete-Hessian eigenvalue over all active nodes."""
    _, _, _, lo, _ = hessians(field)
    return float(np.min(lo))
