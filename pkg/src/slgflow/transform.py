"""Discrete convex conjugation and duality checks between the two domains.

The conjugate is the exhaustive maximum of x.y - u(x) over primal nodes,
refined inside the winning cell with the local quadratic model built from
the node gradient and Hessian.  The refinement is what makes conjugates of
quadratic fields exact; the bare lattice maximum carries an O(1)-noise
second difference (its value error is an h-periodic sawtooth, and second
differences at lattice step resonate with it), which is useless for
Hessian-level duality checks.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import operators
from .fields import GridField, hessians, min_hessian_eig, node_gradients


class ConvexityError(ValueError):
    """Input field is not strictly convex on its grid."""


@dataclass
class LegendrePair:
    """Primal/dual fields with the gradient correspondence x -> Du(x).

    young_residual is the worst violation of u(x) + u*(Du x) = x . Du(x) at
    matched interior points (dual values bilinearly interpolated); coverage
    is the fraction of interior points whose image lands in an interpolable
    dual cell.
    """

    primal: GridField
    dual: GridField
    matched_points: np.ndarray
    matched_gradients: np.ndarray
    young_residual: float
    coverage: float


def _require_convex(field, label):
    eig = min_hessian_eig(field)
    if eig <= 0.0:
        raise ConvexityError(f"{label} field is not strictly convex "
                             f"(min Hessian eigenvalue {eig:g})")


def legendre(field, target_grid, refine=True):
    """Convex conjugate of a grid field, sampled on the target grid.

    Exhaustive O(N^2) maximization over primal nodes (adequate at this
    scale), plus an in-cell Newton refinement on the local quadratic model
    unless refine=False.
    """
    _require_convex(field, "primal")
    g = field.grid
    P = g.coords
    U = field.active_values()
    if refine:
        grads = node_gradients(field)
        hxx, hyy, hxy, lo, _ = hessians(field)
        det = hxx * hyy - hxy**2
        usable = (lo > 0.0) & (det > 1e-14)
    h = g.spacing

    out = np.full((target_grid.nx, target_grid.ny), np.nan)
    Y = target_grid.coords
    vals = np.empty(Y.shape[0])
    chunk = 512
    for a in range(0, Y.shape[0], chunk):
        yb = Y[a:a + chunk]
        scores = yb @ P.T - U[None, :]
        k = np.argmax(scores, axis=1)
        base = scores[np.arange(yb.shape[0]), k]
        if refine:
            d = yb - grads[k]
            ok = usable[k]
            dt = np.where(ok, det[k], 1.0)
            s1 = (hyy[k] * d[:, 0] - hxy[k] * d[:, 1]) / dt
            s2 = (hxx[k] * d[:, 1] - hxy[k] * d[:, 0]) / dt
            s1 = np.clip(s1, -h, h)
            s2 = np.clip(s2, -h, h)
            gain = (d[:, 0] * s1 + d[:, 1] * s2
                    - 0.5 * (hxx[k] * s1**2 + 2 * hxy[k] * s1 * s2
                             + hyy[k] * s2**2))
            base = base + np.where(ok, np.maximum(gain, 0.0), 0.0)
        vals[a:a + chunk] = base
    out.ravel()[target_grid.active_flat] = vals
    return GridField(grid=target_grid, values=out, t=field.t)


def _bilinear(grid, full_values, q):
    """Bilinear interpolation of a full-lattice array at points q.

    NaN wherever the enclosing cell touches a non-active node (exterior
    entries are NaN), which doubles as the coverage filter.
    """
    h = grid.spacing
    fx = (q[:, 0] - grid.xs[0]) / h
    fy = (q[:, 1] - grid.ys[0]) / h
    i = np.floor(fx).astype(int)
    j = np.floor(fy).astype(int)
    inside = (i >= 0) & (i < grid.nx - 1) & (j >= 0) & (j < grid.ny - 1)
    i = np.clip(i, 0, grid.nx - 2)
    j = np.clip(j, 0, grid.ny - 2)
    tx = fx - i
    ty = fy - j
    v00 = full_values[i, j]
    v10 = full_values[i + 1, j]
    v01 = full_values[i, j + 1]
    v11 = full_values[i + 1, j + 1]
    out = ((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
           + (1 - tx) * ty * v01 + tx * ty * v11)
    return np.where(inside, out, np.nan)


def _full(grid, active_values):
    full = np.full(grid.nx * grid.ny, np.nan)
    full[grid.active_flat] = active_values
    return full.reshape(grid.nx, grid.ny)


def make_pair(primal, dual):
    """LegendrePair with the Young-equality residual at matched points."""
    g = primal.grid
    ipos = g.interior_pos
    x = g.coords[ipos]
    du = node_gradients(primal, pos=ipos)
    ustar_interp = _bilinear(dual.grid, dual.values, du)
    young = (primal.active_values()[ipos] + ustar_interp
             - np.einsum("ij,ij->i", x, du))
    covered = np.isfinite(young)
    coverage = float(np.mean(covered))
    worst = float(np.max(np.abs(young[covered]))) if covered.any() else math.nan
    return LegendrePair(primal=primal, dual=dual, matched_points=x,
                        matched_gradients=du, young_residual=worst,
                        coverage=coverage)


def duality_residual(primal, dual):
    """Worst |D^2u*(Du x) . D^2u(x) - I| over matched interior points.

    Dual Hessians are interpolated bilinearly from the dual grid's second
    differences; points whose image cell is not fully resolved are skipped
    and reported through the coverage fraction.
    """
    _require_convex(primal, "primal")
    _require_convex(dual, "dual")
    g = primal.grid
    ipos = g.interior_pos
    du = node_gradients(primal, pos=ipos)
    hxx, hyy, hxy, _, _ = hessians(primal, pos=ipos)
    dxx, dyy, dxy, _, _ = hessians(dual)
    gxx = _bilinear(dual.grid, _full(dual.grid, dxx), du)
    gyy = _bilinear(dual.grid, _full(dual.grid, dyy), du)
    gxy = _bilinear(dual.grid, _full(dual.grid, dxy), du)
    # entries of D2u*(Du x) @ D2u(x) - I
    e11 = gxx * hxx + gxy * hxy - 1.0
    e12 = gxx * hxy + gxy * hyy
    e21 = gxy * hxx + gyy * hxy
    e22 = gxy * hxy + gyy * hyy - 1.0
    resid = np.max(np.abs(np.stack([e11, e12, e21, e22])), axis=0)
    covered = np.isfinite(resid)
    coverage = float(np.mean(covered))
    worst = float(np.max(resid[covered])) if covered.any() else math.nan
    return worst, coverage


def dual_identity_residual(field, profile):
    """Operator reciprocity |F*(A^{-1}) + F(A)| on discrete Hessians A.

    The inverse matrix is formed explicitly and its eigenvalues recomputed,
    so the check exercises eigenvalue reciprocity numerically rather than
    the algebraic definition of the dual profile.
    """
    _require_convex(field, "primal")
    g = field.grid
    ipos = g.interior_pos
    hxx, hyy, hxy, lo, hi = hessians(field, pos=ipos)
    det = hxx * hyy - hxy**2
    ixx, iyy, ixy = hyy / det, hxx / det, -hxy / det
    mid = 0.5 * (ixx + iyy)
    rad = np.hypot(0.5 * (ixx - iyy), ixy)
    dual_p = operators.dual_profile(profile)
    fstar = dual_p.f(mid - rad) + dual_p.f(mid + rad)
    fval = profile.f(lo) + profile.f(hi)
    return float(np.max(np.abs(fstar + fval)))


def dual_flow_residual(primal_pair, dual_pair, profile):
    """PDE residual of the conjugated flow plus the reciprocity cross-check.

    primal_pair and dual_pair are (earlier, later) fields at matching time
    stamps; returns (max |du*/dt - F*(D^2 u*)| over resolved dual interior
    nodes, reciprocity residual, coverage).
    """
    u0, u1 = primal_pair
    s0, s1 = dual_pair
    if abs(u0.t - s0.t) > 1e-12 or abs(u1.t - s1.t) > 1e-12:
        raise ValueError("primal and dual trajectories must share time stamps")
    dt = u1.t - u0.t
    if dt <= 0:
        raise ValueError("need strictly increasing time stamps")
    gd = s1.grid
    ipos = gd.interior_pos
    iflat = gd.active_flat[ipos]
    rate = (s1.values.ravel()[iflat] - s0.values.ravel()[iflat]) / dt
    _, _, _, lo, hi = hessians(s1, pos=ipos)
    usable = lo > 0.0
    dual_p = operators.dual_profile(profile)
    fstar = dual_p.f(lo[usable]) + dual_p.f(hi[usable])
    resid = float(np.max(np.abs(rate[usable] - fstar))) if usable.any() else math.nan
    coverage = float(np.mean(usable))
    ident = dual_identity_residual(u1, profile)
    return resid, ident, coverage
