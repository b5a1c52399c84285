"""Uniformly convex planar domains and Cartesian grid classification.

A domain is described by a strictly concave defining function: h > 0 inside,
h = 0 on the boundary, h < 0 outside.  The same type plays both the source
domain (where the flow lives) and the target domain (the prescribed image of
the gradient map).  The catalog is ellipses and positive blends of ellipse
defining functions, so h is always a diagonal quadratic polynomial; nothing
downstream relies on that beyond the closed-form boundary projection.

`classify_grid` splits a lattice into interior / boundary / exterior nodes
and precomputes, per active node, difference stencils (value -> gradient,
value -> Hessian entry) as padded index/coefficient tables.  Every stencil is
exact on quadratic fields; boundary nodes get one-sided variants.
"""

import math
from dataclasses import dataclass

import numpy as np

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2


class InvalidDomainError(ValueError):
    """Domain parameters do not describe a uniformly convex body."""


class DegenerateNormalError(ValueError):
    """Defining-function gradient vanishes where a normal was requested."""


class ConcavityViolationError(ValueError):
    """A sampled Hessian of the defining function fails strict concavity."""


class ResolutionError(ValueError):
    """Grid spacing too coarse to produce any interior node."""


class StencilError(ValueError):
    """No quadratic-exact difference stencil is available at a node."""


@dataclass(frozen=True)
class ConvexDomain:
    """Domain {h > 0} for h(p) = c0 - c1*p1^2 - c2*p2^2.

    theta is a certified lower bound on -(largest eigenvalue of D^2 h) over
    the closure; monitored constants depend on the chosen normalization of h
    (no |Dh| = 1 rescaling is applied).
    """

    kind: str
    c0: float
    c1: float
    c2: float
    theta: float
    semi_axes: tuple
    bbox: tuple  # (xlo, xhi, ylo, yhi)
    params: dict

    def h(self, p):
        p = np.asarray(p, dtype=float)
        return self.c0 - self.c1 * p[..., 0] ** 2 - self.c2 * p[..., 1] ** 2

    def grad_h(self, p):
        p = np.asarray(p, dtype=float)
        out = np.empty_like(p)
        out[..., 0] = -2.0 * self.c1 * p[..., 0]
        out[..., 1] = -2.0 * self.c2 * p[..., 1]
        return out

    def hess_h(self, p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = -2.0 * self.c1
        out[..., 1, 1] = -2.0 * self.c2
        return out

    def boundary_points(self, m):
        """m points on {h = 0}, parametrized by angle (deterministic order)."""
        ang = 2.0 * math.pi * np.arange(m) / m
        a, b = self.semi_axes
        return np.stack([a * np.cos(ang), b * np.sin(ang)], axis=-1)

    def project_to_boundary(self, p):
        """Nearest crossing of {h = 0} along the defining-function gradient line.

        For points inside, the gradient points inward, so the near crossing
        sits at a negative parameter; both roots of the quadratic section are
        formed and the one closer to p is returned.
        """
        p = np.asarray(p, dtype=float)
        g = self.grad_h(p)
        gn = np.sqrt(g[..., 0] ** 2 + g[..., 1] ** 2)
        if np.any(gn < 1e-14):
            raise DegenerateNormalError("defining-function gradient vanishes")
        d = g / gn[..., None]
        A = -(self.c1 * d[..., 0] ** 2 + self.c2 * d[..., 1] ** 2)
        B = -2.0 * (self.c1 * p[..., 0] * d[..., 0] + self.c2 * p[..., 1] * d[..., 1])
        C = self.h(p)
        disc = np.sqrt(B * B - 4.0 * A * C)
        s_a = (-B - disc) / (2.0 * A)
        s_b = (-B + disc) / (2.0 * A)
        s = np.where(np.abs(s_a) <= np.abs(s_b), s_a, s_b)
        q = p + s[..., None] * d
        if np.any(np.abs(self.h(q)) > 1e-10):
            raise InvalidDomainError("boundary projection failed to converge")
        return q


def _domain_from_coeffs(kind, c0, c1, c2, params):
    if c0 <= 0 or c1 <= 0 or c2 <= 0:
        raise InvalidDomainError(
            f"defining function {c0:g} - {c1:g} x^2 - {c2:g} y^2 is not "
            "strictly concave with a bounded positive set"
        )
    a = math.sqrt(c0 / c1)
    b = math.sqrt(c0 / c2)
    return ConvexDomain(
        kind=kind,
        c0=c0,
        c1=c1,
        c2=c2,
        theta=2.0 * min(c1, c2),
        semi_axes=(a, b),
        bbox=(-a, a, -b, b),
        params=params,
    )


def make_ellipse(semi_axes):
    """Ellipse with h(p) = 1 - (p1/a)^2 - (p2/b)^2."""
    a, b = semi_axes
    if a <= 0 or b <= 0:
        raise InvalidDomainError(f"semi-axes must be positive, got {semi_axes}")
    return _domain_from_coeffs("ellipse", 1.0, 1.0 / a**2, 1.0 / b**2,
                               {"semi_axes": [float(a), float(b)]})


def make_blend(semi_axes_list, weights):
    """Positive combination of ellipse defining functions.

    Strict concavity is preserved under positive weights; the positive set is
    again an ellipse but h carries a non-unit gradient scale on its boundary,
    which exercises normalization-independence of the monitored quantities.
    """
    if len(semi_axes_list) != len(weights) or not semi_axes_list:
        raise InvalidDomainError("blend needs one weight per component")
    if any(w <= 0 for w in weights):
        raise InvalidDomainError("blend weights must be positive")
    c0 = c1 = c2 = 0.0
    for (a, b), w in zip(semi_axes_list, weights):
        if a <= 0 or b <= 0:
            raise InvalidDomainError(f"semi-axes must be positive, got {(a, b)}")
        c0 += w
        c1 += w / a**2
        c2 += w / b**2
    return _domain_from_coeffs(
        "blend", c0, c1, c2,
        {"semi_axes": [[float(a), float(b)] for a, b in semi_axes_list],
         "weights": [float(w) for w in weights]})


def inner_normal(domain, p, tol=1e-8):
    """Unit vector at a boundary point p pointing into {h > 0}."""
    p = np.asarray(p, dtype=float)
    scale = max(1.0, max(abs(v) for v in domain.bbox))
    if abs(float(domain.h(p))) > tol * scale:
        raise ValueError(f"point {p} is not on the boundary (h = {domain.h(p):g})")
    g = domain.grad_h(p)
    gn = float(np.hypot(g[0], g[1]))
    if gn < 1e-12:
        raise DegenerateNormalError(f"|Dh| = {gn:g} at {p}")
    return g / gn


def _halton(n, base):
    out = np.zeros(n)
    for i in range(n):
        f, r, x = 1.0, 0.0, i + 1
        while x > 0:
            f /= base
            r += f * (x % base)
            x //= base
        out[i] = r
    return out


def concavity_modulus(domain, sample_count=10_000):
    """Certified minimum of -(largest eigenvalue of D^2 h) over the closure.

    Samples a Halton sequence over the bounding box filtered to {h >= 0}, so
    larger sample counts extend (never replace) smaller ones and the returned
    modulus is monotone non-increasing in sample_count.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    xlo, xhi, ylo, yhi = domain.bbox
    kept = 0
    worst = math.inf
    block = max(64, 2 * sample_count)
    start = 0
    while kept < sample_count:
        u = _halton(start + block, 2)[start:]
        v = _halton(start + block, 3)[start:]
        pts = np.stack([xlo + (xhi - xlo) * u, ylo + (yhi - ylo) * v], axis=-1)
        hv = domain.h(pts)
        pts = pts[hv >= 0.0]
        if pts.shape[0]:
            take = pts[: sample_count - kept]
            H = domain.hess_h(take)
            mid = 0.5 * (H[..., 0, 0] + H[..., 1, 1])
            rad = np.hypot(0.5 * (H[..., 0, 0] - H[..., 1, 1]), H[..., 0, 1])
            lam_max = mid + rad
            if np.any(lam_max >= 0.0):
                raise ConcavityViolationError(
                    "defining-function Hessian has a non-negative eigenvalue "
                    f"({lam_max.max():g}) at a sampled point")
            worst = min(worst, float(np.min(-lam_max)))
            kept += take.shape[0]
        start += block
        if start > 10_000 * sample_count:
            raise InvalidDomainError("could not collect samples inside the domain")
    return worst


# stencil table widths (index/coefficient pairs, zero-padded)
_WXX = 3
_WXY = 9
_WG = 6


def _merge(entries, width, pad_idx):
    """Combine (flat index, coefficient) pairs into padded table rows."""
    acc = {}
    for idx, c in entries:
        acc[idx] = acc.get(idx, 0.0) + c
    items = sorted(acc.items())
    if len(items) > width:
        raise StencilError(f"stencil width {len(items)} exceeds table width {width}")
    idxs = [k for k, _ in items] + [pad_idx] * (width - len(items))
    cs = [v for _, v in items] + [0.0] * (width - len(items))
    return idxs, cs


@dataclass
class GridDiscretization:
    """Classified lattice over a domain bounding box plus stencil tables.

    Active nodes (interior and boundary) are stored in row-major order.
    Every table row maps flat lattice indices to coefficients; applying a row
    to a value array yields one derivative at one node.
    """

    domain: ConvexDomain
    spacing: float
    i_range: tuple
    j_range: tuple
    nx: int
    ny: int
    xs: np.ndarray
    ys: np.ndarray
    cls: np.ndarray            # (nx, ny) int8
    active_flat: np.ndarray    # (N,)
    coords: np.ndarray         # (N, 2)
    interior_mask: np.ndarray  # (N,)
    # Hessian tables, one row per active node
    xx_i: np.ndarray
    xx_c: np.ndarray
    yy_i: np.ndarray
    yy_c: np.ndarray
    xy_i: np.ndarray
    xy_c: np.ndarray
    hess_borrowed: np.ndarray
    # node-point gradient tables (one-sided bias removed via the Hessian)
    gx_i: np.ndarray
    gx_c: np.ndarray
    gy_i: np.ndarray
    gy_c: np.ndarray
    # raw one-sided gradient tables and their midpoint offsets
    rgx_i: np.ndarray
    rgx_c: np.ndarray
    rgy_i: np.ndarray
    rgy_c: np.ndarray
    grad_offset: np.ndarray    # (N, 2) evaluation-point offset of raw gradients
    # boundary extras (rows follow boundary order within the active list)
    b_pos: np.ndarray          # positions of boundary nodes in the active list
    b_pdel: np.ndarray         # nearest-boundary point minus node coordinate
    b_dgx: np.ndarray          # d(node gradient)/d(own value)
    b_dgy: np.ndarray
    b_dhxx: np.ndarray         # d(Hessian entry)/d(own value)
    b_dhxy: np.ndarray
    b_dhyy: np.ndarray
    # boundary-boundary coupling of the gradient estimates: row r lists the
    # boundary rows its estimate depends on, with d(G_r)/d(value) weights
    bb_idx: np.ndarray         # (Nb, K) boundary-row indices, self-padded
    bb_dgx: np.ndarray         # (Nb, K) collocated-gradient sensitivities
    bb_dgy: np.ndarray
    bb_raw_idx: np.ndarray     # same for the raw one-sided gradients
    bb_raw_dgx: np.ndarray
    bb_raw_dgy: np.ndarray
    counts: dict

    @property
    def n_active(self):
        return self.active_flat.shape[0]

    @property
    def interior_pos(self):
        return np.nonzero(self.interior_mask)[0]

    @property
    def boundary_pos(self):
        return self.b_pos

    def flat_of(self, i, j):
        return i * self.ny + j

    def active_pos_of(self, i, j):
        """Position of lattice node (i, j) in the active list, or -1."""
        hits = np.nonzero(self.active_flat == self.flat_of(i, j))[0]
        return int(hits[0]) if hits.size else -1

    def node_coord(self, i, j):
        return np.array([self.xs[i], self.ys[j]])


def classify_grid(domain, spacing, boundary_gradient_order=1):
    """Classify the lattice of integer multiples of `spacing` over the box.

    Raises ResolutionError when no interior node survives; demotes nodes
    whose quadratic-exact stencils cannot be completed (staircase slivers).
    boundary_gradient_order=2 switches one-sided gradients to three-point
    stencils where the extra inward neighbor exists.
    """
    h = float(spacing)
    if h <= 0:
        raise ValueError("spacing must be positive")
    xlo, xhi, ylo, yhi = domain.bbox
    i0, i1 = math.ceil(xlo / h) - 1, math.floor(xhi / h) + 1
    j0, j1 = math.ceil(ylo / h) - 1, math.floor(yhi / h) + 1
    xs = np.arange(i0, i1 + 1) * h
    ys = np.arange(j0, j1 + 1) * h
    nx, ny = xs.size, ys.size
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    hval = domain.h(np.stack([X, Y], axis=-1))
    active = hval > 0.0

    def shifted(mask, di, dj):
        out = np.zeros_like(mask)
        src = mask[max(0, -di): nx - max(0, di), max(0, -dj): ny - max(0, dj)]
        out[max(0, di): nx - max(0, -di), max(0, dj): ny - max(0, -dj)] = src
        return out

    while True:
        # every active node must keep, per axis, at least one active neighbor
        while True:
            ok_x = shifted(active, 1, 0) | shifted(active, -1, 0)
            ok_y = shifted(active, 0, 1) | shifted(active, 0, -1)
            keep = active & ok_x & ok_y
            if keep.sum() == active.sum():
                break
            active = keep
        if not active.any():
            raise ResolutionError(
                f"spacing {h:g} leaves no usable node inside the domain")
        e, w = shifted(active, 1, 0), shifted(active, -1, 0)
        n, s = shifted(active, 0, 1), shifted(active, 0, -1)
        ne, nw = shifted(active, 1, 1), shifted(active, -1, 1)
        se, sw = shifted(active, 1, -1), shifted(active, -1, -1)
        axis4 = active & e & w & n & s
        corner = (ne & e & n) | (nw & w & n) | (se & e & s) | (sw & w & s)
        degenerate = axis4 & ~corner  # no mixed-derivative stencil; drop
        if not degenerate.any():
            break
        active &= ~degenerate
    interior = axis4 & corner
    boundary = active & ~interior
    if not interior.any():
        raise ResolutionError(
            f"spacing {h:g} leaves no interior node inside the domain")

    cls = np.zeros((nx, ny), dtype=np.int8)
    cls[boundary] = BOUNDARY
    cls[interior] = INTERIOR

    act_idx = np.argwhere(active)
    active_flat = act_idx[:, 0] * ny + act_idx[:, 1]
    pos_of_flat = {int(f): k for k, f in enumerate(active_flat)}
    coords = np.stack([xs[act_idx[:, 0]], ys[act_idx[:, 1]]], axis=-1)
    interior_mask = interior[act_idx[:, 0], act_idx[:, 1]]

    inv_h2 = 1.0 / (h * h)

    def is_act(i, j):
        return 0 <= i < nx and 0 <= j < ny and active[i, j]

    def fl(i, j):
        return i * ny + j

    def axis_second(i, j, ax):
        """Quadratic-exact second difference along one axis, or None."""
        di, dj = (1, 0) if ax == 0 else (0, 1)
        if is_act(i - di, j - dj) and is_act(i + di, j + dj):
            return [(fl(i - di, j - dj), inv_h2), (fl(i, j), -2.0 * inv_h2),
                    (fl(i + di, j + dj), inv_h2)]
        for sgn in (1, -1):
            if is_act(i + sgn * di, j + sgn * dj) and is_act(i + 2 * sgn * di, j + 2 * sgn * dj):
                return [(fl(i, j), inv_h2),
                        (fl(i + sgn * di, j + sgn * dj), -2.0 * inv_h2),
                        (fl(i + 2 * sgn * di, j + 2 * sgn * dj), inv_h2)]
        return None

    def mixed_second(i, j):
        """Average of the available corner estimates of the cross derivative."""
        forms = []
        if is_act(i + 1, j + 1) and is_act(i + 1, j) and is_act(i, j + 1):
            forms.append([(fl(i + 1, j + 1), 1.0), (fl(i, j), 1.0),
                          (fl(i + 1, j), -1.0), (fl(i, j + 1), -1.0)])
        if is_act(i - 1, j - 1) and is_act(i - 1, j) and is_act(i, j - 1):
            forms.append([(fl(i - 1, j - 1), 1.0), (fl(i, j), 1.0),
                          (fl(i - 1, j), -1.0), (fl(i, j - 1), -1.0)])
        if is_act(i - 1, j + 1) and is_act(i - 1, j) and is_act(i, j + 1):
            forms.append([(fl(i - 1, j + 1), -1.0), (fl(i, j), -1.0),
                          (fl(i - 1, j), 1.0), (fl(i, j + 1), 1.0)])
        if is_act(i + 1, j - 1) and is_act(i + 1, j) and is_act(i, j - 1):
            forms.append([(fl(i + 1, j - 1), -1.0), (fl(i, j), -1.0),
                          (fl(i + 1, j), 1.0), (fl(i, j - 1), 1.0)])
        if not forms:
            return None
        scale = inv_h2 / len(forms)
        return [(idx, c * scale) for form in forms for idx, c in form]

    def axis_first(i, j, ax):
        """One-sided/centered first difference and its midpoint offset."""
        di, dj = (1, 0) if ax == 0 else (0, 1)
        fwd, bwd = is_act(i + di, j + dj), is_act(i - di, j - dj)
        if fwd and bwd:
            return [(fl(i + di, j + dj), 0.5 / h), (fl(i - di, j - dj), -0.5 / h)], 0.0
        if bwd:
            if boundary_gradient_order == 2 and is_act(i - 2 * di, j - 2 * dj):
                return [(fl(i, j), 1.5 / h), (fl(i - di, j - dj), -2.0 / h),
                        (fl(i - 2 * di, j - 2 * dj), 0.5 / h)], 0.0
            return [(fl(i, j), 1.0 / h), (fl(i - di, j - dj), -1.0 / h)], -0.5 * h
        if fwd:
            if boundary_gradient_order == 2 and is_act(i + 2 * di, j + 2 * dj):
                return [(fl(i, j), -1.5 / h), (fl(i + di, j + dj), 2.0 / h),
                        (fl(i + 2 * di, j + 2 * dj), -0.5 / h)], 0.0
            return [(fl(i + di, j + dj), 1.0 / h), (fl(i, j), -1.0 / h)], 0.5 * h
        return None, None

    n_act = active_flat.shape[0]
    own_xx = [None] * n_act
    own_yy = [None] * n_act
    own_xy = [None] * n_act
    for k in range(n_act):
        i, j = act_idx[k]
        own_xx[k] = axis_second(i, j, 0)
        own_yy[k] = axis_second(i, j, 1)
        own_xy[k] = mixed_second(i, j)

    neighbor_order = [(-1, 0), (1, 0), (0, -1), (0, 1),
                      (-1, -1), (-1, 1), (1, -1), (1, 1)]

    def resolve(own, k):
        """Own stencil, else the deepest complete neighbor's (staircase caves)."""
        if own[k] is not None:
            return own[k], False
        i, j = act_idx[k]
        best, best_h = None, -math.inf
        for di, dj in neighbor_order:
            if is_act(i + di, j + dj):
                kk = pos_of_flat[fl(i + di, j + dj)]
                if own[kk] is not None:
                    hn = hval[i + di, j + dj]
                    if hn > best_h:
                        best, best_h = own[kk], hn
        if best is None:
            raise StencilError(
                f"no second-difference stencil reachable at node {(int(i), int(j))}")
        return best, True

    xx_i = np.zeros((n_act, _WXX), dtype=np.int64)
    xx_c = np.zeros((n_act, _WXX))
    yy_i = np.zeros((n_act, _WXX), dtype=np.int64)
    yy_c = np.zeros((n_act, _WXX))
    xy_i = np.zeros((n_act, _WXY), dtype=np.int64)
    xy_c = np.zeros((n_act, _WXY))
    gx_i = np.zeros((n_act, _WG), dtype=np.int64)
    gx_c = np.zeros((n_act, _WG))
    gy_i = np.zeros((n_act, _WG), dtype=np.int64)
    gy_c = np.zeros((n_act, _WG))
    rgx_i = np.zeros((n_act, _WXX), dtype=np.int64)
    rgx_c = np.zeros((n_act, _WXX))
    rgy_i = np.zeros((n_act, _WXX), dtype=np.int64)
    rgy_c = np.zeros((n_act, _WXX))
    grad_offset = np.zeros((n_act, 2))
    hess_borrowed = np.zeros(n_act, dtype=bool)

    stencils = {}
    for k in range(n_act):
        i, j = act_idx[k]
        own = fl(i, j)
        sxx, bxx = resolve(own_xx, k)
        syy, byy = resolve(own_yy, k)
        sxy, bxy = resolve(own_xy, k)
        hess_borrowed[k] = bxx or byy or bxy
        xx_i[k], xx_c[k] = _merge(sxx, _WXX, own)
        yy_i[k], yy_c[k] = _merge(syy, _WXX, own)
        xy_i[k], xy_c[k] = _merge(sxy, _WXY, own)
        sx, offx = axis_first(i, j, 0)
        sy, offy = axis_first(i, j, 1)
        rgx_i[k], rgx_c[k] = _merge(sx, _WXX, own)
        rgy_i[k], rgy_c[k] = _merge(sy, _WXX, own)
        grad_offset[k] = (offx, offy)
        # node-point gradient: cancel the midpoint bias with the Hessian row
        gx = sx + [(idx, -offx * c) for idx, c in sxx] if offx else sx
        gy = sy + [(idx, -offy * c) for idx, c in syy] if offy else sy
        gx_i[k], gx_c[k] = _merge(gx, _WG, own)
        gy_i[k], gy_c[k] = _merge(gy, _WG, own)
        stencils[k] = (sxx, syy, sxy)

    b_pos = np.nonzero(~interior_mask)[0]
    nb = b_pos.shape[0]
    b_pdel = np.zeros((nb, 2))
    b_dgx = np.zeros(nb)
    b_dgy = np.zeros(nb)
    b_dhxx = np.zeros(nb)
    b_dhxy = np.zeros(nb)
    b_dhyy = np.zeros(nb)
    coupling = []
    coupling_raw = []
    b_row_of_flat = {int(active_flat[k]): r for r, k in enumerate(b_pos)}
    if nb:
        b_pts = coords[b_pos]
        b_pdel = domain.project_to_boundary(b_pts) - b_pts
        for r, k in enumerate(b_pos):
            own = int(active_flat[k])
            sxx, syy, sxy = stencils[k]
            b_dgx[r] = sum(c for idx, c in zip(gx_i[k], gx_c[k]) if idx == own)
            b_dgy[r] = sum(c for idx, c in zip(gy_i[k], gy_c[k]) if idx == own)
            b_dhxx[r] = sum(c for idx, c in sxx if idx == own)
            b_dhyy[r] = sum(c for idx, c in syy if idx == own)
            b_dhxy[r] = sum(c for idx, c in sxy if idx == own)
            px, py = b_pdel[r]
            acc = {}

            def add(entries, wx, wy, acc=acc):
                for idx, c in entries:
                    q = int(idx)
                    dx, dy = acc.get(q, (0.0, 0.0))
                    acc[q] = (dx + wx * c, dy + wy * c)

            add(zip(gx_i[k], gx_c[k]), 1.0, 0.0)
            add(zip(gy_i[k], gy_c[k]), 0.0, 1.0)
            add(sxx, px, 0.0)
            add(syy, 0.0, py)
            add(sxy, py, px)
            coupling.append(sorted(
                (b_row_of_flat[q], dx, dy) for q, (dx, dy) in acc.items()
                if q in b_row_of_flat))
            acc_raw = {}

            def add_raw(entries, wx, wy, acc=acc_raw):
                for idx, c in entries:
                    q = int(idx)
                    dx, dy = acc.get(q, (0.0, 0.0))
                    acc[q] = (dx + wx * c, dy + wy * c)

            add_raw(zip(rgx_i[k], rgx_c[k]), 1.0, 0.0)
            add_raw(zip(rgy_i[k], rgy_c[k]), 0.0, 1.0)
            coupling_raw.append(sorted(
                (b_row_of_flat[q], dx, dy) for q, (dx, dy) in acc_raw.items()
                if q in b_row_of_flat))

    def pack(rows):
        width = max((len(c) for c in rows), default=1)
        idx = np.zeros((nb, width), dtype=np.int64)
        dgx = np.zeros((nb, width))
        dgy = np.zeros((nb, width))
        for r, row in enumerate(rows):
            idx[r, :] = r  # self-padding keeps scatter targets valid (weight 0)
            for col, (rr, dx, dy) in enumerate(row):
                idx[r, col] = rr
                dgx[r, col] = dx
                dgy[r, col] = dy
        return idx, dgx, dgy

    bb_idx, bb_dgx, bb_dgy = pack(coupling)
    bb_raw_idx, bb_raw_dgx, bb_raw_dgy = pack(coupling_raw)

    counts = {
        "interior": int(interior.sum()),
        "boundary": int(boundary.sum()),
        "exterior": int(nx * ny - active.sum()),
        "borrowed_stencils": int(hess_borrowed.sum()),
    }

    return GridDiscretization(
        domain=domain, spacing=h, i_range=(i0, i1), j_range=(j0, j1),
        nx=nx, ny=ny, xs=xs, ys=ys, cls=cls,
        active_flat=active_flat, coords=coords, interior_mask=interior_mask,
        xx_i=xx_i, xx_c=xx_c, yy_i=yy_i, yy_c=yy_c, xy_i=xy_i, xy_c=xy_c,
        hess_borrowed=hess_borrowed,
        gx_i=gx_i, gx_c=gx_c, gy_i=gy_i, gy_c=gy_c,
        rgx_i=rgx_i, rgx_c=rgx_c, rgy_i=rgy_i, rgy_c=rgy_c,
        grad_offset=grad_offset,
        b_pos=b_pos, b_pdel=b_pdel, b_dgx=b_dgx, b_dgy=b_dgy,
        b_dhxx=b_dhxx, b_dhxy=b_dhxy, b_dhyy=b_dhyy,
        bb_idx=bb_idx, bb_dgx=bb_dgx, bb_dgy=bb_dgy,
        bb_raw_idx=bb_raw_idx, bb_raw_dgx=bb_raw_dgx, bb_raw_dgy=bb_raw_dgy,
        counts=counts,
    )
