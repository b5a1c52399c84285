"""Explicit time stepping for u_t = F(D^2 u) with the gradient-image constraint.

Interior nodes advance by forward Euler under a parabolic stability cap.
Boundary nodes are projected onto the constraint manifold every step by a
coupled Newton solve on the target defining function evaluated at the
boundary gradient estimates.  By default the estimate is collocated: the
one-sided node gradient is transported to the nearest true boundary point
through the discrete Hessian, which is exact on quadratics and keeps the
enforced constraint second-order consistent; the transport term is frozen
during each projection and relaxed between steps (the instantaneous
coupling is weakly unstable).  Enforcing the raw staircase-node gradient
instead biases the translating drift by O(spacing); that variant stays
available through boundary_collocation=false.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import diagnostics, operators
from .config import build_domain
from .fields import GridField, hessians, raw_gradients, sample_field
from .geometry import classify_grid


class ConvexityLossError(RuntimeError):
    """Discrete Hessian lost positive definiteness at some node."""

    def __init__(self, node, eig):
        self.node = node
        self.eig = eig
        super().__init__(f"convexity lost at node {node}: eigenvalue {eig:g}")


class BoundaryProjectionError(RuntimeError):
    """Newton and bisection both failed to restore boundary feasibility."""


class InsufficientDataError(ValueError):
    """Too few trajectory records for the requested estimate."""


@dataclass
class StepReport:
    dt: float
    max_interior_update: float
    boundary_newton_iters: int
    boundary_residual: float


@dataclass
class FlowSummary:
    c_infty: float
    c_infty_crosscheck: float
    stat_residual: float
    hausdorff: float
    steps: int
    termination: str  # converged | max-time | invariant-violation
    t_final: float
    theta0: float
    theta1: float
    mu1: float
    mu2: float
    violation: str = ""


def discrete_hessian(field, node):
    """2x2 second-difference Hessian at lattice node (i, j)."""
    from .fields import hessian_at
    return hessian_at(field, node)


def interior_step(field, profile, dt):
    """Forward Euler update of interior nodes; boundary values untouched."""
    _, _, _, lo, hi = hessians(field)
    if float(lo.min()) <= 0.0:
        k = int(np.argmin(lo))
        raise ConvexityLossError(tuple(field.grid.coords[k]), float(lo.min()))
    F = profile.f(lo) + profile.f(hi)
    out = field.copy()
    g = field.grid
    ipos = g.interior_pos
    out.values.ravel()[g.active_flat[ipos]] += dt * F[ipos]
    out.t = field.t + dt
    return out


def stable_dt(field, profile, sigma=0.4):
    """Parabolic step cap sigma * spacing^2 / (2 * max trace F^{ij})."""
    _, _, _, lo, hi = hessians(field)
    trace = profile.fp(lo) + profile.fp(hi)
    return sigma * field.grid.spacing**2 / (2.0 * float(trace.max()))


def collocation_correction(field):
    """Additive gradient correction transporting the raw one-sided gradient
    at each boundary node to the nearest true boundary point.

    Combines the midpoint-bias removal of the one-sided differences with the
    Hessian transport along p_boundary - node; exact on quadratic fields.
    """
    g = field.grid
    bpos = g.b_pos
    hxx, hyy, hxy, _, _ = hessians(field, pos=bpos)
    px, py = g.b_pdel[:, 0], g.b_pdel[:, 1]
    dx, dy = g.grad_offset[bpos, 0], g.grad_offset[bpos, 1]
    K = np.empty((bpos.size, 2))
    K[:, 0] = hxx * (px - dx) + hxy * py
    K[:, 1] = hxy * px + hyy * (py - dy)
    return K


def _boundary_state(field, target, collocated, correction=None):
    """Constraint residual h(G) and gradient estimates G at boundary nodes.

    correction=None with collocated=True rebuilds the collocation term from
    the current field (instantaneous); passing a frozen correction keeps the
    residual local in the boundary values, which is what the time stepper
    uses (the correction then relaxes between steps).
    """
    g = field.grid
    gr = raw_gradients(field, pos=g.b_pos)
    if collocated:
        if correction is None:
            correction = collocation_correction(field)
        G = gr + correction
    else:
        G = gr
    res = target.h(G)
    return res, G


def _bisect_node(field, target, r, collocated, correction, tol, max_iter=80):
    """Scalar bisection fallback on one boundary node's value."""
    g = field.grid
    flat = g.active_flat[g.b_pos[r]]
    u = field.values.ravel()
    v0 = u[flat]

    def res_at(v):
        u[flat] = v
        res, _ = _boundary_state(field, target, collocated, correction)
        return float(res[r])

    span = g.spacing
    lo_v, hi_v = v0, v0
    f_lo = f_hi = res_at(v0)
    for _ in range(40):
        lo_v, hi_v = v0 - span, v0 + span
        f_lo, f_hi = res_at(lo_v), res_at(hi_v)
        if f_lo * f_hi <= 0.0:
            break
        span *= 2.0
    else:
        u[flat] = v0
        raise BoundaryProjectionError(
            f"no sign change bracketing boundary node at {g.coords[g.b_pos[r]]}")
    for _ in range(max_iter):
        mid = 0.5 * (lo_v + hi_v)
        fm = res_at(mid)
        if abs(fm) <= tol:
            return
        if f_lo * fm <= 0.0:
            hi_v, f_hi = mid, fm
        else:
            lo_v, f_lo = mid, fm
    raise BoundaryProjectionError("bisection failed to reach tolerance")


def enforce_boundary(field, source, target, tol=1e-10, max_iters=40,
                     collocated=True, correction=None, warm_rates=None, dt=0.0):
    """Project boundary node values onto {h(Du) = 0}, in place.

    The per-node constraints couple through shared stencils, so the update
    solves the coupled Newton system: the gradient estimates are linear in
    the boundary values (precomputed sparse sensitivities), which makes each
    residual an exactly quadratic function of them and Newton effectively
    globally convergent here.  A backtracking line search guards the
    remaining nonlinearity; a per-node bisection pass is the last resort
    when a step cannot reduce the residual.  `warm_rates` optionally
    advances boundary values by dt*rate before the solve, which makes exact
    translating solutions fixed points of the combined step (their residual
    stays at rounding level and the solve is skipped).
    """
    g = field.grid
    bpos = g.b_pos
    nb = bpos.size
    if nb == 0:
        return StepReport(dt=dt, max_interior_update=0.0,
                          boundary_newton_iters=0, boundary_residual=0.0)
    u = field.values.ravel()
    bflat = g.active_flat[bpos]
    if warm_rates is not None and dt:
        u[bflat] += dt * warm_rates
    if collocated and correction is None:
        nbr_idx, nbr_dgx, nbr_dgy = g.bb_idx, g.bb_dgx, g.bb_dgy
    else:
        nbr_idx, nbr_dgx, nbr_dgy = g.bb_raw_idx, g.bb_raw_dgx, g.bb_raw_dgy
    rows = np.repeat(np.arange(nb), nbr_idx.shape[1]).reshape(nbr_idx.shape)

    res, G = _boundary_state(field, target, collocated, correction)
    worst = float(np.max(np.abs(res)))
    iters = 0
    while worst > tol and iters < max_iters:
        dh = target.grad_h(G)
        J = np.zeros((nb, nb))
        np.add.at(J, (rows, nbr_idx),
                  dh[:, 0][:, None] * nbr_dgx + dh[:, 1][:, None] * nbr_dgy)
        try:
            dv = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            dv = np.linalg.lstsq(J, -res, rcond=None)[0]
        step = 1.0
        improved = False
        for _ in range(8):
            u[bflat] += step * dv
            res_new, G_new = _boundary_state(field, target, collocated, correction)
            worst_new = float(np.max(np.abs(res_new)))
            if worst_new < worst or worst_new <= tol:
                res, G, worst = res_new, G_new, worst_new
                improved = True
                break
            u[bflat] -= step * dv
            step *= 0.5
        if not improved:
            # stalled Newton: bisect the offending nodes one at a time
            for r in np.nonzero(np.abs(res) > tol)[0]:
                _bisect_node(field, target, int(r), collocated, correction, tol)
            res, G = _boundary_state(field, target, collocated, correction)
            worst = float(np.max(np.abs(res)))
        iters += 1
    if worst > tol:
        raise BoundaryProjectionError(
            f"boundary residual {worst:g} above tolerance {tol:g} "
            f"after {iters} Newton iterations")
    return StepReport(dt=dt, max_interior_update=0.0,
                      boundary_newton_iters=iters, boundary_residual=worst)


def estimate_cinfty(trail, mean_f_late=None, window=10):
    """Least-squares drift of mean value over time, plus the PDE cross-check.

    `trail` is a sequence of (t, spatial mean of u); the second return is the
    discrepancy |slope - mean_f_late| when the late-time operator mean is
    supplied (NaN otherwise).
    """
    trail = list(trail)
    if len(trail) < 2:
        raise InsufficientDataError("need at least 2 records for a drift fit")
    ts = np.array([p[0] for p in trail[-window:]], dtype=float)
    us = np.array([p[1] for p in trail[-window:]], dtype=float)
    tbar, ubar = ts.mean(), us.mean()
    denom = float(np.sum((ts - tbar) ** 2))
    if denom == 0.0:
        raise InsufficientDataError("records share a single time stamp")
    slope = float(np.sum((ts - tbar) * (us - ubar)) / denom)
    disc = abs(slope - mean_f_late) if mean_f_late is not None else math.nan
    return slope, disc


def build_initial_field(cfg, grid, source, target):
    """Initial data: the aligned-axes quadratic, optionally perturbed.

    The quadratic (m1 x1^2 + m2 x2^2)/2 with m_i the ratio of effective
    semi-axes maps the source exactly onto the target for ellipse pairs.
    The perturbed variant multiplies a smooth oscillation by the squared
    source defining function, so the perturbation and its gradient vanish on
    the boundary and the initial data still maps the source onto the target
    (the admissibility the flow demands of initial data).
    """
    m1 = target.semi_axes[0] / source.semi_axes[0]
    m2 = target.semi_axes[1] / source.semi_axes[1]
    init = cfg.initial_data
    scale = init.get("scale", 1.0)
    offset = init.get("offset", 0.0)
    m1, m2 = m1 * scale, m2 * scale

    def quad(p):
        return 0.5 * (m1 * p[..., 0] ** 2 + m2 * p[..., 1] ** 2) + offset

    if init.get("kind", "quadratic") == "quadratic":
        return sample_field(grid, quad)

    amp = init.get("amplitude", 0.0)
    rng = np.random.default_rng(cfg.seed)
    w = rng.uniform(1.0, 2.0, size=2)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=2)

    def perturbed(p):
        bump = np.sin(w[0] * p[..., 0] + phase[0]) * np.sin(w[1] * p[..., 1] + phase[1])
        cut = (source.h(p) / source.c0) ** 2
        return quad(p) + amp * bump * cut

    return sample_field(grid, perturbed)


def _d3_scale(field):
    """Largest first difference of Hessian entries between adjacent nodes."""
    g = field.grid
    hxx, hyy, hxy, _, _ = hessians(field)
    worst = 0.0
    for comp in (hxx, hyy, hxy):
        full = np.full(g.nx * g.ny, np.nan)
        full[g.active_flat] = comp
        full = full.reshape(g.nx, g.ny)
        for d in (np.abs(full[1:, :] - full[:-1, :]),
                  np.abs(full[:, 1:] - full[:, :-1])):
            if d.size and not np.all(np.isnan(d)):
                worst = max(worst, float(np.nanmax(d)))
    return worst / g.spacing


@dataclass
class FlowResult:
    records: list
    summary: FlowSummary
    field: GridField
    grid: object
    checks: dict = dc_field(default_factory=dict)
    last_step: StepReport | None = None


def run_flow(cfg):
    """Run the flow to its translating limit; returns records + summary + field.

    Alternates the interior Euler update with the boundary projection,
    recording diagnostics every `record_interval` steps after the burn-in.
    Declares convergence when the interior operator spread and the drift
    cross-check both fall under the tolerance; trips to invariant-violation
    on convexity loss, drift-band violations, or projection failure.
    """
    source = build_domain(cfg.source)
    target = build_domain(cfg.target)
    profile_ = operators.profile(cfg.profile)
    grid = classify_grid(source, cfg.spacing,
                         boundary_gradient_order=cfg.boundary_gradient_order)
    field = build_initial_field(cfg, grid, source, target)
    coll = cfg.boundary_collocation

    # collocation correction relaxed in time: the per-step projection sees a
    # frozen correction (stable local stencil), while its slow relaxation
    # toward the instantaneous value makes the translating limit satisfy the
    # second-order collocated constraint.  tau = 0 keeps it instantaneous.
    tau = cfg.collocation_relax_time
    K = collocation_correction(field) if coll else None

    last_step = None

    def project(warm=None, dt=0.0, interior_update=0.0):
        nonlocal last_step
        rep = enforce_boundary(field, source, target, tol=cfg.boundary_tol,
                               collocated=coll, correction=K,
                               warm_rates=warm, dt=dt)
        rep.max_interior_update = interior_update
        last_step = rep
        return rep

    def relax_correction(dt):
        nonlocal K
        if coll and tau >= 0.0:
            w = 1.0 if tau == 0.0 else min(1.0, dt / tau)
            K += w * (collocation_correction(field) - K)

    project()

    ipos = grid.interior_pos
    iflat = grid.active_flat[ipos]
    bpos = grid.b_pos

    def spectral():
        return hessians(field)

    # burn-in establishes discrete feasibility before anything is monitored
    steps = 0
    violation = ""
    termination = None
    try:
        for _ in range(cfg.burn_in_steps):
            _, _, _, lo, hi = spectral()
            if float(lo.min()) <= 0.0:
                k = int(np.argmin(lo))
                raise ConvexityLossError(tuple(grid.coords[k]), float(lo.min()))
            F = profile_.f(lo) + profile_.f(hi)
            trace = profile_.fp(lo) + profile_.fp(hi)
            dt = cfg.sigma * grid.spacing**2 / (2.0 * float(trace.max()))
            upd = dt * F[ipos]
            field.values.ravel()[iflat] += upd
            field.t += dt
            project(warm=F[bpos], dt=dt,
                    interior_update=float(np.max(np.abs(upd))))
            relax_correction(dt)
            steps += 1
    except (ConvexityLossError, BoundaryProjectionError) as e:
        violation = str(e)
        termination = "invariant-violation"

    # drift bounds and envelope come from the post-burn-in discrete state
    theta0 = theta1 = math.nan
    env = None
    mean_f = math.nan
    udot_slack = diagnostics.interior_slack(grid.spacing)
    if termination is None:
        _, _, _, lo, hi = spectral()
        if float(lo.min()) <= 0.0:
            k = int(np.argmin(lo))
            violation = (f"convexity lost at node {tuple(grid.coords[k])} "
                         f"after burn-in: eigenvalue {float(lo.min()):g}")
            termination = "invariant-violation"
        else:
            F = profile_.f(lo) + profile_.f(hi)
            theta0, theta1 = float(F.min()), float(F.max())
            env = operators.envelope_bounds(profile_, theta0, theta1, 2)
            d3 = _d3_scale(field)
            udot_slack = diagnostics.interior_slack(grid.spacing) * (1.0 + d3)

    records = []
    trail = []
    prev_snapshot = None

    def record_now():
        nonlocal prev_snapshot
        rec = diagnostics.compute_record(
            field, profile_, source, target, theta0, theta1, env,
            prev=prev_snapshot, hausdorff_samples=cfg.hausdorff_samples,
            collocated=coll)
        records.append(rec)
        trail.append((field.t, float(np.mean(field.active_values()))))
        prev_snapshot = (field.t, field.values.copy())
        return rec

    if termination is None:
        mean_f = float(np.mean(F[grid.interior_mask]))
        record_now()
        while True:
            if field.t >= cfg.t_max or steps >= cfg.max_steps:
                termination = "max-time"
                break
            try:
                for _ in range(cfg.record_interval):
                    _, _, _, lo, hi = spectral()
                    if float(lo.min()) <= 0.0:
                        k = int(np.argmin(lo))
                        raise ConvexityLossError(tuple(grid.coords[k]),
                                                 float(lo.min()))
                    F = profile_.f(lo) + profile_.f(hi)
                    trace = profile_.fp(lo) + profile_.fp(hi)
                    dt = cfg.sigma * grid.spacing**2 / (2.0 * float(trace.max()))
                    dt = min(dt, max(cfg.t_max - field.t, 1e-12))
                    upd = dt * F[ipos]
                    field.values.ravel()[iflat] += upd
                    field.t += dt
                    project(warm=F[bpos], dt=dt,
                            interior_update=float(np.max(np.abs(upd))))
                    relax_correction(dt)
                    steps += 1
            except (ConvexityLossError, BoundaryProjectionError) as e:
                violation = str(e)
                termination = "invariant-violation"
                break
            rec = record_now()
            mean_f = float(np.mean(F[grid.interior_mask]))
            if rec.lam_min < diagnostics.EPS_CONVEX:
                violation = (f"hessian eigenvalue {rec.lam_min:g} under "
                             f"{diagnostics.EPS_CONVEX:g}")
                termination = "invariant-violation"
                break
            if not math.isnan(rec.udot_min) and max(
                    theta0 - rec.udot_min, rec.udot_max - theta1) > udot_slack:
                violation = "drift left the initial-data band"
                termination = "invariant-violation"
                break
            if len(trail) >= 2:
                slope, disc = estimate_cinfty(trail, mean_f,
                                              window=cfg.cinfty_window)
                if (rec.stat_residual <= 0.5 * cfg.convergence_tol
                        and disc <= 0.5 * cfg.convergence_tol):
                    termination = "converged"
                    break

    if len(trail) >= 2:
        c_infty, disc = estimate_cinfty(trail, mean_f, window=cfg.cinfty_window)
    else:
        c_infty, disc = mean_f, math.nan

    if env is not None:
        _, _, _, lo, hi = spectral()
        if float(lo.min()) > 0.0:
            F = profile_.f(lo) + profile_.f(hi)
            stat_final = float(np.max(np.abs(F[grid.interior_mask] - c_infty)))
        else:
            stat_final = math.inf
        haus = records[-1].hausdorff if records else diagnostics.image_distance(
            field, target, samples=cfg.hausdorff_samples, collocated=coll)
        checks = diagnostics.run_checks(
            records, profile_, theta0, theta1, env, grid.spacing,
            udot_slack=udot_slack, final_hausdorff=haus)
        mu1, mu2 = env.mu1, env.mu2
    else:
        stat_final = math.inf
        haus = math.nan
        mu1 = mu2 = math.nan
        # every suite still reports a verdict on failure exits
        note = f"not evaluated: {violation}"
        checks = {name: {"pass": False, "note": note}
                  for name in ("udot_band", "eigen_cone", "structure_band",
                               "obliqueness", "convexity", "image_distance")}
        checks["burn_in"] = {"pass": False, "violation": violation}

    summary = FlowSummary(
        c_infty=c_infty, c_infty_crosscheck=mean_f, stat_residual=stat_final,
        hausdorff=haus, steps=steps, termination=termination,
        t_final=field.t, theta0=theta0, theta1=theta1,
        mu1=mu1, mu2=mu2, violation=violation,
    )
    return FlowResult(records=records, summary=summary, field=field,
                      grid=grid, checks=checks, last_step=last_step)
