"""Per-step invariant monitors and trajectory-level pass/fail checks.

Every function here is a pure evaluation of its inputs; records are plain
dataclasses that serialize one CSV row per recorded step.  Interior
quantities get O(spacing^2) slack, boundary quantities O(spacing); both are
overridable per run.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import operators
from .fields import hessians, node_gradients, raw_gradients

# timeseries.csv column order (the external contract)
CSV_COLUMNS = ("t", "udot_min", "udot_max", "theta0", "theta1", "lam_min",
               "lam_max", "mu1", "mu2", "obliq_min", "band_sum_fp",
               "band_sum_fpl2", "stat_residual", "hausdorff")

EPS_CONVEX = 1e-6
BAND_TOL = 1e-9


def interior_slack(spacing):
    return 1e-6 + 10.0 * spacing**2


def boundary_slack(spacing):
    return 1e-4 + 10.0 * spacing


@dataclass
class DiagnosticsRecord:
    """Snapshot of every monitored quantity at one recorded step."""

    t: float
    udot_min: float
    udot_max: float
    theta0: float
    theta1: float
    lam_min: float      # smallest eigenvalue over all nodes
    lam_max: float      # largest eigenvalue over all nodes
    lam1_max: float     # largest per-node smallest eigenvalue
    lamn_min: float     # smallest per-node largest eigenvalue
    mu1: float
    mu2: float
    obliq_min: float
    obliq_identity: float
    tangential_max: float
    band_sum_fp: float      # worst (smallest) structure sum over nodes
    band_sum_fpl2: float
    band_fp_max: float
    band_fpl2_max: float
    band_fp_bounds: tuple
    band_fpl2_bounds: tuple
    band_provenance: str
    band_pass: bool
    stat_residual: float
    hausdorff: float

    def csv_row(self):
        vals = {c: getattr(self, c) for c in CSV_COLUMNS}
        return [vals[c] for c in CSV_COLUMNS]


def obliqueness(field, source, target, collocated=False):
    """Boundary obliqueness min <beta, nu> and the inner-product identity.

    beta = Dh(Du) from the plain one-sided gradients at boundary nodes;
    the identity compares <beta, nu> with
    sqrt(u^{ij} nu_i nu_j * h_{p_k} h_{p_l} u_{kl}) built from the discrete
    Hessian and its inverse.  Nodes with a singular Hessian are skipped and
    counted.
    """
    g = field.grid
    bpos = g.b_pos
    if bpos.size == 0:
        return math.inf, 0.0, 0.0, 0
    b = g.coords[bpos]
    nu = source.grad_h(b)
    nu /= np.linalg.norm(nu, axis=1, keepdims=True)
    du = boundary_gradient_images(field, collocated=collocated)
    beta = target.grad_h(du)
    lhs = np.einsum("ij,ij->i", beta, nu)
    hxx, hyy, hxy, lo, hi = hessians(field, pos=bpos)
    det = hxx * hyy - hxy**2
    ok = det > 1e-12
    skipped = int(np.sum(~ok))
    inv_nn = (hyy * nu[:, 0] ** 2 - 2 * hxy * nu[:, 0] * nu[:, 1]
              + hxx * nu[:, 1] ** 2) / np.where(ok, det, 1.0)
    bhb = (hxx * beta[:, 0] ** 2 + 2 * hxy * beta[:, 0] * beta[:, 1]
           + hyy * beta[:, 1] ** 2)
    rhs = np.sqrt(np.clip(inv_nn * bhb, 0.0, None))
    ident = float(np.max(np.abs(lhs - rhs)[ok])) if np.any(ok) else math.nan
    # tangential second derivative u_{beta tau}, zero for the continuum flow
    tau = np.stack([-nu[:, 1], nu[:, 0]], axis=-1)
    ubt = (beta[:, 0] * (hxx * tau[:, 0] + hxy * tau[:, 1])
           + beta[:, 1] * (hxy * tau[:, 0] + hyy * tau[:, 1]))
    return float(np.min(lhs)), ident, float(np.max(np.abs(ubt))), skipped


def tangential_identity(field, source, target):
    """Max |u_{beta tau}| over boundary nodes (expected O(spacing))."""
    return obliqueness(field, source, target)[2]


def boundary_gradient_images(field, collocated=True):
    """Gradient-map images at boundary nodes.

    With collocation the node gradient is transported to the nearest true
    boundary point through the discrete Hessian (exact on quadratics).
    """
    g = field.grid
    bpos = g.b_pos
    gr = node_gradients(field, pos=bpos)
    if not collocated:
        return raw_gradients(field, pos=bpos)
    hxx, hyy, hxy, _, _ = hessians(field, pos=bpos)
    px, py = g.b_pdel[:, 0], g.b_pdel[:, 1]
    out = np.empty_like(gr)
    out[:, 0] = gr[:, 0] + hxx * px + hxy * py
    out[:, 1] = gr[:, 1] + hxy * px + hyy * py
    return out


def image_distance(field, target, samples=256, collocated=True):
    """One-sided Hausdorff estimate between the gradient image and the target.

    Combines the defining-function distance proxy |h(Du)|/|Dh(Du)| at
    boundary nodes with the worst distance from sampled target boundary
    points to the image set.
    """
    du = boundary_gradient_images(field, collocated=collocated)
    hv = np.abs(target.h(du))
    dh = target.grad_h(du)
    dhn = np.maximum(np.linalg.norm(dh, axis=1), 1e-12)
    proxy = float(np.max(hv / dhn)) if du.shape[0] else 0.0
    pts = target.boundary_points(samples)
    d2 = ((pts[:, None, :] - du[None, :, :]) ** 2).sum(-1)
    cover = float(np.sqrt(d2.min(axis=1).max())) if du.shape[0] else math.inf
    return max(proxy, cover)


def compute_record(field, profile_, source, target, theta0, theta1, env,
                   prev=None, hausdorff_samples=256, collocated=True,
                   band_window=None):
    """Evaluate every monitored quantity on one field snapshot.

    `prev` is an optional (t, values) pair for the drift estimate; `env` the
    eigenvalue envelope from the drift bounds.
    """
    g = field.grid
    interior = g.interior_mask
    hxx, hyy, hxy, lo, hi = hessians(field)
    F = profile_.f(lo) + profile_.f(hi)
    f_int = F[interior]
    stat = float(np.max(np.abs(f_int - f_int.mean())))

    fp_lo, fp_hi = profile_.fp(lo), profile_.fp(hi)
    sum_fp = fp_lo + fp_hi
    sum_fpl2 = fp_lo * lo**2 + fp_hi * hi**2
    th0b, th1b = operators.band_thetas(profile_, theta0, theta1)
    if band_window is None and profile_.name != operators.TAU_PI4:
        band_window = (min(env.mu2, float(lo.min())), max(env.mu1, float(hi.max())))
    band_fp, band_fpl2, prov = operators.band_bounds(
        profile_, th0b, th1b, 2, lam_window=band_window)
    band_pass = bool(
        band_fp[0] - BAND_TOL <= sum_fp.min()
        and sum_fp.max() <= band_fp[1] + BAND_TOL
        and band_fpl2[0] - BAND_TOL <= sum_fpl2.min()
        and sum_fpl2.max() <= band_fpl2[1] + BAND_TOL)

    if prev is None:
        udot_min = udot_max = math.nan
    else:
        t_prev, v_prev = prev
        dt = field.t - t_prev
        du = (field.active_values()
              - v_prev.ravel()[g.active_flat]) / dt
        udot_min, udot_max = float(du.min()), float(du.max())

    obliq_min, ident, tang, _ = obliqueness(field, source, target)
    haus = image_distance(field, target, samples=hausdorff_samples,
                          collocated=collocated)

    return DiagnosticsRecord(
        t=field.t, udot_min=udot_min, udot_max=udot_max,
        theta0=theta0, theta1=theta1,
        lam_min=float(lo.min()), lam_max=float(hi.max()),
        lam1_max=float(lo.max()), lamn_min=float(hi.min()),
        mu1=env.mu1, mu2=env.mu2,
        obliq_min=obliq_min, obliq_identity=ident, tangential_max=tang,
        band_sum_fp=float(sum_fp.min()), band_sum_fpl2=float(sum_fpl2.min()),
        band_fp_max=float(sum_fp.max()), band_fpl2_max=float(sum_fpl2.max()),
        band_fp_bounds=tuple(band_fp), band_fpl2_bounds=tuple(band_fpl2),
        band_provenance=prov, band_pass=band_pass,
        stat_residual=stat, hausdorff=haus,
    )


def udot_bounds(records, theta0, theta1, slack):
    """Drift-band check over post-burn-in records: pass + worst margin."""
    margin = -math.inf
    seen = False
    for r in records:
        if math.isnan(r.udot_min):
            continue
        seen = True
        margin = max(margin, theta0 - r.udot_min, r.udot_max - theta1)
    if not seen:
        return True, -math.inf
    return margin <= slack, margin


def eigen_cone(records, env, slack):
    """Envelope check: per-node smallest <= mu1, largest >= mu2 (+- slack)."""
    worst = -math.inf
    for r in records:
        worst = max(worst, r.lam1_max - env.mu1, env.mu2 - r.lamn_min)
    return worst <= slack, worst


def pi4_cone_bounds(theta0, theta1, n=2):
    """Closed-form envelope for the tau-pi4 preset from the flow drift bounds.

    In the positive-operator convention the bounds read
    lambda_1 <= n/theta0 - 1 and lambda_n >= n/theta1 - 1.
    """
    th0_pos, th1_pos = -theta1, -theta0
    return n / th0_pos - 1.0, n / th1_pos - 1.0


def run_checks(records, profile_, theta0, theta1, env, spacing,
               udot_slack=None, final_hausdorff=None):
    """Assemble the invariant suite verdicts for a trajectory."""
    s_int = interior_slack(spacing)
    udot_slack = s_int if udot_slack is None else udot_slack
    checks = {}
    ok, margin = udot_bounds(records, theta0, theta1, udot_slack)
    checks["udot_band"] = {"pass": bool(ok), "worst_margin": margin,
                           "slack": udot_slack}
    ok, worst = eigen_cone(records, env, s_int)
    cone = {"pass": bool(ok), "worst_margin": worst, "slack": s_int,
            "mu1": env.mu1, "mu2": env.mu2}
    if profile_.name == operators.TAU_PI4:
        mu1, mu2 = pi4_cone_bounds(theta0, theta1)
        cone["mu1_closed_form"] = mu1
        cone["mu2_closed_form"] = mu2
        cone["closed_form_agrees"] = bool(
            abs(mu1 - env.mu1) <= 1e-9 and abs(mu2 - env.mu2) <= 1e-9)
    checks["eigen_cone"] = cone
    checks["structure_band"] = {
        "pass": bool(all(r.band_pass for r in records)),
        "provenance": records[-1].band_provenance if records else "n/a",
        "bounds_fp": list(records[-1].band_fp_bounds) if records else None,
        "bounds_fpl2": list(records[-1].band_fpl2_bounds) if records else None,
    }
    obliq = min((r.obliq_min for r in records), default=math.inf)
    checks["obliqueness"] = {
        "pass": bool(obliq > 0.0), "min": obliq,
        "identity_residual": max((r.obliq_identity for r in records),
                                 default=math.nan),
    }
    lam_min = min((r.lam_min for r in records), default=math.inf)
    checks["convexity"] = {"pass": bool(lam_min >= EPS_CONVEX), "min_eig": lam_min}
    if final_hausdorff is not None:
        checks["image_distance"] = {
            "pass": bool(final_hausdorff <= 5.0 * spacing),
            "value": final_hausdorff, "bound": 5.0 * spacing}
    checks["hessian_extremes"] = {
        "pass": True,
        "lam_min": lam_min,
        "lam_max": max((r.lam_max for r in records), default=math.nan),
    }
    return checks
