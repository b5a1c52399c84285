import math

import numpy as np
import pytest

from slgflow import operators, solver
from slgflow.config import build_domain
from slgflow.fields import hessians, sample_field
from slgflow.geometry import classify_grid, make_ellipse
from tests.conftest import quick_config

DISK = make_ellipse((1.0, 1.0))
G16 = classify_grid(DISK, 1.0 / 16.0)


def test_discrete_hessian_exact_on_quadratics():
    u = sample_field(G16, lambda p: p[:, 0] ** 2 + 3 * p[:, 1] ** 2)
    ij = np.argwhere(G16.cls == 2)[0]
    H = solver.discrete_hessian(u, tuple(ij))
    assert np.allclose(H, np.diag([2.0, 6.0]), atol=1e-11)
    u = sample_field(G16, lambda p: p[:, 0] * p[:, 1])
    H = solver.discrete_hessian(u, tuple(ij))
    assert np.allclose(H, [[0, 1], [1, 0]], atol=1e-11)


def test_discrete_hessian_quartic_truncation():
    # u = x^4 at the origin: exact u_xx = 0, discrete value is 2 h^2
    errs = []
    for h in (1.0 / 8.0, 1.0 / 16.0):
        g = classify_grid(DISK, h)
        u = sample_field(g, lambda p: p[:, 0] ** 4)
        i0 = round(-g.i_range[0])
        j0 = round(-g.j_range[0])
        H = solver.discrete_hessian(u, (i0, j0))
        errs.append(abs(H[0, 0]))
        assert abs(H[0, 0] - 2 * h * h) < 1e-12
    assert errs[1] < errs[0] / 3.9


def test_discrete_hessian_inactive_node():
    from slgflow.geometry import StencilError
    u = sample_field(G16, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    with pytest.raises(StencilError):
        solver.discrete_hessian(u, (0, 0))  # lattice corner, exterior


def test_interior_step_translates_quadratic():
    p = operators.profile(operators.TAU_PI2)
    u = sample_field(G16, lambda q: q[:, 0] ** 2 + q[:, 1] ** 2)
    dt = 1e-3
    u1 = solver.interior_step(u, p, dt)
    assert u1.t == pytest.approx(dt)
    ipos = G16.interior_pos
    iflat = G16.active_flat[ipos]
    delta = u1.values.ravel()[iflat] - u.values.ravel()[iflat]
    assert np.max(np.abs(delta - dt * 2 * math.atan(2.0))) < 1e-14
    bpos = G16.b_pos
    bflat = G16.active_flat[bpos]
    assert np.array_equal(u1.values.ravel()[bflat], u.values.ravel()[bflat])


def test_interior_step_zero_dt_and_stationary():
    p0 = operators.profile(operators.TAU_0)
    u = sample_field(G16, lambda q: 0.5 * (q[:, 0] ** 2 + q[:, 1] ** 2))
    u1 = solver.interior_step(u, p0, 0.0)
    assert np.array_equal(u1.active_values(), u.active_values())
    u2 = solver.interior_step(u, p0, 0.02)  # ln det I = 0: no change
    assert np.max(np.abs(u2.active_values() - u.active_values())) < 1e-15


def test_interior_step_detects_convexity_loss():
    u = sample_field(G16, lambda q: 0.5 * (q[:, 0] ** 2 - q[:, 1] ** 2))
    with pytest.raises(solver.ConvexityLossError):
        solver.interior_step(u, operators.profile(operators.TAU_0), 1e-3)


def test_stable_dt_formula_and_scalings():
    p = operators.profile(operators.TAU_PI2)
    g = classify_grid(DISK, 0.1)
    u = sample_field(g, lambda q: 0.5 * (q[:, 0] ** 2 + q[:, 1] ** 2))
    assert solver.stable_dt(u, p, sigma=0.4) == pytest.approx(0.002)
    # halving the spacing quarters the step
    g2 = classify_grid(DISK, 0.05)
    u2 = sample_field(g2, lambda q: 0.5 * (q[:, 0] ** 2 + q[:, 1] ** 2))
    assert solver.stable_dt(u2, p, sigma=0.4) == pytest.approx(0.0005)
    # doubling the derivative trace halves the step
    _, _, _, lo, hi = hessians(u)
    tr = float(np.max(p.fp(lo) + p.fp(hi)))
    assert solver.stable_dt(u, p, sigma=0.4) == pytest.approx(
        0.4 * 0.01 / (2 * tr))


def test_enforce_boundary_exact_data_zero_iterations():
    target = make_ellipse((2.0, 2.0))
    u = sample_field(G16, lambda q: q[:, 0] ** 2 + q[:, 1] ** 2)
    rep = solver.enforce_boundary(u, DISK, target, tol=1e-9)
    assert rep.boundary_newton_iters == 0
    assert rep.boundary_residual < 1e-12


def test_enforce_boundary_restores_perturbation():
    target = make_ellipse((2.0, 2.0))
    u = sample_field(G16, lambda q: q[:, 0] ** 2 + q[:, 1] ** 2)
    before = u.active_values().copy()
    bflat = G16.active_flat[G16.b_pos[3]]
    u.values.ravel()[bflat] += 1e-3
    rep = solver.enforce_boundary(u, DISK, target, tol=1e-10)
    assert rep.boundary_residual <= 1e-10
    # the constraint system has a locally unique root: the perturbed value
    # returns to where it was
    assert np.max(np.abs(u.active_values() - before)) < 1e-8


def test_enforce_boundary_pulls_far_gradients():
    # gradient image 40% too small everywhere: projection still lands
    target = make_ellipse((2.0, 2.0))
    u = sample_field(G16, lambda q: 0.6 * (q[:, 0] ** 2 + q[:, 1] ** 2))
    rep = solver.enforce_boundary(u, DISK, target, tol=1e-9)
    assert rep.boundary_residual <= 1e-9
    from slgflow.solver import _boundary_state
    res, _ = _boundary_state(u, target, True, None)
    assert np.max(np.abs(res)) <= 1e-9


def test_estimate_cinfty_exact_line():
    ts = np.linspace(0.0, 1.0, 7)
    trail = [(t, 3.0 + 0.7 * t) for t in ts]
    slope, disc = solver.estimate_cinfty(trail, mean_f_late=0.7)
    assert slope == pytest.approx(0.7, abs=1e-13)
    assert disc == pytest.approx(0.0, abs=1e-13)
    with pytest.raises(solver.InsufficientDataError):
        solver.estimate_cinfty([(0.0, 1.0)])


def test_run_flow_quadratic_fixed_point(quick_run):
    # every node advances by exactly dt * drift per step (translating orbit)
    res = quick_run(profile="tau-pi2", spacing=1.0 / 16.0)
    s = res.summary
    assert s.termination == "converged"
    assert abs(s.c_infty - 2 * math.atan(2.0)) < 1e-12
    for rec in res.records[1:]:
        assert abs(rec.udot_min - s.c_infty) < 1e-10
        assert abs(rec.udot_max - s.c_infty) < 1e-10


def test_run_flow_additive_constant_equivariance(quick_run):
    res0 = quick_run(profile="tau0", spacing=1.0 / 16.0)
    res1 = quick_run(profile="tau0", spacing=1.0 / 16.0,
                     initial_data={"kind": "quadratic", "offset": 1.0})
    d = res1.field.active_values() - res0.field.active_values()
    assert abs(res1.field.t - res0.field.t) < 1e-14
    assert np.max(np.abs(d - d.mean())) < 1e-10


def test_run_flow_perturbed_converges(quick_run):
    res = quick_run(profile="tau-pi4", spacing=1.0 / 16.0,
                    initial_data={"kind": "quadratic-perturbed",
                                  "amplitude": 0.05},
                    seed=3, t_max=30.0, record_interval=50)
    s = res.summary
    assert s.termination == "converged"
    assert abs(s.c_infty - (-2.0 / 3.0)) < 5e-4
    assert all(c["pass"] for c in res.checks.values())


def test_image_distance_decays_from_small_gradient_map():
    # 10% too-small gradient image: positive distance, decreasing under flow
    from slgflow import diagnostics
    p = operators.profile(operators.TAU_PI2)
    target = make_ellipse((2.0, 2.0))
    cfg = quick_config(profile="tau-pi2", spacing=1.0 / 16.0)
    grid = classify_grid(DISK, cfg.spacing)
    u = sample_field(grid, lambda q: 0.9 * (q[:, 0] ** 2 + q[:, 1] ** 2))
    d0 = diagnostics.image_distance(u, target)
    assert d0 > 0.05
    for _ in range(20):
        dt = solver.stable_dt(u, p, sigma=0.4)
        u = solver.interior_step(u, p, dt)
        solver.enforce_boundary(u, DISK, target, tol=1e-9)
    d1 = diagnostics.image_distance(u, target)
    # the projection pulls the boundary images onto the target; what remains
    # is the coverage floor of the staircase ring at this spacing
    assert 0.0 < d1 < 0.5 * d0


def test_run_flow_second_order_boundary_gradients(quick_run):
    # the optional three-point one-sided stencils are also quadratic-exact,
    # so the exact orbit and its drift constant are unchanged
    res = quick_run(profile="tau0", spacing=1.0 / 16.0,
                    boundary_gradient_order=2)
    assert res.summary.termination == "converged"
    assert abs(res.summary.c_infty - 2 * math.log(2.0)) < 1e-12


def test_run_flow_blend_target(quick_run):
    res = quick_run(profile="tau-pi4", spacing=1.0 / 16.0,
                    target={"kind": "blend", "semi_axes": [[2, 2], [2.5, 1.8]],
                            "weights": [0.5, 0.5]})
    s = res.summary
    assert s.termination == "converged"
    # effective semi-axes (sqrt(c0/c1), sqrt(c0/c2)) force the drift constant
    tgt = build_domain({"kind": "blend", "semi_axes": [[2, 2], [2.5, 1.8]],
                        "weights": [0.5, 0.5]})
    a, b = tgt.semi_axes
    expect = -(1.0 / (1.0 + a) + 1.0 / (1.0 + b))
    assert abs(s.c_infty - expect) < 1e-10
    assert all(c["pass"] for c in res.checks.values())


def test_run_flow_blend_source(quick_run):
    # blend sources have non-unit boundary gradient scale; the collocated
    # constraint and monitored constants are normalization-independent
    src = {"kind": "blend", "semi_axes": [[1.0, 1.0], [1.4, 0.9]],
           "weights": [0.6, 0.9]}
    res = quick_run(profile="tau-pi2", spacing=1.0 / 16.0,
                    source=src, target=(1.8, 1.1))
    s = res.summary
    dom = build_domain(src)
    expect = (math.atan(1.8 / dom.semi_axes[0])
              + math.atan(1.1 / dom.semi_axes[1]))
    assert s.termination == "converged"
    assert abs(s.c_infty - expect) < 1e-12
    assert all(c["pass"] for c in res.checks.values())


def test_record_times_increase(quick_run):
    res = quick_run(profile="tau-pi2", spacing=1.0 / 16.0)
    ts = [r.t for r in res.records]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_enforce_boundary_plain_mode_converges():
    # without collocation the coupling is nearest-neighbor only; the coupled
    # Newton solve still lands, enforcing the constraint at the node itself
    target = make_ellipse((2.0, 2.0))
    u = sample_field(G16, lambda q: q[:, 0] ** 2 + q[:, 1] ** 2)
    rep = solver.enforce_boundary(u, DISK, target, tol=1e-11, collocated=False)
    assert rep.boundary_residual <= 1e-11
    from slgflow.solver import _boundary_state
    res, _ = _boundary_state(u, target, False)
    assert np.max(np.abs(res)) <= 1e-11


def test_run_flow_trips_on_engineered_drift_violation():
    # a wildly infeasible start (60% shrunk image) must not be silently
    # accepted: the run ends as a violation, not "converged", at tight slack
    cfg = quick_config(profile="tau0", spacing=1.0 / 16.0,
                       initial_data={"kind": "quadratic", "scale": 0.4},
                       t_max=0.5)
    res = solver.run_flow(cfg)
    assert res.summary.termination in ("invariant-violation", "max-time")
