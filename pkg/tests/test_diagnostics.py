import math

import numpy as np
import pytest

from slgflow import diagnostics as diag
from slgflow import operators
from slgflow.fields import sample_field
from slgflow.geometry import classify_grid, make_ellipse

DISK = make_ellipse((1.0, 1.0))


def _fake_record(**kw):
    base = dict(t=0.0, udot_min=1.0, udot_max=1.0, theta0=1.0, theta1=1.0,
                lam_min=1.0, lam_max=1.0, lam1_max=1.0, lamn_min=1.0,
                mu1=1.0, mu2=1.0, obliq_min=0.5, obliq_identity=0.0,
                tangential_max=0.0, band_sum_fp=0.5, band_sum_fpl2=0.5,
                band_fp_max=0.5, band_fpl2_max=0.5,
                band_fp_bounds=(0.25, 2.0), band_fpl2_bounds=(0.25, 2.0),
                band_provenance="paper", band_pass=True,
                stat_residual=0.0, hausdorff=0.0)
    base.update(kw)
    return diag.DiagnosticsRecord(**base)


def test_udot_bounds_pass_and_fail():
    recs = [_fake_record(udot_min=0.99, udot_max=1.01)]
    ok, margin = diag.udot_bounds(recs, 1.0, 1.0, slack=0.02)
    assert ok and margin == pytest.approx(0.01)
    recs = [_fake_record(udot_min=1.0, udot_max=2.0)]  # theta1 + 1
    ok, margin = diag.udot_bounds(recs, 1.0, 1.0, slack=0.02)
    assert not ok and margin == pytest.approx(1.0)
    # records without a drift estimate are skipped
    ok, _ = diag.udot_bounds([_fake_record(udot_min=math.nan,
                                           udot_max=math.nan)], 1.0, 1.0, 0.0)
    assert ok


def test_eigen_cone_quantifiers():
    env = operators.envelope_bounds(operators.profile("tau-pi2"),
                                    math.pi / 2, math.pi / 2, 2)
    # every node needs smallest eig <= mu1 and largest >= mu2
    good = [_fake_record(lam1_max=0.9, lamn_min=1.1, mu1=env.mu1, mu2=env.mu2)]
    ok, worst = diag.eigen_cone(good, env, slack=1e-6)
    assert ok
    bad = [_fake_record(lam1_max=1.5, lamn_min=1.1)]
    ok, worst = diag.eigen_cone(bad, env, slack=1e-6)
    assert not ok and worst == pytest.approx(0.5)


def test_pi4_cone_closed_form():
    # positive-operator bounds theta = 0.9 give mu1 = 2/0.9 - 1
    mu1, mu2 = diag.pi4_cone_bounds(-0.9, -0.9)
    assert mu1 == pytest.approx(2.0 / 0.9 - 1.0)
    assert mu2 == pytest.approx(2.0 / 0.9 - 1.0)
    # agrees with the generic envelope inversion
    env = operators.envelope_bounds(operators.profile("tau-pi4"), -0.9, -0.9, 2)
    assert mu1 == pytest.approx(env.mu1, abs=1e-12)


def test_obliqueness_disk_pair_analytic():
    # u = s|x|^2/2 maps disk(1) into disk(s): beta is parallel to the inner
    # normal up to the one-sided gradient bias
    s = 2.0
    target = make_ellipse((s, s))
    grid = classify_grid(DISK, 1.0 / 32.0)
    u = sample_field(grid, lambda p: 0.5 * s * (p[:, 0] ** 2 + p[:, 1] ** 2))
    obliq, ident, tang, skipped = diag.obliqueness(u, DISK, target)
    assert skipped == 0
    assert obliq > 0.4  # analytic value |x| * (2 s |x| / s^2) / 2-ish, O(1)
    assert ident <= 10 * grid.spacing
    assert tang <= 10 * grid.spacing


def test_obliqueness_identity_refines_quadratically():
    s = 2.0
    target = make_ellipse((s, s))
    vals = []
    for h in (1.0 / 16.0, 1.0 / 32.0):
        grid = classify_grid(DISK, h)
        u = sample_field(grid, lambda p: 0.5 * s * (p[:, 0] ** 2 + p[:, 1] ** 2))
        vals.append(diag.obliqueness(u, DISK, target)[1])
    assert vals[1] <= vals[0] / 2.0  # at least halves under refinement


def test_tangential_identity_exact_with_analytic_normal():
    # radial beta and tangential tau: beta^T (2I) tau = 0 exactly
    beta = np.array([0.3, 0.4])
    nu = beta / np.linalg.norm(beta)
    tau = np.array([-nu[1], nu[0]])
    assert abs(beta @ (2 * np.eye(2)) @ tau) < 1e-15


def test_image_distance_exact_solution_small():
    target = make_ellipse((2.0, 2.0))
    grid = classify_grid(DISK, 1.0 / 32.0)
    u = sample_field(grid, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    d = diag.image_distance(u, target)
    assert d <= 5 * grid.spacing


def test_image_distance_halves_under_refinement():
    target = make_ellipse((2.0, 2.0))
    vals = []
    for h in (1.0 / 16.0, 1.0 / 32.0):
        grid = classify_grid(DISK, h)
        u = sample_field(grid, lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
        vals.append(diag.image_distance(u, target))
    assert vals[1] <= 0.55 * vals[0]


def test_compute_record_fields_finite():
    p = operators.profile("tau0")
    target = make_ellipse((2.0, 2.0))
    grid = classify_grid(DISK, 1.0 / 16.0)
    u = sample_field(grid, lambda q: q[:, 0] ** 2 + q[:, 1] ** 2)
    th = 2 * math.log(2.0)
    env = operators.envelope_bounds(p, th, th, 2)
    rec = diag.compute_record(u, p, DISK, target, th, th, env)
    assert rec.band_provenance == "derived"
    assert rec.band_pass
    assert rec.stat_residual < 1e-10
    assert math.isnan(rec.udot_min)
    row = rec.csv_row()
    assert len(row) == len(diag.CSV_COLUMNS)
    # identical inputs give identical records (pure evaluation)
    rec2 = diag.compute_record(u, p, DISK, target, th, th, env)
    assert rec2 == rec


def test_slack_scalings():
    assert diag.interior_slack(0.1) == pytest.approx(1e-6 + 0.1)
    assert diag.boundary_slack(0.1) == pytest.approx(1e-4 + 1.0)
    # halving the spacing divides the dominant boundary term by two
    assert diag.boundary_slack(0.05) < 0.6 * diag.boundary_slack(0.1)
