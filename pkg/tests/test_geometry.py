import numpy as np
import pytest

from slgflow import geometry as G

DISK = G.make_ellipse((1.0, 1.0))
ELL21 = G.make_ellipse((2.0, 1.0))


def test_ellipse_defining_function_values():
    assert DISK.h(np.array([0.0, 0.0])) == pytest.approx(1.0)
    assert DISK.h(np.array([1.0, 0.0])) == pytest.approx(0.0)
    assert DISK.h(np.array([1.1, 0.0])) < 0.0


def test_ellipse_gradient_analytic():
    # h = 1 - x^2/4 - y^2, so Dh(2, 0) = (-1, 0)
    g = ELL21.grad_h(np.array([2.0, 0.0]))
    assert np.allclose(g, [-1.0, 0.0])


def test_invalid_axes_rejected():
    with pytest.raises(G.InvalidDomainError):
        G.make_ellipse((0.0, 1.0))
    with pytest.raises(G.InvalidDomainError):
        G.make_ellipse((1.0, -2.0))


def test_blend_is_positive_combination():
    b = G.make_blend([(1.0, 1.0), (2.0, 1.0)], [0.5, 2.0])
    p = np.array([0.3, -0.2])
    expect = 0.5 * DISK.h(p) + 2.0 * ELL21.h(p)
    assert b.h(p) == pytest.approx(expect)
    with pytest.raises(G.InvalidDomainError):
        G.make_blend([(1.0, 1.0)], [-1.0])


def test_inner_normal_disk_points_inward():
    assert np.allclose(G.inner_normal(DISK, [1.0, 0.0]), [-1.0, 0.0])
    assert np.allclose(G.inner_normal(DISK, [0.0, -1.0]), [0.0, 1.0])
    assert np.allclose(G.inner_normal(ELL21, [2.0, 0.0]), [-1.0, 0.0])


def test_inner_normal_units_and_errors():
    ang = np.linspace(0.0, 2 * np.pi, 37)
    for a in ang:
        p = [2.0 * np.cos(a), 1.0 * np.sin(a)]
        nu = G.inner_normal(ELL21, p)
        assert abs(np.hypot(*nu) - 1.0) < 1e-12
    with pytest.raises(ValueError):
        G.inner_normal(DISK, [0.5, 0.0])  # not a boundary point


def test_project_to_boundary_nearest():
    pts = np.array([[0.5, 0.0], [0.0, -0.9], [0.3, 0.4]])
    q = DISK.project_to_boundary(pts)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
    # nearest crossing, not the antipode
    assert np.all(np.einsum("ij,ij->i", q, pts) > 0.0)


def test_classify_resolution_error():
    with pytest.raises(G.ResolutionError):
        G.classify_grid(DISK, 2.0)


def test_classify_interior_count_brute_force():
    h = 0.5
    g = G.classify_grid(DISK, h)
    # brute force: nodes with h > 0 whose four axis neighbors have h > 0
    count = 0
    for i in range(-4, 5):
        for j in range(-4, 5):
            p = np.array([i * h, j * h])
            nb = [p + [h, 0], p - [h, 0], p + [0, h], p - [0, h]]
            if DISK.h(p) > 0 and all(DISK.h(q) > 0 for q in nb):
                count += 1
    assert g.counts["interior"] == count == 1


def test_classify_agrees_with_sign():
    g = G.classify_grid(ELL21, 0.25)
    hv = ELL21.h(g.coords)
    assert np.all(hv > 0.0)  # every active node strictly inside
    # exterior count matches the h <= 0 count (no demotions at this spacing)
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    outside = ELL21.h(np.stack([X, Y], axis=-1)) <= 0.0
    assert g.counts["exterior"] == int(outside.sum())


def test_concavity_modulus_values():
    assert G.concavity_modulus(DISK, 100) == pytest.approx(2.0)
    assert G.concavity_modulus(ELL21, 100) == pytest.approx(0.5)
    # certified modulus at least the declared theta
    blend = G.make_blend([(1.0, 1.0), (2.0, 1.0)], [1.0, 1.0])
    assert G.concavity_modulus(blend, 500) >= blend.theta - 1e-12


def test_concavity_modulus_flat_direction_rejected():
    strip = G.ConvexDomain(kind="ellipse", c0=1.0, c1=1.0, c2=0.0, theta=0.0,
                           semi_axes=(1.0, 10.0), bbox=(-1, 1, -10, 10),
                           params={})
    with pytest.raises(G.ConcavityViolationError):
        G.concavity_modulus(strip, 10)


def test_concavity_modulus_monotone_in_samples():
    dom = G.make_blend([(1.0, 0.7), (0.8, 1.1)], [1.0, 0.4])
    vals = [G.concavity_modulus(dom, n) for n in (10, 50, 200, 1000)]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_stencils_quadratic_exact_on_blend_grid():
    dom = G.make_blend([(1.0, 1.0), (1.5, 0.9)], [0.7, 0.8])
    g = G.classify_grid(dom, 1.0 / 12.0)
    from slgflow.fields import sample_field, hessians, node_gradients
    u = sample_field(g, lambda p: 1.7 * p[:, 0] ** 2 - 0.6 * p[:, 0] * p[:, 1]
                     + 1.1 * p[:, 1] ** 2 + 0.3 * p[:, 0] - 2.0)
    hxx, hyy, hxy, lo, hi = hessians(u)
    assert np.max(np.abs(hxx - 3.4)) < 1e-10
    assert np.max(np.abs(hyy - 2.2)) < 1e-10
    assert np.max(np.abs(hxy + 0.6)) < 1e-10
    gr = node_gradients(u)
    gx = 3.4 * g.coords[:, 0] - 0.6 * g.coords[:, 1] + 0.3
    gy = 2.2 * g.coords[:, 1] - 0.6 * g.coords[:, 0]
    assert np.max(np.abs(gr[:, 0] - gx)) < 1e-10
    assert np.max(np.abs(gr[:, 1] - gy)) < 1e-10


def test_boundary_projection_points_on_boundary():
    g = G.classify_grid(ELL21, 1.0 / 16.0)
    bp = g.coords[g.b_pos] + g.b_pdel
    assert np.max(np.abs(ELL21.h(bp))) < 1e-10
    # projection moved each node by less than two spacings
    assert np.max(np.linalg.norm(g.b_pdel, axis=1)) < 2.0 * g.spacing


def _classification_invariants(dom, g):
    hv = dom.h(g.coords)
    assert np.all(hv > 0.0)
    act = np.zeros((g.nx, g.ny), dtype=bool)
    act.ravel()[g.active_flat] = True
    interior = g.cls == G.INTERIOR
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        shifted = np.zeros_like(act)
        src = act[max(0, -di): g.nx - max(0, di), max(0, -dj): g.ny - max(0, dj)]
        shifted[max(0, di): g.nx - max(0, -di), max(0, dj): g.ny - max(0, -dj)] = src
        assert np.all(shifted[interior])  # interior keeps all axis neighbors
    bp = g.coords[g.b_pos] + g.b_pdel
    assert np.max(np.abs(dom.h(bp))) < 1e-9


from hypothesis import given, settings, strategies as st  # noqa: E402


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=25, deadline=None)
def test_classification_invariants_random_domains(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.6, 2.2, size=2)
    if rng.random() < 0.3:
        dom = G.make_blend([(a, b), tuple(rng.uniform(0.6, 2.2, size=2))],
                           list(rng.uniform(0.2, 2.0, size=2)))
    else:
        dom = G.make_ellipse((a, b))
    h = 1.0 / float(rng.integers(8, 21))
    g = G.classify_grid(dom, h)
    _classification_invariants(dom, g)
