import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slgflow import operators as op

P0 = op.profile(op.TAU_0)
P4 = op.profile(op.TAU_PI4)
P2 = op.profile(op.TAU_PI2)
ALL = (P0, P4, P2)


def test_eigen_sym_examples():
    assert np.allclose(op.eigen_sym(np.eye(2)).eigenvalues, [1.0, 1.0])
    assert np.allclose(op.eigen_sym(np.diag([1.0, 3.0])).eigenvalues, [1.0, 3.0])
    # roots of lambda^2 - 4 lambda + 3
    dec = op.eigen_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(dec.eigenvalues, [1.0, 3.0])
    A = dec.eigenvectors @ np.diag(dec.eigenvalues) @ dec.eigenvectors.T
    assert np.allclose(A, [[2, 1], [1, 2]], atol=1e-12)


def test_eigen_sym_rejects_asymmetric():
    with pytest.raises(op.AsymmetricInputError):
        op.eigen_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_evaluate_examples():
    assert op.evaluate_F(P2, np.eye(2)) == pytest.approx(math.pi / 2)
    assert op.evaluate_F(P0, np.diag([1.0, math.e])) == pytest.approx(1.0)
    assert op.evaluate_F(P4, np.eye(2)) == pytest.approx(-1.0)


def test_evaluate_outside_cone():
    with pytest.raises(op.OutsideConeError):
        op.evaluate_F(P0, np.diag([1.0, -0.5]))
    with pytest.raises(op.OutsideConeError):
        op.evaluate_F(P2, np.diag([0.0, 1.0]))


def test_gradient_examples():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    # log-determinant operator: gradient is the matrix inverse
    assert np.allclose(op.gradient_F(P0, A), np.linalg.inv(A), atol=1e-12)
    assert np.allclose(op.gradient_F(P2, np.eye(2)), 0.5 * np.eye(2))
    got = op.gradient_F(P4, np.diag([1.0, 3.0]))
    assert np.allclose(got, np.diag([0.25, 1.0 / 16.0]))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    step = 1e-5
    for p in ALL:
        for n in (2, 3):
            for _ in range(25):
                A = op.random_spd(rng, n)
                Gm = op.gradient_F(p, A)
                scale = max(1.0, float(np.max(np.abs(Gm))))
                for i in range(n):
                    for j in range(i, n):
                        S = np.zeros((n, n))
                        S[i, j] = S[j, i] = 1.0
                        fd = (op.evaluate_F(p, A + step * S)
                              - op.evaluate_F(p, A - step * S)) / (2 * step)
                        assert abs(fd - float(np.sum(Gm * S))) / scale < 1e-6


def test_dual_profiles_pointwise():
    ts = np.geomspace(1e-2, 1e2, 41)
    d0, d4, d2 = (op.dual_profile(p) for p in ALL)
    assert np.allclose(d0.f(ts), np.log(ts))              # self-dual
    assert np.allclose(d2.f(ts), np.arctan(ts) - math.pi / 2)
    assert np.allclose(d4.f(ts), ts / (1.0 + ts))


def test_dual_involution_and_inversion():
    rng = np.random.default_rng(11)
    for p in ALL:
        d = op.dual_profile(p)
        dd = op.dual_profile(d)
        for n in (2, 3):
            for _ in range(20):
                A = op.random_spd(rng, n)
                assert abs(op.evaluate_F(dd, A) - op.evaluate_F(p, A)) < 1e-10
                assert abs(op.evaluate_F(d, A)
                           + op.evaluate_F(p, np.linalg.inv(A))) < 1e-10


def test_f_inverse_roundtrip():
    ts = np.geomspace(1e-3, 1e3, 200)
    for p in ALL + tuple(op.dual_profile(q) for q in ALL):
        back = p.f_inverse(p.f(ts))
        assert np.max(np.abs(back - ts) / ts) < 1e-10


def test_check_concavity_examples():
    val = op.check_concavity(P4, np.eye(2), np.diag([1.0, 0.0]), 1e-4)
    assert val == pytest.approx(-0.25, abs=1e-6)
    assert op.check_concavity(P0, np.eye(2), np.zeros((2, 2)), 1e-3) == 0.0
    val = op.check_concavity(P0, np.eye(2), np.eye(2), 1e-4)
    assert val == pytest.approx(-2.0, abs=1e-5)


def test_check_concavity_cone_exit():
    with pytest.raises(op.OutsideConeError):
        op.check_concavity(P0, np.diag([1e-9, 1.0]), np.eye(2), 1e-3)


def test_concavity_negative_for_profiles_and_duals():
    rng = np.random.default_rng(3)
    for p in ALL:
        for q in (p, op.dual_profile(p)):
            for _ in range(50):
                A = op.random_spd(rng, 2)
                B = op.random_spd(rng, 2) - op.random_spd(rng, 2)
                B /= max(1.0, float(np.max(np.abs(B))))
                try:
                    assert op.check_concavity(q, A, B, 1e-4) <= 1e-6
                except op.OutsideConeError:
                    continue


def test_envelope_bounds_examples():
    # pi/4 with positive-operator bounds 1: flow bounds are -1
    env = op.envelope_bounds(P4, -1.0, -1.0, 2)
    assert env.mu1 == pytest.approx(1.0)
    assert env.mu2 == pytest.approx(1.0)
    env = op.envelope_bounds(P2, math.pi / 2, math.pi / 2, 2)
    assert env.mu1 == pytest.approx(1.0)
    env = op.envelope_bounds(P0, 2 * math.log(2.0), 2 * math.log(2.0), 2)
    assert env.mu1 == pytest.approx(2.0)
    with pytest.raises(op.InfeasibleBoundError):
        op.envelope_bounds(P2, -1.0, 1.0, 2)  # below the range of n*arctan
    with pytest.raises(op.InfeasibleBoundError):
        op.envelope_bounds(P4, -1.0, 0.5, 2)


def test_envelope_consistency_sampled():
    # any spectrum whose operator value sits in [theta0, theta1] obeys the
    # envelope: smallest eigenvalue <= mu1, largest >= mu2
    rng = np.random.default_rng(5)
    for p in ALL:
        for n in (2, 3, 4):
            lam = np.sort(np.exp(rng.uniform(-2, 2, size=(200, n))), axis=1)
            fv = p.f(lam).sum(axis=1)
            th0, th1 = fv.min(), fv.max()
            env = op.envelope_bounds(p, th0, th1, n)
            assert np.all(lam[:, 0] <= env.mu1 + 1e-12)
            assert np.all(lam[:, -1] >= env.mu2 - 1e-12)


def test_structure_band_pi4_examples():
    band = op.structure_band(P4, np.array([1.0, 1.0]), 1.0, 1.0)
    assert band.sum_fp == pytest.approx(0.5)
    assert band.band_fp == pytest.approx((0.25, 2.0))
    assert band.sum_fpl2 == pytest.approx(0.5)
    assert band.band_fpl2 == pytest.approx((0.25, 2.0))
    assert band.provenance == "paper"
    assert band.passed


def test_structure_band_equal_sums_at_unit_spectrum():
    for p in ALL:
        th = 2 * float(p.f(1.0))
        t0, t1 = op.band_thetas(p, th, th)
        band = op.structure_band(p, np.array([1.0, 1.0]), t0, t1)
        assert band.sum_fp == pytest.approx(band.sum_fpl2)
        assert band.passed


def test_structure_band_violation_reported_not_raised():
    band = op.structure_band(P4, np.array([9.0, 9.0]), 1.9, 1.9)
    assert not band.passed  # sum f' = 2/100 under theta0^2/n^2


def test_band_thetas_convention():
    assert op.band_thetas(P4, -1.0, -0.5) == (0.5, 1.0)
    assert op.band_thetas(P0, 0.3, 0.9) == (0.3, 0.9)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_monotonicity_random_pairs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 4))
    A = op.random_spd(rng, n)
    B = A + op.random_spd(rng, n, lam_lo=0.01, lam_hi=1.0)
    for p in ALL:
        assert op.evaluate_F(p, A) <= op.evaluate_F(p, B) + 1e-12


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_spectral_reconstruction(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    M = rng.standard_normal((n, n))
    A = 0.5 * (M + M.T)
    dec = op.eigen_sym(A)
    assert np.all(np.diff(dec.eigenvalues) >= -1e-12)
    R = dec.eigenvectors @ np.diag(dec.eigenvalues) @ dec.eigenvectors.T
    assert np.max(np.abs(R - A)) < 1e-10
