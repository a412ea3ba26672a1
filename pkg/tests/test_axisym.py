import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from quermass._common import DomainError, PoleError, ResolutionError, sphere_area
from quermass.axisym import (
    AxisProfile,
    coarea_integral,
    convention_report,
    derivative_identity_residual,
    frequency_cutoff_theta0,
    gauss_theta,
    gegenbauer_legendre_coeffs,
    highest_term_integral,
    near_pole_probe,
    sigma_k_D2u_axisym,
    sigma_k_h_axisym,
    to_sphere_field,
    zonal_norm_sq,
)
from quermass.exactcomb import binom
from quermass.spheregeom import curvature_integral, sigma_k_h, volume_and_barycenter
from quermass.symfun import sigma_matrix


def cos_profile(a, j, n):
    return AxisProfile.from_cos_series([0.0] * j + [a], n)


def random_profiles(count, n, seed=0, amp=0.05, degree=5):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.standard_normal(degree + 1) / (1.0 + np.arange(degree + 1)) ** 2
        c *= amp / np.abs(c).sum()
        out.append(AxisProfile.from_cos_series(c, n))
    return out


# -------------------------------------------------------------- coarea


def test_coarea_examples():
    assert coarea_integral(lambda t: np.ones_like(t), 2) == pytest.approx(4 * np.pi, rel=1e-13)
    assert coarea_integral(lambda t: np.cos(t) ** 2, 2) == pytest.approx(4 * np.pi / 3, rel=1e-13)


@pytest.mark.parametrize("n", range(1, 12))
def test_coarea_sphere_area(n):
    want = 2 * np.pi ** ((n + 1) / 2) / gamma((n + 1) / 2)
    assert coarea_integral(lambda t: np.ones_like(t), n) == pytest.approx(want, rel=1e-12)
    assert sphere_area(n) == pytest.approx(want, rel=1e-13)


def test_coarea_unresolvable():
    with pytest.raises(ResolutionError):
        coarea_integral(lambda t: np.sign(np.cos(7.3 * t)), 3, max_level=2)


# ------------------------------------------------------- Gegenbauer basis


@pytest.mark.parametrize("n", [2, 3, 5, 9])
def test_zonal_harmonics_are_eigenfunctions(n):
    t, _ = gauss_theta(40)
    for ell in range(7):
        p = AxisProfile.zonal(ell, 1.0, n)
        lap = p.laplacian(t)
        assert np.abs(lap + ell * (ell + n - 1) * p.V(t)).max() < 1e-9 * max(1.0, np.abs(p.V(t)).max() * ell**2)


def test_zonal_norm():
    for n in (2, 5):
        for ell in range(5):
            p = AxisProfile.zonal(ell, 1.0, n)
            got = coarea_integral(lambda t: p.V(t) ** 2, n)
            assert got == pytest.approx(zonal_norm_sq(ell, n), rel=1e-10)


def test_gegenbauer_n2_is_legendre():
    for ell in range(6):
        e = np.zeros(ell + 1)
        e[ell] = 1.0
        assert np.allclose(gegenbauer_legendre_coeffs(ell, 2), e, atol=1e-13)


# -------------------------------------------------------------- profiles


def test_profile_constructors_agree():
    t = np.linspace(0.1, 3.0, 7)
    a = cos_profile(0.05, 3, 4)
    b = AxisProfile.from_expression("0.05*cos(3*theta)", 4)
    s = np.linspace(0, np.pi, 401)
    c = AxisProfile.from_samples(s, 0.05 * np.cos(3 * s), 4)
    for f in ("V", "dV", "d2V"):
        assert np.allclose(getattr(a, f)(t), getattr(b, f)(t), atol=1e-14)
        assert np.allclose(getattr(a, f)(t), getattr(c, f)(t), atol=1e-6)


def test_expression_errors_and_warnings():
    with pytest.raises(ValueError):
        AxisProfile.from_expression("cos(theta) + x", 3)
    with pytest.raises(ValueError):
        AxisProfile.from_expression("cos(", 3)
    with pytest.warns(RuntimeWarning):
        AxisProfile.from_expression("0.1*theta", 3)


def test_samples_must_cover_poles():
    s = np.linspace(0.1, np.pi, 20)
    with pytest.raises(ValueError):
        AxisProfile.from_samples(s, np.zeros_like(s), 3)


def test_pole_behaviour():
    p = cos_profile(0.05, 2, 3)
    # cot(theta) V' -> V''(0) at the pole
    assert p.cot_dV(0.0) == pytest.approx(float(p.d2V(0.0)), rel=1e-12)
    raw = AxisProfile.from_callables(p.V, p.dV, p.d2V, 3)
    with pytest.raises(PoleError):
        sigma_k_D2u_axisym(raw, 0.0, 1)
    with pytest.raises(DomainError):
        AxisProfile.constant(-1.2, 3).check_valid()


# ------------------------------------------------------------ sigma_k


@pytest.mark.parametrize("n", [2, 4, 7])
def test_sigma1_of_degree_one(n):
    p = AxisProfile.from_legendre([0.0, 1.0], n)  # V = cos theta
    t = np.linspace(0.05, 3.0, 11)
    for conv in ("intrinsic", "eq812"):
        assert np.allclose(sigma_k_D2u_axisym(p, t, 1, conv), -n * np.cos(t), atol=1e-13)


def test_sigma_of_constant_vanishes():
    p = AxisProfile.constant(0.2, 5)
    t = np.linspace(0.1, 3.0, 5)
    for k in range(1, 6):
        assert np.abs(sigma_k_D2u_axisym(p, t, k)).max() == 0.0


@pytest.mark.parametrize("n,k", [(3, 2), (5, 2), (5, 3), (6, 4)])
def test_intrinsic_matches_matrix(n, k):
    p = AxisProfile.from_legendre([0.0, 1.0], n)
    for t in np.linspace(0.1, 3.0, 9):
        H = np.diag(p.hessian_diag(t))
        assert sigma_k_D2u_axisym(p, t, k) == pytest.approx(sigma_matrix(H, k), abs=1e-12)
    rep = convention_report(random_profiles(1, n, seed=n)[0], k)
    assert rep["max_abs_intrinsic_vs_matrix"] < 1e-12


def test_printed_middle_term_differs_from_matrix():
    rep = convention_report(cos_profile(0.1, 2, 5), 2)
    assert rep["max_abs_eq812_vs_matrix"] > 1e-4


def test_sigma_h_examples():
    t = np.linspace(0.1, 3.0, 5)
    for n in (2, 5):
        for k in range(n + 1):
            assert np.allclose(sigma_k_h_axisym(AxisProfile.constant(0.0, n), t, k), float(binom(n, k)))
            assert np.allclose(sigma_k_h_axisym(AxisProfile.constant(0.2, n), t, k), float(binom(n, k)) / 1.2**k, rtol=1e-13)
    with pytest.raises(ValueError):
        sigma_k_D2u_axisym(AxisProfile.constant(0.0, 3), 1.0, 1, convention="ambient")


def test_cross_pipeline_pointwise():
    p = cos_profile(0.03, 2, 2)
    f = to_sphere_field(p, 16, resolution=(32, 64))
    j = f.grid_jets()
    t = f.grid.theta
    for k in (1, 2):
        grid = sigma_k_h(j, k)[:, 0]
        assert np.abs(grid - sigma_k_h_axisym(p, t, k)).max() <= 1e-6
    # |grad u| = |V'|, D^2u(grad u, grad u) = V'^2 V''
    g = np.linalg.norm(j.grad, axis=-1)[:, 3]
    assert np.abs(g - np.abs(p.dV(t))).max() <= 1e-6
    q = np.einsum("ti,tij,tj->t", j.grad[:, 3], j.hess[:, 3], j.grad[:, 3])
    assert np.abs(q - p.dV(t) ** 2 * p.d2V(t)).max() <= 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_cross_pipeline_integrals(seed):
    p = random_profiles(1, 2, seed=seed)[0]
    f = to_sphere_field(p, 20, resolution=(32, 64))
    for k in (1, 2):
        a = curvature_integral(p, k, tol=1e-11)
        b = curvature_integral(f, k, tol=1e-11)
        assert abs(a - b) / abs(a) <= 1e-7
    va, ba = volume_and_barycenter(p)
    vb, bb = volume_and_barycenter(f)
    assert va == pytest.approx(vb, rel=1e-10)
    # symmetry axis is x_0 for profiles and z for grid fields
    assert ba[0] == pytest.approx(bb[2], abs=1e-10)


@pytest.mark.parametrize("n", range(2, 10))
def test_ball_closed_forms(n):
    for R in (1.0, 1.3):
        b = AxisProfile.ball(R, n)
        for k in range(n + 1):
            want = math.comb(n, k) * R ** (n - k) * sphere_area(n)
            assert curvature_integral(b, k) == pytest.approx(want, rel=1e-9)


# ---------------------------------------------- axisymmetric formulas


def test_highest_term_examples():
    assert highest_term_integral(AxisProfile.constant(0.0, 5), 2) == (0.0, 0.0)
    d, b = highest_term_integral(AxisProfile.from_legendre([0.0, 0.05], 5), 2)
    assert abs(d - b) <= 1e-9
    d, b = highest_term_integral(cos_profile(0.05, 3, 6), 3)
    assert abs(d - b) <= 1e-9
    with pytest.raises(ValueError):
        highest_term_integral(AxisProfile.constant(0.0, 3), 3)


def test_highest_term_family():
    for i, p in enumerate(random_profiles(20, 6, seed=7, amp=0.3)):
        k = 1 + i % 5
        d, b = highest_term_integral(p, k)
        assert abs(d - b) <= 1e-9


def test_theta0():
    assert float(frequency_cutoff_theta0(0.01, 2)) == pytest.approx(0.1)
    assert float(frequency_cutoff_theta0(0.001, 3)) == pytest.approx(0.01)
    c = frequency_cutoff_theta0(0.3, 1)
    assert c.theta0 == 1.0 and c.degenerate
    with pytest.raises(ValueError):
        frequency_cutoff_theta0(0.0, 2)


def test_derivative_identity():
    grid = np.linspace(0, np.pi, 200)
    assert derivative_identity_residual(AxisProfile.constant(0.0, 5), 2, grid) == 0.0
    assert derivative_identity_residual(AxisProfile.from_legendre([0.0, 0.05], 5), 2, grid) <= 1e-8
    for n in (4, 7):
        for m in range(1, n):
            assert derivative_identity_residual(cos_profile(0.1, 2, n), m, grid) <= 1e-8


def test_binomial_sub_identity():
    for n in range(2, 15):
        for m in range(1, n):
            for j in range(1, m + 1):
                assert binom(n - 1, m - 1) / m * binom(m, m - j) * j == binom(n - j, m - j) * binom(n - 1, j - 1)


def test_near_pole_probe_runs():
    p = cos_profile(0.05, 2, 5)
    r = near_pole_probe(p, 2, [0.05, 0.1, 0.2])
    assert r.lhs.shape == r.rhs.shape == (3,)
    assert isinstance(r.holds_everywhere, bool)
    s = near_pole_probe(p, 2, [np.pi - 0.1], side="south")
    assert s.side == "south"
    with pytest.raises(ValueError):
        near_pole_probe(p, 2, [0.0])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 1.6), st.integers(2, 7))
def test_rescale_matches_ball_scaling(s, n):
    p = AxisProfile.constant(0.0, n).rescaled(s)
    assert curvature_integral(p, 1) == pytest.approx(n * s ** (n - 1) * sphere_area(n), rel=1e-10)


def test_translation_of_ball_moves_barycenter():
    p = AxisProfile.constant(0.0, 3).translated([0.05])
    vol, bar = volume_and_barycenter(p)
    assert bar[0] == pytest.approx(-0.05, abs=1e-10)
    with pytest.raises(ValueError):
        AxisProfile.constant(0.0, 3).translated([0.0, 0.1])
