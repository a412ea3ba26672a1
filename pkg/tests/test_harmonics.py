import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quermass.axisym import AxisProfile, coarea_integral, gauss_theta
from quermass.harmonics import (
    HarmonicSpectrum,
    analyze,
    default_lambda,
    dirichlet_energy,
    eigenvalue,
    frequency_split_probe,
    l2_sq,
    project_constraints,
    rayleigh,
    split,
    synthesize,
)
from quermass.spheregeom import SphereField, SphereGrid, random_field

RES = (24, 48)


def zonal_unit(ell, n):
    """Orthonormal zonal harmonic of degree ell as a profile."""
    c = np.zeros(ell + 1)
    c[ell] = 1.0
    return synthesize(HarmonicSpectrum(n, c, "zonal"))


def inner(f, g, n):
    return coarea_integral(lambda t: f.V(t) * g.V(t), n, tol=1e-13)


# -------------------------------------------------------------- analyze


def test_single_mode_spectrum():
    f = SphereField.from_modes({(2, 1): 0.7}, resolution=RES)
    c = analyze(f).coeffs
    assert c[2, 2 + 1] == 0.7
    assert np.count_nonzero(c) == 1


def test_constant_is_degree_zero():
    for n in (2, 5):
        s = analyze(AxisProfile.constant(1.0, n), lmax=6)
        assert abs(s.coeffs[0] - math.sqrt(coarea_integral(lambda t: np.ones_like(t), n))) < 1e-12
        assert np.abs(s.coeffs[1:]).max() < 1e-13


def test_parseval_grid():
    f = random_field(12, 0.2, seed=3, resolution=RES)
    s = analyze(f)
    g = SphereGrid.for_lmax(12, oversample=2)
    direct = float(np.sum(g.weights * f.values(g) ** 2))
    assert s.l2_sq() == pytest.approx(direct, rel=1e-9)
    assert l2_sq(f) == pytest.approx(direct, rel=1e-9)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_zonal_round_trip_and_parseval(n):
    p = AxisProfile.from_cos_series([0.02, -0.01, 0.03, 0.0, 0.005], n)
    s = analyze(p, lmax=8)
    back = synthesize(s)
    t = np.linspace(0, np.pi, 101)
    assert np.abs(back.V(t) - p.V(t)).max() < 1e-9
    assert s.l2_sq() == pytest.approx(l2_sq(p), rel=1e-9)
    assert s.dirichlet() == pytest.approx(dirichlet_energy(p), rel=1e-9)


def test_alias_warning():
    p = AxisProfile.from_expression("0.1*cos(theta)**9", 3)
    with pytest.warns(RuntimeWarning):
        analyze(p, lmax=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        analyze(p, lmax=12)


def test_analyze_rejects_other_types():
    with pytest.raises(TypeError):
        analyze(np.zeros(4))


def test_spectrum_validation():
    with pytest.raises(ValueError):
        HarmonicSpectrum(3, np.zeros((2, 3)), "full")
    with pytest.raises(ValueError):
        HarmonicSpectrum(3, np.zeros(3), "sectoral")


# ------------------------------------------------------------- Rayleigh


@pytest.mark.parametrize("n", [2, 5, 6, 9])
def test_eigenvalue_law(n):
    for ell in range(1, 11):
        assert rayleigh(zonal_unit(ell, n)) == pytest.approx(ell * (ell + n - 1), rel=1e-8)
    assert rayleigh(zonal_unit(2, n)) == pytest.approx(2 * (n + 1), rel=1e-8)


def test_eigenvalue_law_on_grid():
    for ell in range(1, 11):
        f = SphereField.from_modes({(ell, ell // 2): 1.0}, resolution=(32, 64))
        assert rayleigh(f) == pytest.approx(ell * (ell + 1), rel=1e-8)


def test_rayleigh_mixture():
    n, c1, c3 = 5, 0.3, 0.7
    s = HarmonicSpectrum(n, np.array([0.0, c1, 0.0, c3]), "zonal")
    want = (c1**2 * n + c3**2 * 3 * (3 + n - 1)) / (c1**2 + c3**2)
    assert rayleigh(synthesize(s)) == pytest.approx(want, rel=1e-9)
    assert s.rayleigh() == pytest.approx(want, rel=1e-12)


def test_rayleigh_zero_field():
    with pytest.raises(ValueError):
        rayleigh(AxisProfile.constant(0.0, 3))


# ---------------------------------------------------------------- split


def test_split_examples():
    n = 4
    s = HarmonicSpectrum(n, np.ones(6), "zonal")
    low, high = split(s, n + 0.5)
    assert list(np.nonzero(low.coeffs)[0]) == [0, 1]
    assert np.array_equal((low + high).coeffs, s.coeffs)
    y5 = HarmonicSpectrum(n, np.eye(6)[5], "zonal")
    low, high = split(y5, eigenvalue(5, n) - 1)
    assert not low.coeffs.any() and np.array_equal(high.coeffs, y5.coeffs)
    with pytest.raises(ValueError):
        split(s, 0.0)
    assert default_lambda(5) == 13.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.5, 60.0))
def test_split_orthogonal_and_energies_add(seed, lam):
    f = random_field(8, 0.3, seed=seed, resolution=RES)
    low, high = split(analyze(f), lam)
    u1, u2 = synthesize(low, resolution=RES), synthesize(high, resolution=RES)
    g = SphereGrid.for_lmax(16)
    cross = float(np.sum(g.weights * u1.values(g) * u2.values(g)))
    assert abs(cross) <= 1e-10 * max(1.0, l2_sq(f))
    assert dirichlet_energy(f) == pytest.approx(dirichlet_energy(u1) + dirichlet_energy(u2), rel=1e-9, abs=1e-15)


def test_split_orthogonal_zonal():
    n = 6
    p = AxisProfile.from_cos_series([0.01, 0.02, -0.03, 0.01, 0.02], n)
    low, high = split(analyze(p, lmax=6))
    assert abs(inner(synthesize(low), synthesize(high), n)) <= 1e-10


# ---------------------------------------------------------- constraints


def test_project_examples():
    f = SphereField.from_modes({(0, 0): 1.0, (1, 1): 1.0, (2, 0): 1.0}, resolution=RES)
    p = project_constraints(f)
    assert np.array_equal(p.coeffs, SphereField.from_modes({(2, 0): 1.0}, resolution=RES).coeffs)
    assert np.array_equal(project_constraints(p).coeffs, p.coeffs)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_project_profile(n):
    p = AxisProfile.from_cos_series([0.3, -0.2, 0.05, 0.01], n)
    q = project_constraints(p)
    s = analyze(q, lmax=6)
    assert np.abs(s.coeffs[:2]).max() < 1e-12
    assert rayleigh(q) >= 2 * (n + 1) - 1e-9
    r = project_constraints(q)
    t = np.linspace(0, np.pi, 51)
    assert np.abs(r.V(t) - q.V(t)).max() < 1e-13


def test_project_spline_profile():
    t = np.linspace(0, np.pi, 301)
    p = AxisProfile.from_samples(t, 0.1 + 0.05 * np.cos(t) + 0.02 * np.cos(2 * t), 4)
    q = project_constraints(p)
    s = analyze(q, lmax=6)
    assert np.abs(s.coeffs[:2]).max() < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(2.01, 40.0))
def test_project_commutes_with_split(seed, lam):
    s = analyze(random_field(6, 0.2, seed=seed, resolution=RES))
    a = [project_constraints(x).coeffs for x in split(s, lam)]
    b = [x.coeffs for x in split(project_constraints(s), lam)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projected_rayleigh_bound(seed):
    f = project_constraints(random_field(8, 0.3, seed=seed, resolution=RES))
    assert rayleigh(f) >= 2 * 3 - 1e-9


# --------------------------------------------------------------- probe


def test_frequency_probe_is_diagnostic():
    p = AxisProfile.from_cos_series([0.0, 0.0, 0.03, 0.01], 5)
    r = frequency_split_probe(p)
    assert math.isfinite(r.lhs) and math.isfinite(r.rhs)
    assert r.lam == default_lambda(5)
    assert r.margin == r.lhs - r.rhs
    f = random_field(6, 0.05, seed=1, resolution=RES)
    assert math.isfinite(frequency_split_probe(f, lam=7.0).margin)
