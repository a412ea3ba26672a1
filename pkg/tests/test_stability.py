import math
import warnings

import numpy as np
import pytest

from quermass._common import NormalizationError, ball_volume, sphere_area
from quermass.axisym import AxisProfile, gegenbauer_legendre_coeffs
from quermass.counterexample import make_bump
from quermass.spheregeom import SphereField, curvature_integral, curvature_integrals, volume_and_barycenter
from quermass.stability import (
    THEOREMS,
    NormalizationNotice,
    c1_norm,
    deficit_compensated,
    deficit_sigma2plus,
    deficit_thm12,
    deficit_thm14,
    deficit_thm15,
    deficit_thm45,
    expansion_second_order,
    fit_exponent,
    hypothesis_predicates,
    normalization_residuals,
    normalize_to,
    random_axisym_family,
    run_theorem,
    sweep,
    thm12_pointwise,
)

pytestmark = pytest.mark.filterwarnings("ignore::quermass.stability.NormalizationNotice")

TS = [0.08, 0.04, 0.02, 0.01]


def geg(ell, amp, n):
    """amp * C_ell^{(n-1)/2}(cos theta)."""
    return AxisProfile.from_legendre(amp * gegenbauer_legendre_coeffs(ell, n), n)


# ------------------------------------------------------------ ball


@pytest.mark.parametrize("n", [2, 3, 5, 6])
def test_ball_neutral_for_every_theorem(n):
    b = AxisProfile.constant(0.0, n)
    for k in range(1, n + 1):
        reports = [deficit_compensated(b, k), deficit_thm15(b, k), deficit_thm45(b, k)]
        if k < n:
            reports.append(deficit_thm14(b, k, 1e-3))
        reports += [deficit_thm12(b, k, jp) for jp in range(0, k, 2)]
        for r in reports:
            assert abs(r.deficit) <= 1e-9, (r.theorem, k)
            assert not r.ratio_defined and not r.flags["ratio_defined"]
            assert r.to_dict()["ratio"] is None
    if n >= 2:
        assert abs(deficit_sigma2plus(b).deficit) <= 1e-9


@pytest.mark.parametrize("n", [2, 5])
def test_ball_scale_coupling(n):
    c = 0.1
    big = AxisProfile.ball(1 + c, n)
    for k in range(n + 1):
        assert curvature_integral(big, k) == pytest.approx(math.comb(n, k) * (1 + c) ** (n - k) * sphere_area(n), rel=1e-9)
    with pytest.warns(NormalizationNotice):
        r = deficit_compensated(big, 1)
    assert abs(r.deficit) <= 1e-9
    assert r.notes and "normalized automatically" in r.notes[0]
    assert abs(r.residuals["size"]) <= 1e-8


def test_grid_ball_neutral():
    b = SphereField.constant(0.0, resolution=(16, 32))
    for k in (1, 2):
        assert abs(deficit_compensated(b, k).deficit) <= 1e-9


# ---------------------------------------------------------- examples


def test_compensated_zonal_example():
    r = deficit_compensated(geg(3, 0.02, 5), 2)
    assert r.deficit > 0 and r.ratio > 0
    assert r.flags["in_theorem"]
    for s, p, q in zip(r.signed, r.positive, r.negative):
        assert abs(s - (p - q)) <= 1e-9
    assert r.compensated == pytest.approx(r.signed[2] + r.negative[1] + r.negative[2])


def test_compensated_out_of_theorem_grid():
    f = SphereField.from_modes({(2, 0): 0.03}, resolution=(32, 64))
    r = deficit_compensated(f, 1)
    assert r.deficit > 0
    assert not r.flags["in_theorem"]


def test_sigma2plus_examples():
    r = deficit_sigma2plus(geg(2, 0.005, 5))
    assert r.deficit > 0 and r.flags["laplacian_upper"]
    big = deficit_sigma2plus(geg(2, -0.06, 5))
    assert not big.flags["laplacian_upper"]
    assert big.margins["laplacian_max"] > 5
    tight = deficit_sigma2plus(geg(2, 0.005, 5), M=1e-6)
    assert not tight.flags["laplacian_lower"]
    with pytest.raises(ValueError):
        deficit_sigma2plus(AxisProfile.constant(0.0, 1))


def binom_closed(n, k, jp):
    first = math.comb(n - 1, jp) - 1  # sum_{m=1}^{j'} (-1)^m C_n^m for even j'
    second = (k - jp) * math.comb(n, k + 1) + math.comb(n - 1, k) - math.comb(n - 1, jp)
    return first, second


@pytest.mark.parametrize("n", [5, 6, 7, 9])
def test_thm12_ball_sums_match_binomial_forms(n):
    b = AxisProfile.constant(0.0, n)
    for k in range(2, n, 2):
        for jp in range(0, k, 2):
            p = thm12_pointwise(b, k, jp)
            first, second = binom_closed(n, k, jp)
            assert p["first_sum"].margin == pytest.approx(first, abs=1e-9)
            assert p["second_sum"].margin == pytest.approx(second, abs=1e-9)
            assert p["first_sum"].holds


def test_thm12_remark_case():
    for n in (5, 7, 9):
        r = deficit_thm12(AxisProfile.constant(0.0, n), n - 1, 0)
        assert r.flags["second_sum"] and r.flags["first_sum"]
        assert r.flags["in_theorem"]


def test_thm12_ball_can_violate_second_sum():
    # (n, k, j') = (5, 4, 2): (k-j') C_5^5 + C_4^4 - C_4^2 = -3
    p = thm12_pointwise(AxisProfile.constant(0.0, 5), 4, 2)
    assert not p["second_sum"].holds
    assert p["second_sum"].margin == pytest.approx(-3.0)


def test_thm12_perturbed():
    r = deficit_thm12(geg(3, 0.01, 5), 4, 2)
    assert abs(r.residuals["size"]) <= 1e-8
    assert r.jprime == 2
    assert set(r.margins) >= {"first_sum", "second_sum"}
    with pytest.raises(ValueError):
        deficit_thm12(geg(3, 0.01, 5), 4, 6)


def test_thm14_examples():
    r = deficit_thm14(geg(2, 0.005, 5), 1, 1e-3)
    assert r.margins["delta_margin"] >= -1e-6
    assert r.flags["above_minus_delta"]
    with pytest.raises(ValueError):
        deficit_thm14(geg(2, 0.005, 5), 1, 0.0)


def test_area_normalization_moves_volume_quadratically():
    ts = [t / 10 for t in TS]
    dv = []
    for t in ts:
        p = normalize_to(geg(2, t, 5), "quermass", 0)
        assert abs(curvature_integral(p, 0, tol=1e-12) / sphere_area(5) - 1) <= 1e-8
        dv.append(volume_and_barycenter(p)[0] - ball_volume(6))
    assert fit_exponent(ts, dv) == pytest.approx(2.0, abs=0.1)


def test_thm15_axisymmetry_flag():
    assert deficit_thm15(geg(2, 0.005, 5), 1).flags["in_theorem"]
    f = SphereField.from_modes({(2, 1): 0.02}, resolution=(24, 48))
    assert not deficit_thm15(f, 1).flags["axisymmetric"]
    g = SphereField.from_modes({(2, 0): 0.02}, resolution=(24, 48))
    assert deficit_thm15(g, 1).flags["axisymmetric"]


def test_thm45_flags():
    r = deficit_thm45(geg(2, 0.005, 5), 1)
    assert r.flags["in_theorem"]
    assert "hessian_1" in r.flags and "hessian_1" in r.margins


# --------------------------------------------------------- predicates


def test_ball_is_k_convex():
    p = hypothesis_predicates(AxisProfile.constant(0.0, 6), 6)
    assert p["k_convex"].holds
    for m in range(1, 7):
        assert p[f"convex_{m}"].margin == pytest.approx(math.comb(6, m))


def test_zero_field_hessian_condition_as_printed():
    p = hypothesis_predicates(AxisProfile.constant(0.0, 5), 4)
    for m in range(1, 5):
        assert p[f"hessian_{m}"].holds == (m % 2 == 1)
        assert p[f"hessian_{m}"].margin == pytest.approx((-1) ** (m + 1) * math.comb(5, m))


def test_dimple_breaks_convexity():
    p = hypothesis_predicates(make_bump(0.3, 8).profile(5), 2)
    assert not p["convex_1"].holds and not p["convex_2"].holds
    assert p["k_convex"].margin < 0


def test_predicate_domain():
    with pytest.raises(ValueError):
        hypothesis_predicates(AxisProfile.constant(0.0, 3), 0)


# ---------------------------------------------------------- expansion


def test_expansion_of_zero():
    for k in range(4):
        assert expansion_second_order(AxisProfile.constant(0.0, 5), k) == 0.0


@pytest.mark.parametrize("k", [1, 2])
def test_expansion_error_order(k):
    errs, routes = [], []
    base = math.comb(5, k) * sphere_area(5)
    for t in TS:
        p = normalize_to(AxisProfile.zonal(2, t, 5))
        exact = curvature_integral(p, k, tol=1e-12) - base
        errs.append(exact - expansion_second_order(p, k))
        routes.append(expansion_second_order(p, k) - expansion_second_order(p, k, route="curvature"))
    assert fit_exponent(TS, errs) >= 2.5
    assert fit_exponent(TS, routes) >= 2.5


def test_expansion_leading_term_closed_form():
    # zonal l=2 on S^5: the Hessian terms are cubic, the rest is t^2 * energy
    n, k, t = 5, 1, 1e-4
    p = AxisProfile.zonal(2, t, n)
    from quermass.harmonics import dirichlet_energy, l2_sq

    c = math.comb(n, k) * (n - k) * (k + 1)
    want = c / (2 * n) * dirichlet_energy(p) - c / 2 * l2_sq(p)
    got = expansion_second_order(p, k)
    assert got == pytest.approx(want, rel=1e-3)


def test_expansion_errors():
    p = AxisProfile.constant(0.0, 5)
    with pytest.raises(ValueError):
        expansion_second_order(p, 1, n=4)
    with pytest.raises(ValueError):
        expansion_second_order(p, 1, route="ambient")


# ------------------------------------------------------ normalization


def test_normalize_to_and_residuals():
    p = normalize_to(geg(3, 0.01, 5).rescaled(1.05))
    r = normalization_residuals(p)
    assert abs(r["size"]) <= 1e-8 and r["barycenter"] <= 1e-8
    assert normalize_to(p) is p
    with pytest.raises(ValueError):
        normalize_to(p, "mass")
    with pytest.raises(ValueError):
        normalize_to(p, "quermass", 5)
    with pytest.raises(NormalizationError):
        normalize_to(geg(3, 0.01, 5).rescaled(1.05), max_iter=1, tol=1e-15)


# ------------------------------------------------------------ family


def test_small_family_positive():
    fam = random_axisym_family(size=4, seed=3)
    for p in fam:
        assert c1_norm(p, 2) <= 0.02
        assert abs(normalization_residuals(p)["size"]) <= 1e-8
    reps = sweep(fam, lambda p: deficit_compensated(p, 2), workers=2)
    assert all(r.deficit >= -1e-9 and r.ratio > 0 for r in reps)
    serial = sweep(fam, lambda p: deficit_compensated(p, 2), workers=1)
    assert [r.deficit for r in reps] == [r.deficit for r in serial]


def test_run_theorem_dispatch():
    b = AxisProfile.constant(0.0, 5)
    for th in THEOREMS:
        assert run_theorem(th, b, k=2).theorem == th
    with pytest.raises(ValueError):
        run_theorem("9.1", b)
