"""Spherical-harmonic spectra, frequency splitting and Poincare ratios.

On S^2 spectra carry every order m; for any n an axially symmetric field has
a zonal spectrum in the normalized Gegenbauer basis
Z_l = C_l^{(n-1)/2}(cos theta) / ||C_l^{(n-1)/2}||, so that in both cases the
coefficients are orthonormal and sum(c^2) = int u^2 dA.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .axisym import AxisProfile, gauss_theta, gegenbauer_legendre_coeffs, zonal_norm_sq
from .spheregeom import SphereField
from ._common import sphere_area

ALIAS_FRACTION = 1e-6


def eigenvalue(ell, n: int):
    """Eigenvalue of -Delta on S^n for degree ell."""
    return ell * (ell + n - 1)


def default_lambda(n: int) -> float:
    """Smallest split threshold that separates l <= 2 from l >= 3."""
    return 2 * (n + 1) + 1.0


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Orthonormal coefficients; ``coeffs`` is (L+1, 2L+1) for kind 'full', (L+1,) for 'zonal'."""

    n: int
    coeffs: np.ndarray
    kind: str

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if self.kind == "full":
            if self.n != 2 or c.ndim != 2:
                raise ValueError("full spectra exist only for n=2 as (L+1, 2L+1) arrays")
        elif self.kind == "zonal":
            if c.ndim != 1:
                raise ValueError("zonal spectra are 1-D")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def lmax(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(self.lmax + 1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return eigenvalue(self.degrees, self.n)

    def degree_energy(self) -> np.ndarray:
        c = self.coeffs
        return np.sum(c**2, axis=1) if self.kind == "full" else c**2

    def l2_sq(self) -> float:
        return float(self.degree_energy().sum())

    def dirichlet(self) -> float:
        return float(self.eigenvalues @ self.degree_energy())

    def rayleigh(self) -> float:
        e = self.l2_sq()
        if e == 0:
            raise ValueError("Rayleigh quotient of the zero field")
        return self.dirichlet() / e

    def masked(self, keep: np.ndarray) -> "HarmonicSpectrum":
        """Keep the degrees where ``keep`` is True."""
        c = np.array(self.coeffs)
        c[~np.asarray(keep, dtype=bool)] = 0.0
        return HarmonicSpectrum(self.n, c, self.kind)

    def __add__(self, other: "HarmonicSpectrum") -> "HarmonicSpectrum":
        if (other.n, other.kind, other.coeffs.shape) != (self.n, self.kind, self.coeffs.shape):
            raise ValueError("incompatible spectra")
        return HarmonicSpectrum(self.n, self.coeffs + other.coeffs, self.kind)

    def field(self, **kw):
        return synthesize(self, **kw)

    def table(self) -> list[dict]:
        """Per-degree rows: l, eigenvalue, energy, energy fraction."""
        e = self.degree_energy()
        tot = e.sum()
        return [
            {"l": int(l), "eigenvalue": float(lam), "energy": float(x), "fraction": float(x / tot) if tot else 0.0}
            for l, lam, x in zip(self.degrees, self.eigenvalues, e)
        ]


def _zonal_basis_legendre(ell: int, n: int) -> np.ndarray:
    return gegenbauer_legendre_coeffs(ell, n) / math.sqrt(zonal_norm_sq(ell, n))


def _warn_alias(energy: np.ndarray) -> None:
    total = energy.sum()
    if total > 0 and energy[-1] > ALIAS_FRACTION * total:
        warnings.warn(
            f"energy at l_max is {energy[-1] / total:.2e} of total; spectrum may be aliased",
            RuntimeWarning,
        )


def _zonal_coeffs(profile: AxisProfile, lmax: int, nodes: int) -> np.ndarray:
    n = profile.n
    t, w = gauss_theta(nodes)
    w = w * sphere_area(n - 1) * np.sin(t) ** (n - 1)
    wv = w * profile.V(t)
    x = np.cos(t)
    return np.array([np.sum(wv * np.polynomial.legendre.legval(x, _zonal_basis_legendre(l, n))) for l in range(lmax + 1)])


def analyze(field, lmax: int = 32, nodes: int = 256) -> HarmonicSpectrum:
    """Forward transform of a SphereField (full) or AxisProfile (zonal).

    A SphereField already stores its coefficients, so its spectrum is exact
    (sampled input was checked for a tail when it was projected).  Zonal
    projections warn when degree ``lmax`` carries more than 1e-6 of the energy.
    """
    if isinstance(field, SphereField):
        return HarmonicSpectrum(2, field.coeffs, "full")
    if not isinstance(field, AxisProfile):
        raise TypeError(f"cannot analyze {type(field).__name__}")
    spec = HarmonicSpectrum(field.n, _zonal_coeffs(field, lmax, nodes), "zonal")
    if spec.lmax > 0:
        _warn_alias(spec.degree_energy())
    return spec


def synthesize(spectrum: HarmonicSpectrum, **kw):
    """Inverse transform: SphereField for full spectra, AxisProfile for zonal ones."""
    if spectrum.kind == "full":
        return SphereField(spectrum.coeffs, **kw)
    n = spectrum.n
    leg = np.zeros(spectrum.lmax + 1)
    for l, c in enumerate(spectrum.coeffs):
        if c:
            leg[: l + 1] += c * _zonal_basis_legendre(l, n)
    return AxisProfile.from_legendre(leg, n, label="synthesized", **kw)


def split(spectrum: HarmonicSpectrum, lam: float | None = None) -> tuple[HarmonicSpectrum, HarmonicSpectrum]:
    """u1 = eigenvalues <= lam, u2 = the rest (default lam = 2(n+1)+1)."""
    lam = default_lambda(spectrum.n) if lam is None else lam
    if lam <= 0:
        raise ValueError("lambda must be positive")
    low = spectrum.eigenvalues <= lam
    return spectrum.masked(low), spectrum.masked(~low)


def project_constraints(field):
    """Remove the l = 0 and l = 1 components (mean and first eigenspace)."""
    if isinstance(field, HarmonicSpectrum):
        return field.masked(field.degrees >= 2)
    if isinstance(field, SphereField):
        c = np.array(field.coeffs)
        c[:2] = 0.0
        return SphereField(c, resolution=field.resolution)
    if isinstance(field, AxisProfile):
        n = field.n
        low = _zonal_coeffs(field, 1, 256)
        leg = np.zeros(2)
        for l in (0, 1):
            leg[: l + 1] += low[l] * _zonal_basis_legendre(l, n)
        if field.legendre is not None:
            c = np.zeros(max(2, field.legendre.size))
            c[: field.legendre.size] = field.legendre
            c[:2] -= leg
            return AxisProfile.from_legendre(c, n, label=f"proj({field.label})", quad_nodes=field.quad_nodes)
        P = np.polynomial.legendre.Legendre(leg)
        dP = P.deriv()
        return AxisProfile(
            lambda t: field.V(t) - P(np.cos(t)),
            lambda t: field.dV(t) + np.sin(t) * dP(np.cos(t)),
            lambda t: field.d2V(t) + np.cos(t) * dP(np.cos(t)),
            n,
            cot_dV=lambda t: field.cot_dV(t) + np.cos(t) * dP(np.cos(t)),
            pole_limit=field.pole_limit,
            label=f"proj({field.label})",
            quad_nodes=field.quad_nodes,
        )
    raise TypeError(f"cannot project {type(field).__name__}")


# ------------------------------------------------------------ quadrature


def _quadrature_jets(field, level: int = 0):
    jets, w, _ = field.quadrature(level)
    return jets, w


def l2_sq(field, level: int = 1) -> float:
    """int u^2 dA by quadrature."""
    if isinstance(field, HarmonicSpectrum):
        return field.l2_sq()
    u, w, _ = field.quadrature_values(level)
    return float(np.sum(w * u**2))


def dirichlet_energy(field, level: int = 1) -> float:
    """int |grad u|^2 dA by quadrature."""
    if isinstance(field, HarmonicSpectrum):
        return field.dirichlet()
    jets, w = _quadrature_jets(field, level)
    return float(np.sum(w * np.einsum("...i,...i->...", jets.grad, jets.grad)))


def rayleigh(field, level: int = 1) -> float:
    """int |grad u|^2 / int u^2, by quadrature for fields and exactly for spectra."""
    if isinstance(field, HarmonicSpectrum):
        return field.rayleigh()
    den = l2_sq(field, level)
    if den <= 0:
        raise ValueError("Rayleigh quotient of the zero field")
    return dirichlet_energy(field, level) / den


# ------------------------------------------------------- frequency probe


@dataclass(frozen=True)
class FrequencyProbe:
    """Both sides of the low/high frequency inequality with omega set to 0."""

    lhs: float
    rhs: float
    lam: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def _partial(g: Callable, a, b, which: int, h: float = 1e-6):
    if which == 0:
        return (g(a + h, b) - g(a - h, b)) / (2 * h)
    return (g(a, b + h) - g(a, b - h)) / (2 * h)


def frequency_split_probe(field, lam: float | None = None, f: Callable | None = None, g: Callable | None = None, level: int = 1) -> FrequencyProbe:
    """Diagnostic only: int f grad^2u[grad u, grad u]  vs  -1/2 int div(g grad u) |grad u_2|^2.

    f and g take (u, |grad u|^2); both default to 1.  Never asserted.
    """
    one = lambda a, b: np.ones_like(a)  # noqa: E731
    f = one if f is None else f
    g = one if g is None else g
    spec = analyze(field)
    _, high = split(spec, lam)
    u2 = synthesize(high, **({"resolution": field.resolution} if isinstance(field, SphereField) else {}))
    if isinstance(field, AxisProfile):
        u2 = u2.with_nodes(field.quad_nodes)
    jets, w = _quadrature_jets(field, level)
    jets2, _ = _quadrature_jets(u2, level)
    u, grad, H = jets.u, jets.grad, jets.hess
    p = np.einsum("...i,...i->...", grad, grad)
    hgg = np.einsum("...i,...ij,...j->...", grad, H, grad)
    lap = np.trace(H, axis1=-2, axis2=-1)
    div = g(u, p) * lap + _partial(g, u, p, 0) * p + 2 * _partial(g, u, p, 1) * hgg
    p2 = np.einsum("...i,...i->...", jets2.grad, jets2.grad)
    lhs = float(np.sum(w * f(u, p) * hgg))
    rhs = float(-0.5 * np.sum(w * div * p2))
    return FrequencyProbe(lhs, rhs, default_lambda(spec.n) if lam is None else lam)
