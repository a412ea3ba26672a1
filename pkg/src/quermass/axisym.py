"""Axially symmetric radial graphs in any dimension.

For u depending only on the colatitude theta from the e_1 axis, write
V(theta) = u(cos theta, sin theta, 0, ..., 0).  In the orthonormal frame
(e_theta, e_2, ..., e_n) the covariant Hessian on S^n is

    diag(V'', cot(theta) V', ..., cot(theta) V')

and integrals over S^n reduce to |S^{n-1}| * int_0^pi f(theta) sin^{n-1} theta.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy.interpolate import make_interp_spline
from scipy.special import comb, eval_gegenbauer, gamma

from ._common import DomainError, NormalizationError, PoleError, sphere_area
from .spheregeom import PointJet, _refine, area_element, sigma_k_h
from .symfun import sigmas_matrix

DEFAULT_NODES = 128
_POLE_EPS = 1e-12


def _binom(n: int, k: int) -> int:
    return int(comb(n, k, exact=True)) if 0 <= k <= n else 0


# ------------------------------------------------------------ quadrature


def gauss_theta(n_nodes: int, a: float = 0.0, b: float = math.pi) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = npleg.leggauss(n_nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float = 0.0,
    b: float = math.pi,
    tol: float = 1e-12,
    nodes: int = 64,
    max_level: int = 6,
    breakpoints=(),
    floor: float = 1.0,
    atol: float = 0.0,
) -> float:
    """Gauss-Legendre on each piece of [a, b], doubling until stable.

    Converged when successive values differ by at most
    max(atol, tol * max(floor, |value|)).
    """
    cuts = [a] + sorted(p for p in breakpoints if a < p < b) + [b]

    def fn(level):
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            t, w = gauss_theta(nodes << level, lo, hi)
            total += float(np.sum(w * f(t)))
        return np.array([total])

    return float(_refine(fn, tol, max_level, floor=floor, atol=atol)[0][0])


def coarea_integral(f: Callable[[np.ndarray], np.ndarray], n: int, tol: float = 1e-10, **kw) -> float:
    """int_{S^n} f(theta) dA for a zonal integrand f."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return sphere_area(n - 1) * integrate_1d(lambda t: f(t) * np.sin(t) ** (n - 1), tol=tol, **kw)


# -------------------------------------------------------------- Gegenbauer


def gegenbauer_alpha(n: int) -> float:
    if n < 2:
        raise ValueError("zonal harmonics need n >= 2")
    return (n - 1) / 2


def gegenbauer_legendre_coeffs(ell: int, n: int) -> np.ndarray:
    """C_ell^{(n-1)/2}(x) expanded in Legendre polynomials P_0..P_ell."""
    if ell < 0:
        raise ValueError("degree must be >= 0")
    alpha = gegenbauer_alpha(n)
    x, w = npleg.leggauss(ell + 1)  # exact for the degree-2l products below
    vals = eval_gegenbauer(ell, alpha, x)
    vand = npleg.legvander(x, ell)
    return (vand * (w * vals)[:, None]).sum(axis=0) * (2 * np.arange(ell + 1) + 1) / 2


def zonal_norm_sq(ell: int, n: int) -> float:
    """int_{S^n} C_ell^{(n-1)/2}(cos theta)^2 dA."""
    a = gegenbauer_alpha(n)
    one_d = math.pi * 2.0 ** (1 - 2 * a) * gamma(ell + 2 * a) / (math.factorial(ell) * (ell + a) * gamma(a) ** 2)
    return sphere_area(n - 1) * one_d


# ----------------------------------------------------------------- profile


class AxisProfile:
    """V(theta) with first and second derivatives, for the sphere S^n.

    ``cot_dV`` is cot(theta) V'(theta); profiles that know V'' at the poles
    extend it continuously there (limit V''(0), V''(pi)).
    """

    def __init__(
        self,
        V: Callable,
        dV: Callable,
        d2V: Callable,
        n: int,
        *,
        cot_dV: Callable | None = None,
        pole_limit: bool = True,
        label: str = "profile",
        quad_nodes: int = DEFAULT_NODES,
        legendre: np.ndarray | None = None,
    ):
        if n < 1:
            raise ValueError("n must be >= 1")
        self._V, self._dV, self._d2V = V, dV, d2V
        self._cot_dV = cot_dV
        self.n = int(n)
        self.pole_limit = pole_limit
        self.label = label
        self.quad_nodes = int(quad_nodes)
        self.legendre = None if legendre is None else np.asarray(legendre, dtype=float)

    def __repr__(self) -> str:
        return f"AxisProfile({self.label!r}, n={self.n})"

    # constructors

    @classmethod
    def from_legendre(cls, coeffs, n: int, label: str | None = None, **kw) -> "AxisProfile":
        """V(theta) = sum_l c_l P_l(cos theta)."""
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        P = npleg.Legendre(c)
        dP, d2P = P.deriv(1), P.deriv(2)

        def V(t):
            return P(np.cos(t))

        def dV(t):
            return -np.sin(t) * dP(np.cos(t))

        def d2V(t):
            x = np.cos(t)
            return np.sin(t) ** 2 * d2P(x) - x * dP(x)

        def cot_dV(t):
            return -np.cos(t) * dP(np.cos(t))

        return cls(V, dV, d2V, n, cot_dV=cot_dV, label=label or f"legendre[{len(c) - 1}]", legendre=c, **kw)

    @classmethod
    def constant(cls, c: float, n: int, **kw) -> "AxisProfile":
        return cls.from_legendre([c], n, label=f"const({c:g})", **kw)

    @classmethod
    def ball(cls, radius: float, n: int, **kw) -> "AxisProfile":
        return cls.from_legendre([radius - 1.0], n, label=f"ball({radius:g})", **kw)

    @classmethod
    def zonal(cls, ell: int, amp: float, n: int, **kw) -> "AxisProfile":
        """amp * C_ell^{(n-1)/2}(cos theta), the degree-ell zonal harmonic (Legendre for n=2)."""
        return cls.from_legendre(amp * gegenbauer_legendre_coeffs(ell, n), n, label=f"zonal({ell},{amp:g})", **kw)

    @classmethod
    def from_cos_series(cls, coeffs, n: int, **kw) -> "AxisProfile":
        """V(theta) = sum_j a_j cos(j theta), converted to a polynomial in cos theta."""
        a = np.asarray(coeffs, dtype=float)
        power = np.zeros(1)
        for j, aj in enumerate(a):
            power = nppoly.polyadd(power, aj * _chebyshev_power(j))
        return cls.from_legendre(npleg.poly2leg(power), n, label=kw.pop("label", "cos-series"), **kw)

    @classmethod
    def from_expression(cls, expr: str, n: int, **kw) -> "AxisProfile":
        """Profile from an expression in ``theta`` (alias ``t``), e.g. '0.05*cos(3*theta)'."""
        import sympy as sp

        theta = sp.Symbol("theta", real=True)
        try:
            e = sp.sympify(expr, locals={"theta": theta, "t": theta, "pi": sp.pi})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ValueError(f"cannot parse profile expression {expr!r}") from exc
        if e.free_symbols - {theta}:
            raise ValueError(f"expression may only depend on theta, got {e.free_symbols}")
        d1, d2 = sp.diff(e, theta), sp.diff(e, theta, 2)
        fs = [sp.lambdify(theta, x, "numpy") for x in (e, d1, d2)]

        def wrap(g):
            return lambda t: np.asarray(g(t), dtype=float) * np.ones_like(np.asarray(t, dtype=float))

        V, dV, d2V = (wrap(g) for g in fs)
        for pole in (0.0, math.pi):
            if abs(float(dV(np.array(pole)))) > 1e-10:
                warnings.warn(f"V'({pole:g}) != 0: profile is not smooth at the pole", RuntimeWarning)
        return cls(V, dV, d2V, n, label=kw.pop("label", expr), **kw)

    @classmethod
    def from_samples(cls, theta, values, n: int, **kw) -> "AxisProfile":
        """Quintic interpolating spline through samples on [0, pi].

        Odd derivatives are pinned to zero at both poles, as for any smooth
        axially symmetric function.
        """
        t = np.asarray(theta, dtype=float)
        v = np.asarray(values, dtype=float)
        order = np.argsort(t)
        t, v = t[order], v[order]
        if t[0] < -1e-12 or t[-1] > math.pi + 1e-12 or len(t) < 6:
            raise ValueError("need at least 6 samples with theta in [0, pi]")
        bc = [(1, 0.0), (3, 0.0)]
        if t[0] > 1e-12 or t[-1] < math.pi - 1e-12:
            raise ValueError("samples must include both poles theta=0 and theta=pi")
        spl = make_interp_spline(t, v, k=5, bc_type=(bc, bc))
        d1, d2 = spl.derivative(1), spl.derivative(2)
        return cls(spl, d1, d2, n, label=kw.pop("label", "spline"), **kw)

    @classmethod
    def from_callables(cls, V, dV, d2V, n: int, **kw) -> "AxisProfile":
        """Profile from user callables; no pole limit is assumed."""
        kw.setdefault("pole_limit", False)
        return cls(V, dV, d2V, n, **kw)

    def with_n(self, n: int) -> "AxisProfile":
        return AxisProfile(
            self._V, self._dV, self._d2V, n, cot_dV=self._cot_dV, pole_limit=self.pole_limit,
            label=self.label, quad_nodes=self.quad_nodes, legendre=self.legendre,
        )

    def with_nodes(self, quad_nodes: int) -> "AxisProfile":
        p = self.with_n(self.n)
        p.quad_nodes = int(quad_nodes)
        return p

    # evaluation

    def V(self, t):
        return self._V(np.asarray(t, dtype=float))

    def dV(self, t):
        return self._dV(np.asarray(t, dtype=float))

    def d2V(self, t):
        return self._d2V(np.asarray(t, dtype=float))

    def cot_dV(self, t):
        """cot(theta) V'(theta), continuous at the poles when a limit is known."""
        t = np.asarray(t, dtype=float)
        s = np.sin(t)
        at_pole = np.abs(s) < _POLE_EPS
        if np.any(at_pole) and not self.pole_limit:
            raise PoleError("cot(theta) V'(theta) at a pole requires a supplied limit")
        if self._cot_dV is not None:
            return self._cot_dV(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.cos(t) * self.dV(t) / s
        if np.any(at_pole):
            out = np.where(at_pole, self.d2V(t), out)
        return out

    def laplacian(self, t):
        """Delta u = V'' + (n-1) cot(theta) V'."""
        return self.d2V(t) + (self.n - 1) * self.cot_dV(t)

    def hessian_diag(self, t) -> np.ndarray:
        """Diagonal of the covariant Hessian, shape (..., n)."""
        t = np.asarray(t, dtype=float)
        c = self.cot_dV(t)
        return np.concatenate([self.d2V(t)[..., None], np.repeat(c[..., None], self.n - 1, axis=-1)], axis=-1)

    def jets(self, t) -> PointJet:
        t = np.asarray(t, dtype=float)
        g = np.zeros(t.shape + (self.n,))
        g[..., 0] = self.dV(t)
        d = self.hessian_diag(t)
        H = np.zeros(t.shape + (self.n, self.n))
        idx = np.arange(self.n)
        H[..., idx, idx] = d
        return PointJet(self.V(t), g, H)

    # domain protocol

    def _nodes(self, level: int):
        t, w = gauss_theta(self.quad_nodes << level)
        w = w * sphere_area(self.n - 1) * np.sin(t) ** (self.n - 1)
        x = np.zeros((t.size, self.n + 1))
        x[:, 0] = np.cos(t)  # fibre average of the unit normal
        return t, w, x

    def quadrature(self, level: int = 0):
        t, w, x = self._nodes(level)
        return self.jets(t), w, x

    def quadrature_values(self, level: int = 0):
        t, w, x = self._nodes(level)
        return self.V(t), w, x

    def rescaled(self, s: float) -> "AxisProfile":
        if self.legendre is not None:
            c = s * self.legendre
            c[0] += s - 1.0
            return AxisProfile.from_legendre(c, self.n, label=self.label, quad_nodes=self.quad_nodes)
        V, dV, d2V = self._V, self._dV, self._d2V
        cot = self._cot_dV
        return AxisProfile(
            lambda t: s * (1.0 + V(t)) - 1.0,
            lambda t: s * dV(t),
            lambda t: s * d2V(t),
            self.n,
            cot_dV=None if cot is None else (lambda t: s * cot(t)),
            pole_limit=self.pole_limit,
            label=f"{s:.6g}*({self.label})",
            quad_nodes=self.quad_nodes,
        )

    def translated(self, b, degree: int = 64, tol: float = 1e-15, max_iter: int = 200) -> "AxisProfile":
        """Profile of Omega - b for b on the symmetry axis, as a Legendre series."""
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size > 1 and np.linalg.norm(b[1:]) > 1e-9 * max(1.0, abs(b[0])):
            raise ValueError("translation must be along the symmetry axis")
        b1 = float(b[0])
        x, w = npleg.leggauss(degree + 1)
        st = np.sqrt(1.0 - x**2)
        rho = 1.0 + self.V(np.arccos(x)) - b1 * x
        for _ in range(max_iter):
            p1, p2 = rho * x + b1, rho * st
            r = np.hypot(p1, p2)
            step = 1.0 + self.V(np.arctan2(p2, p1)) - r
            rho = rho + step
            if np.max(np.abs(step)) <= tol:
                break
        else:
            raise NormalizationError("re-graphing after translation did not converge")
        if np.any(rho <= 0):
            raise DomainError("translated domain is not star-shaped about the new origin")
        vand = npleg.legvander(x, degree)
        c = (vand * (w * (rho - 1.0))[:, None]).sum(axis=0) * (2 * np.arange(degree + 1) + 1) / 2
        return AxisProfile.from_legendre(c, self.n, label=f"shift({self.label})", quad_nodes=self.quad_nodes)

    def check_valid(self, n_check: int = 2001) -> None:
        t = np.linspace(0.0, math.pi, n_check)
        if np.any(1.0 + self.V(t) <= 0):
            raise DomainError("1 + V <= 0: not a radial graph")


def _chebyshev_power(j: int) -> np.ndarray:
    """cos(j theta) = T_j(cos theta) as ascending power coefficients."""
    c = np.zeros(j + 1)
    c[j] = 1.0
    return np.polynomial.chebyshev.cheb2poly(c)


# ------------------------------------------------------------- sigma_k


def _check_theta(profile: AxisProfile, theta) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    if np.any((t < 0) | (t > math.pi)):
        raise ValueError("theta outside [0, pi]")
    if not profile.pole_limit and np.any(np.abs(np.sin(t)) < _POLE_EPS):
        raise PoleError("evaluation at a pole without a cot(theta) V' limit")
    return t


def sigma_k_D2u_axisym(profile: AxisProfile, theta, k: int, convention: str = "intrinsic"):
    """sigma_k of the Hessian of u.

    ``intrinsic``: sigma_k(diag(V'', c, ..., c)) with c = cot(theta) V',
    i.e. C(n-1, k-1) V'' c^(k-1) + C(n-1, k) c^k.
    ``eq812``: the same two terms plus C(n-1, k-2) cot^(k-2)(theta) V'^k.
    """
    n = profile.n
    if not 1 <= k <= n:
        raise ValueError(f"order k={k} outside [1, {n}]")
    t = _check_theta(profile, theta)
    c = profile.cot_dV(t)
    a = profile.d2V(t)
    out = _binom(n - 1, k - 1) * a * c ** (k - 1) + _binom(n - 1, k) * c**k
    if convention == "eq812":
        if k >= 2:
            v = profile.dV(t)
            # cot^(k-2) V'^k = (cot V')^(k-2) V'^2, finite at the poles
            out = out + _binom(n - 1, k - 2) * c ** (k - 2) * v**2
    elif convention != "intrinsic":
        raise ValueError(f"unknown convention {convention!r}")
    return float(out) if np.ndim(out) == 0 else out


def sigma_k_h_axisym(profile: AxisProfile, theta, k: int):
    """Pointwise sigma_k(h) of the axially symmetric radial graph."""
    t = _check_theta(profile, theta)
    return sigma_k_h(profile.jets(t), k, profile.n)


def convention_report(profile: AxisProfile, k: int, n_theta: int = 64) -> dict:
    """Compare both Hessian conventions against the explicit diagonal matrix."""
    t, _ = gauss_theta(n_theta)
    diag = profile.hessian_diag(t)
    idx = np.arange(profile.n)
    H = np.zeros(t.shape + (profile.n, profile.n))
    H[..., idx, idx] = diag
    matrix = sigmas_matrix(H, k)[k]
    intrinsic = sigma_k_D2u_axisym(profile, t, k, "intrinsic")
    printed = sigma_k_D2u_axisym(profile, t, k, "eq812")
    return {
        "k": k,
        "n": profile.n,
        "max_abs_intrinsic_vs_matrix": float(np.max(np.abs(intrinsic - matrix))),
        "max_abs_eq812_vs_matrix": float(np.max(np.abs(printed - matrix))),
    }


# ------------------------------------------------ axisymmetric identities


def highest_term_integral(profile: AxisProfile, k: int, tol: float = 1e-13) -> tuple[float, float]:
    """The top-order term two ways: directly and after integrating by parts.

    direct   = (-1)^(k+1) / k * C(n-1, k-1) int V'^(k+1) V'' w
    by_parts = (-1)^k / (k (k+2)) * C(n-1, k-1) int V'^(k+2) w'
    with w = cos^(k-1) sin^(n-k).
    """
    n = profile.n
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    c = _binom(n - 1, k - 1)

    def w(t):
        return np.cos(t) ** (k - 1) * np.sin(t) ** (n - k)

    def dw(t):
        out = (n - k) * np.cos(t) ** k * np.sin(t) ** (n - k - 1)
        if k > 1:
            out = out - (k - 1) * np.cos(t) ** (k - 2) * np.sin(t) ** (n - k + 1)
        return out

    direct = integrate_1d(lambda t: profile.dV(t) ** (k + 1) * profile.d2V(t) * w(t), tol=tol)
    by_parts = integrate_1d(lambda t: profile.dV(t) ** (k + 2) * dw(t), tol=tol)
    return (-1) ** (k + 1) * c / k * direct, (-1) ** k * c / (k * (k + 2)) * by_parts


class ThetaCutoff(NamedTuple):
    theta0: float
    degenerate: bool

    def __float__(self) -> float:
        return self.theta0


def frequency_cutoff_theta0(epsilon: float, k: int) -> ThetaCutoff:
    """theta_0 = eps^(1 - 1/k); k = 1 gives 1 and is flagged degenerate."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    return ThetaCutoff(epsilon ** (1.0 - 1.0 / k), k == 1)


def _fd_derivative(F: Callable, t: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central difference."""
    c = (1 / 60, -3 / 20, 3 / 4)
    out = np.zeros_like(t)
    for j, cj in zip((3, 2, 1), c):
        out += cj * (F(t + j * h) - F(t - j * h))
    return out / h


def derivative_identity_residual(profile: AxisProfile, m: int, theta_grid, h: float = 1e-3) -> float:
    """max |d/dtheta S_m - (expanded derivative)| over theta_grid, S_m the pole boundary sum.

    Nodes within 3h of a pole are dropped.
    """
    n = profile.n
    if not 1 <= m <= n - 1:
        raise ValueError(f"need 1 <= m <= n-1, got m={m}")
    t = np.asarray(theta_grid, dtype=float)
    t = t[(t > 3 * h) & (t < math.pi - 3 * h)]
    if t.size == 0:
        return 0.0
    pref = _binom(n - 1, m - 1) / m

    def S(x):
        v = profile.dV(x)
        return sum(
            (-1) ** (m - j) * pref * _binom(m, m - j) * v**j * np.sin(x) ** (n - j) * np.cos(x) ** (j - 1)
            for j in range(1, m + 1)
        )

    v, a = profile.dV(t), profile.d2V(t)
    s, c = np.sin(t), np.cos(t)
    expanded = np.zeros_like(t)
    for j in range(1, m + 1):
        term = j * v ** (j - 1) * a * s ** (n - j) * c ** (j - 1) + (n - j) * v**j * s ** (n - j - 1) * c**j
        if j > 1:
            term = term - (j - 1) * v**j * s ** (n - j + 1) * c ** (j - 2)
        expanded += (-1) ** (m - j) * pref * _binom(m, m - j) * term
    return float(np.max(np.abs(_fd_derivative(S, t, h) - expanded)))


@dataclass(frozen=True)
class InequalityProbe:
    """Both sides of the near-pole inequality with every omega term set to 0."""

    theta: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    side: str
    m: int

    @property
    def margin(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def holds_everywhere(self) -> bool:
        return bool(np.all(self.margin >= 0))


def near_pole_probe(
    profile: AxisProfile,
    m: int,
    thetas,
    side: str = "north",
    B: float = math.inf,
    epsilon: float = 1.0,
    nodes: int = 64,
) -> InequalityProbe:
    """Diagnostic evaluation of the near-pole inequalities (not asserted).

    north, for 0 < theta <= theta_0:
      sum_j (-1)^j V'^j C(m, m-j) sin^(m-j) >=
        -min(int_0^theta (m / C(n-1, m-1)) sigma_m^- sin^(n-1) / theta^(n-m), B eps^m) - theta^m
    south mirrors it on [pi - theta, pi] with the left side negated.
    """
    n = profile.n
    if not 1 <= m <= n - 1:
        raise ValueError(f"need 1 <= m <= n-1, got m={m}")
    t = np.atleast_1d(np.asarray(thetas, dtype=float))
    dist = t if side == "north" else math.pi - t
    if side not in ("north", "south"):
        raise ValueError("side must be 'north' or 'south'")
    if np.any(dist <= 0):
        raise ValueError("probe angles must be strictly inside the cap")
    v = profile.dV(t)
    lhs = sum((-1) ** j * v**j * _binom(m, m - j) * np.sin(t) ** (m - j) for j in range(1, m + 1))
    if side == "south":
        lhs = -lhs
    scale = m / _binom(n - 1, m - 1)

    def neg_part(tau):
        return np.maximum(-sigma_k_h_axisym(profile, tau, m), 0.0) * np.sin(tau) ** (n - 1)

    cum = np.empty_like(t)
    for i, d in enumerate(dist):
        lo, hi = (0.0, d) if side == "north" else (math.pi - d, math.pi)
        tau, w = gauss_theta(nodes, lo, hi)
        cum[i] = scale * np.sum(w * neg_part(tau))
    rhs = -np.minimum(cum / dist ** (n - m), B * epsilon**m) - dist**m
    return InequalityProbe(t, lhs, rhs, side, m)


def to_sphere_field(profile: AxisProfile, lmax: int = 32, **kw):
    """The n=2 profile as a grid field, symmetry axis along z."""
    from .spheregeom import SphereField

    if profile.n != 2:
        raise ValueError("only n=2 profiles have a grid counterpart")
    return SphereField.from_function(lambda t, p: profile.V(t), lmax, **kw)
