"""Radial graphs over the unit sphere.

A domain is ``{(1 + u(x)) x : |x| <= 1}``.  On S^2 the perturbation ``u`` is a
real spherical-harmonic series sampled on a Gauss-Legendre x uniform-azimuth
grid; covariant derivatives come from differentiating the series.  Higher
dimensions enter only through :class:`PointJet` and the axisymmetric module.

Curvature integrals, volume and barycenter accept any object with the small
domain protocol used here (``n``, ``quadrature(level)``, ``rescaled``,
``translated``); both :class:`SphereField` and ``axisym.AxisProfile`` satisfy it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import comb, sph_harm_y, sph_legendre_p_all

from ._common import (
    DomainError,
    NormalizationError,
    PoleError,
    ResolutionError,
    ball_volume,
    sphere_area,
)
from .symfun import newton_tensors, sigmas_matrix

DEFAULT_RESOLUTION = (96, 192)
DEFAULT_LMAX = 64
_TABLE_BUDGET = 4_000_000  # floats per Legendre table chunk


# --------------------------------------------------------------------- jets


@dataclass(frozen=True)
class PointJet:
    """Value, covariant gradient and Hessian of u in an orthonormal frame.

    Fields may carry leading batch axes: ``u`` has shape ``B``, ``grad``
    ``B + (n,)`` and ``hess`` ``B + (n, n)``.
    """

    u: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        g = np.asarray(self.grad, dtype=float)
        h = np.asarray(self.hess, dtype=float)
        n = g.shape[-1]
        if h.shape[-2:] != (n, n) or g.shape[:-1] != u.shape or h.shape[:-2] != u.shape:
            raise ValueError(f"inconsistent jet shapes {u.shape}, {g.shape}, {h.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise ValueError("jet has non-finite entries")
        h = 0.5 * (h + np.swapaxes(h, -1, -2))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "hess", h)

    @property
    def n(self) -> int:
        return self.grad.shape[-1]

    def __getitem__(self, idx) -> "PointJet":
        return PointJet(self.u[idx], self.grad[idx], self.hess[idx])


def _check_jet(jet: PointJet, n: int) -> None:
    if jet.n != n:
        raise ValueError(f"jet is {jet.n}-dimensional, expected n={n}")
    if np.any(1.0 + jet.u <= 0):
        raise DomainError("1 + u <= 0: not a radial graph")


def sigma_k_h(jet: PointJet, k: int, n: int | None = None):
    """k-th elementary symmetric function of the principal curvatures.

    Closed form for the radial graph ``(1 + u(x)) x`` in terms of u, its
    gradient and the Newton tensors of its covariant Hessian.
    """
    n = jet.n if n is None else n
    if not 0 <= k <= n:
        raise ValueError(f"order k={k} outside [0, {n}]")
    _check_jet(jet, n)
    one = 1.0 + jet.u
    g2 = np.einsum("...i,...i->...", jet.grad, jet.grad)
    s = sigmas_matrix(jet.hess, k)
    tensors = newton_tensors(jet.hess, k)
    total = np.zeros_like(one)
    for m in range(k + 1):
        term = one**2 * s[m]
        if m < n:  # T_n vanishes identically
            quad = np.einsum("...i,...ij,...j->...", jet.grad, tensors[m], jet.grad)
            term = term + (n + k - 2 * m) / (n - m) * quad
        total = total + (-1) ** m * comb(n - m, k - m, exact=True) * term / one**m
    out = total * (one**2 + g2) ** (-(k + 2) / 2)
    return float(out) if np.ndim(out) == 0 else out


def area_element(jet: PointJet, n: int | None = None):
    """dmu / dA = (1+u)^(n-1) sqrt((1+u)^2 + |grad u|^2)."""
    n = jet.n if n is None else n
    _check_jet(jet, n)
    one = 1.0 + jet.u
    g2 = np.einsum("...i,...i->...", jet.grad, jet.grad)
    out = one ** (n - 1) * np.sqrt(one**2 + g2)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------------ S^2 grid


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre nodes in cos(theta) times uniform azimuth."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 2 or self.n_phi < 3:
            raise ValueError("grid too small")

    @property
    def theta(self) -> np.ndarray:
        x, _ = np.polynomial.legendre.leggauss(self.n_theta)
        return np.arccos(x[::-1])

    @property
    def cos_weights(self) -> np.ndarray:
        _, w = np.polynomial.legendre.leggauss(self.n_theta)
        return w[::-1]

    @property
    def phi(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def weights(self) -> np.ndarray:
        """Area weights, shape (n_theta, n_phi); they sum to 4 pi."""
        return np.outer(self.cos_weights, np.full(self.n_phi, 2 * np.pi / self.n_phi))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @property
    def points(self) -> np.ndarray:
        t, p = self.mesh()
        return np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)

    def refined(self, level: int = 1) -> "SphereGrid":
        return SphereGrid(self.n_theta << level, self.n_phi << level)

    @classmethod
    def for_lmax(cls, lmax: int, oversample: int = 1) -> "SphereGrid":
        """Smallest grid on which analysis of degree-lmax data is exact."""
        return cls(oversample * (lmax + 1), oversample * (2 * lmax + 2))


def _legendre_table(lmax: int, theta: np.ndarray, diff_n: int) -> np.ndarray:
    """Normalized associated Legendre functions, shape (d+1, l, m>=0, N)."""
    p = sph_legendre_p_all(lmax, lmax, np.asarray(theta, dtype=float), diff_n=diff_n)
    return p[:, :, : lmax + 1]


def _mode_weights(lmax: int) -> np.ndarray:
    w = np.full(lmax + 1, math.sqrt(2.0))
    w[0] = 1.0
    return w


def to_spherical(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    theta = np.arccos(np.clip(p[..., 2] / r, -1.0, 1.0))
    phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2 * np.pi)
    return theta, phi


class SphereField:
    """Real spherical-harmonic series for u on S^2.

    ``coeffs[l, lmax + m]`` multiplies the real orthonormal harmonic of degree
    l and order m: sqrt(2) Pbar_l^m cos(m phi) for m > 0, Pbar_l^0 for m = 0
    and sqrt(2) Pbar_l^|m| sin(|m| phi) for m < 0.
    """

    n = 2

    def __init__(self, coeffs, resolution: tuple[int, int] = DEFAULT_RESOLUTION):
        c = np.array(coeffs, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2 * c.shape[0] - 1:
            raise ValueError(f"coefficients must have shape (L+1, 2L+1), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        L = c.shape[0] - 1
        l_idx, m_idx = np.meshgrid(np.arange(L + 1), np.arange(-L, L + 1), indexing="ij")
        if np.any(c[np.abs(m_idx) > l_idx] != 0):
            raise ValueError("coefficients with |m| > l must vanish")
        c.setflags(write=False)
        self.coeffs = c
        self.resolution = tuple(int(r) for r in resolution)
        self.grid = SphereGrid(*self.resolution)

    # construction

    @classmethod
    def zeros(cls, lmax: int = 0, **kw) -> "SphereField":
        return cls(np.zeros((lmax + 1, 2 * lmax + 1)), **kw)

    @classmethod
    def constant(cls, c: float, **kw) -> "SphereField":
        return cls(np.array([[c * math.sqrt(4 * np.pi)]]), **kw)

    @classmethod
    def from_modes(cls, modes: dict[tuple[int, int], float], lmax: int | None = None, **kw):
        lmax = max(l for l, _ in modes) if lmax is None else lmax
        c = np.zeros((lmax + 1, 2 * lmax + 1))
        for (l, m), v in modes.items():
            c[l, lmax + m] = v
        return cls(c, **kw)

    @classmethod
    def from_grid_values(cls, grid: SphereGrid, values, lmax: int, **kw) -> "SphereField":
        """Quadrature analysis of samples on ``grid`` up to degree ``lmax``."""
        v = np.asarray(values, dtype=float)
        if v.shape != (grid.n_theta, grid.n_phi):
            raise ValueError(f"values shape {v.shape} does not match grid")
        L = lmax
        if grid.n_phi <= 2 * L or 2 * grid.n_theta - 1 < L:
            warnings.warn("grid too coarse for requested lmax; analysis aliases", RuntimeWarning)
        m = np.arange(L + 1)
        phase = np.outer(m, grid.phi)
        dphi = 2 * np.pi / grid.n_phi
        a = v @ np.cos(phase).T * dphi  # (ntheta, M)
        b = v @ np.sin(phase).T * dphi
        P = _legendre_table(L, grid.theta, 0)[0]  # (l, m, ntheta)
        wm = _mode_weights(L)
        cw = grid.cos_weights
        ccos = np.einsum("lmi,i,im->lm", P, cw, a) * wm
        csin = np.einsum("lmi,i,im->lm", P, cw, b) * wm
        c = np.zeros((L + 1, 2 * L + 1))
        c[:, L:] = ccos
        c[:, L - m[1:]] = csin[:, 1:]
        c[np.abs(np.arange(-L, L + 1))[None, :] > np.arange(L + 1)[:, None]] = 0.0
        return cls(c, **kw)

    @classmethod
    def from_function(
        cls,
        f: Callable[[np.ndarray, np.ndarray], np.ndarray],
        lmax: int = DEFAULT_LMAX,
        *,
        check: bool = True,
        **kw,
    ) -> "SphereField":
        """Project f(theta, phi) onto degrees <= lmax.

        Warns when noticeable energy lies above lmax (the input is then
        truncated).
        """
        probe = lmax + 8 if check else lmax
        grid = SphereGrid.for_lmax(probe, oversample=2)
        t, p = grid.mesh()
        vals = np.asarray(f(t, p), dtype=float) * np.ones_like(t)
        wide = cls.from_grid_values(grid, vals, probe)
        if check:
            energy = np.sum(wide.coeffs**2, axis=1)
            tail = energy[lmax + 1 :].sum()
            if tail > 1e-20 + 1e-14 * energy.sum():
                warnings.warn(
                    f"field not band-limited to lmax={lmax}; truncating "
                    f"(tail energy {tail:.2e})",
                    RuntimeWarning,
                )
        return wide.truncated(lmax, **kw)

    @classmethod
    def from_points_function(cls, f: Callable[[np.ndarray], np.ndarray], lmax: int = DEFAULT_LMAX, **kw):
        """Like :meth:`from_function` but f takes unit vectors (..., 3)."""

        def g(t, p):
            pts = np.stack([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)], axis=-1)
            return f(pts)

        return cls.from_function(g, lmax, **kw)

    @classmethod
    def from_complex_modes(cls, rows, lmax: int | None = None, **kw) -> "SphereField":
        """u = Re sum a_lm Y_l^m from rows (l, m, re, im), complex orthonormal Y."""
        rows = [(int(l), int(m), float(re), float(im)) for l, m, re, im in rows]
        if not rows:
            raise ValueError("no spectral rows")
        for l, m, _, _ in rows:
            if l < 0 or abs(m) > l:
                raise ValueError(f"invalid mode (l={l}, m={m})")
        L = max(r[0] for r in rows) if lmax is None else lmax

        def f(t, p):
            out = np.zeros_like(t)
            for l, m, re, im in rows:
                out = out + np.real((re + 1j * im) * sph_harm_y(l, m, t, p))
            return out

        return cls.from_function(f, L, check=False, **kw)

    def truncated(self, lmax: int, **kw) -> "SphereField":
        kw.setdefault("resolution", self.resolution)
        L = self.lmax
        c = np.zeros((lmax + 1, 2 * lmax + 1))
        keep = min(L, lmax)
        c[: keep + 1, lmax - keep : lmax + keep + 1] = self.coeffs[: keep + 1, L - keep : L + keep + 1]
        return SphereField(c, **kw)

    def with_resolution(self, resolution: tuple[int, int]) -> "SphereField":
        return SphereField(self.coeffs, resolution=resolution)

    # evaluation

    @property
    def lmax(self) -> int:
        return self.coeffs.shape[0] - 1

    def coefficient(self, l: int, m: int) -> float:
        if l > self.lmax:
            return 0.0
        return float(self.coeffs[l, self.lmax + m])

    def degree_energy(self) -> np.ndarray:
        """Sum over m of squared coefficients, per degree l."""
        return np.sum(self.coeffs**2, axis=1)

    def _split(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.lmax
        ccos = self.coeffs[:, L:]
        csin = np.zeros_like(ccos)
        csin[:, 1:] = self.coeffs[:, L - np.arange(1, L + 1)]
        return ccos, csin

    def _theta_modes(self, theta, diff_n: int) -> tuple[np.ndarray, np.ndarray]:
        """A_m(theta), B_m(theta) and theta-derivatives, shape (d+1, M, N)."""
        P = _legendre_table(self.lmax, theta, diff_n)
        ccos, csin = self._split()
        wm = _mode_weights(self.lmax)[None, :, None]
        A = np.einsum("lm,dlmi->dmi", ccos, P) * wm
        B = np.einsum("lm,dlmi->dmi", csin, P) * wm
        return A, B

    @staticmethod
    def _combine(A, B, cos, sin, m, second: bool, outer: bool) -> dict[str, np.ndarray]:
        if outer:
            def s(X, T):
                return X.T @ T
        else:
            def s(X, T):
                return np.sum(X * T, axis=0)

        mm = m[:, None]
        out = {
            "u": s(A[0], cos) + s(B[0], sin),
            "u_t": None,
        }
        if A.shape[0] > 1:
            out["u_t"] = s(A[1], cos) + s(B[1], sin)
            out["u_p"] = s(-mm * A[0], sin) + s(mm * B[0], cos)
        if second:
            out["u_tt"] = s(A[2], cos) + s(B[2], sin)
            out["u_tp"] = s(-mm * A[1], sin) + s(mm * B[1], cos)
            out["u_pp"] = s(-(mm**2) * A[0], cos) + s(-(mm**2) * B[0], sin)
        if out["u_t"] is None:
            del out["u_t"]
        return out

    def on_grid(self, grid: SphereGrid | None = None, derivs: int = 0) -> dict[str, np.ndarray]:
        """u and (optionally) raw coordinate derivatives on a grid."""
        grid = self.grid if grid is None else grid
        A, B = self._theta_modes(grid.theta, derivs)
        m = np.arange(self.lmax + 1)
        phase = np.outer(m, grid.phi)
        return self._combine(A, B, np.cos(phase), np.sin(phase), m, derivs >= 2, outer=True)

    def values(self, grid: SphereGrid | None = None) -> np.ndarray:
        return self.on_grid(grid)["u"]

    def evaluate(self, theta, phi, derivs: int = 0) -> dict[str, np.ndarray]:
        """Pointwise u and coordinate derivatives at arbitrary (theta, phi)."""
        theta = np.asarray(theta, dtype=float)
        phi = np.broadcast_to(np.asarray(phi, dtype=float), theta.shape)
        shape = theta.shape
        tf, pf = theta.ravel(), phi.ravel()
        m = np.arange(self.lmax + 1)
        chunk = max(64, _TABLE_BUDGET // ((self.lmax + 1) ** 2 * (derivs + 1)))
        parts = []
        for lo in range(0, tf.size, chunk):
            t, p = tf[lo : lo + chunk], pf[lo : lo + chunk]
            A, B = self._theta_modes(t, derivs)
            phase = np.outer(m, p)
            parts.append(self._combine(A, B, np.cos(phase), np.sin(phase), m, derivs >= 2, outer=False))
        if not parts:
            return {"u": np.zeros(shape)}
        return {k: np.concatenate([d[k] for d in parts]).reshape(shape) for k in parts[0]}

    def value_at(self, points) -> np.ndarray:
        """u at the radial projections of arbitrary nonzero points in R^3."""
        t, p = to_spherical(points)
        return self.evaluate(t, p)["u"]

    def grid_jets(self, grid: SphereGrid | None = None) -> PointJet:
        """Covariant jets on the grid in the orthonormal frame (e_theta, e_phi)."""
        grid = self.grid if grid is None else grid
        return self._frame_jets(self.on_grid(grid, derivs=2), grid.theta[:, None])

    def jets_at(self, points) -> PointJet:
        """Covariant jets at the radial projections of ``points`` (off the poles)."""
        t, p = to_spherical(points)
        if np.any(np.sin(t) < 1e-8):
            raise PoleError("frame (e_theta, e_phi) is singular at the poles")
        return self._frame_jets(self.evaluate(t, p, derivs=2), t)

    @staticmethod
    def _frame_jets(d, t) -> PointJet:
        sn, cot = np.sin(t), np.cos(t) / np.sin(t)
        grad = np.stack([d["u_t"], d["u_p"] / sn], axis=-1)
        h_tt = d["u_tt"]
        h_tp = (d["u_tp"] - cot * d["u_p"]) / sn
        h_pp = d["u_pp"] / sn**2 + cot * d["u_t"]
        hess = np.stack([np.stack([h_tt, h_tp], -1), np.stack([h_tp, h_pp], -1)], -2)
        return PointJet(d["u"], grad, hess)

    # domain protocol

    def quadrature(self, level: int = 0):
        """(jets, area weights, unit normals) flattened over a refined grid."""
        grid = self.grid.refined(level)
        jets = self.grid_jets(grid)
        N = grid.n_theta * grid.n_phi
        flat = PointJet(jets.u.reshape(N), jets.grad.reshape(N, 2), jets.hess.reshape(N, 2, 2))
        return flat, grid.weights.reshape(N), grid.points.reshape(N, 3)

    def quadrature_values(self, level: int = 0):
        grid = self.grid.refined(level)
        N = grid.n_theta * grid.n_phi
        return self.values(grid).reshape(N), grid.weights.reshape(N), grid.points.reshape(N, 3)

    def rescaled(self, s: float) -> "SphereField":
        """Field of the dilated domain s * Omega."""
        c = s * np.array(self.coeffs)
        c[0, self.lmax] += (s - 1.0) * math.sqrt(4 * np.pi)
        return SphereField(c, resolution=self.resolution)

    def translated(self, b, lmax: int | None = None, tol: float = 1e-15, max_iter: int = 200) -> "SphereField":
        """Field of Omega - b, re-graphed over the unit sphere about the new origin."""
        b = np.asarray(b, dtype=float).reshape(3)
        lmax = min(DEFAULT_LMAX, max(self.lmax + 12, 24)) if lmax is None else lmax
        grid = SphereGrid.for_lmax(lmax, oversample=2)
        y = grid.points.reshape(-1, 3)
        rho = 1.0 + self.value_at(y) - y @ b
        for _ in range(max_iter):
            p = rho[:, None] * y + b
            step = 1.0 + self.value_at(p) - np.linalg.norm(p, axis=1)
            rho = rho + step
            if np.max(np.abs(step)) <= tol:
                break
        else:
            raise NormalizationError("re-graphing after translation did not converge")
        if np.any(rho <= 0):
            raise DomainError("translated domain is not star-shaped about the new origin")
        vals = (rho - 1.0).reshape(grid.n_theta, grid.n_phi)
        return SphereField.from_grid_values(grid, vals, lmax, resolution=self.resolution)

    def rotated(self, R) -> "SphereField":
        """Field of R(Omega): u'(x) = u(R^T x)."""
        R = np.asarray(R, dtype=float)
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-12):
            raise ValueError("R is not orthogonal")
        grid = SphereGrid.for_lmax(self.lmax, oversample=2)
        pts = grid.points @ R  # rows are R^T x
        vals = self.value_at(pts)
        return SphereField.from_grid_values(grid, vals, self.lmax, resolution=self.resolution)

    def __repr__(self) -> str:
        return f"SphereField(lmax={self.lmax}, resolution={self.resolution})"


def jet(f: SphereField, node: tuple[int, int]) -> PointJet:
    """Jet of ``f`` at grid node (theta_index, phi_index) of its own grid."""
    i, j = node
    if not (0 <= i < f.grid.n_theta and 0 <= j < f.grid.n_phi):
        raise IndexError(f"node {node} outside grid {f.resolution}")
    return f.grid_jets()[i, j]


# -------------------------------------------------------------- integration


def _integrands(domain, k: int, level: int) -> np.ndarray:
    """Quadrature sums for sigma_k^+ dmu and sigma_k^- dmu."""
    jets, w, _ = domain.quadrature(level)
    s = sigma_k_h(jets, k, domain.n)
    dmu = area_element(jets, domain.n) * w
    return np.array([np.sum(np.maximum(s, 0) * dmu), np.sum(np.maximum(-s, 0) * dmu)])


def _refine(
    fn: Callable[[int], np.ndarray],
    tol: float,
    max_level: int,
    start: int = 0,
    floor: float = 1.0,
    atol: float = 0.0,
):
    """Evaluate fn at successive levels until two agree.

    Agreement means a change of at most max(atol, tol * max(floor, |value|)).
    """
    prev = np.asarray(fn(start))
    change = float("inf")
    for level in range(start + 1, start + max_level + 1):
        cur = np.asarray(fn(level))
        scale = max(floor, float(np.max(np.abs(cur))))
        change = float(np.max(np.abs(cur - prev)))
        if change <= max(atol, tol * scale):
            return cur, level
        prev = cur
    raise ResolutionError(f"quadrature not converged after {max_level} refinements (last change {change:.3e})")


@dataclass(frozen=True)
class CurvatureIntegrals:
    k: int
    signed: float
    positive: float
    negative: float
    level: int

    def part(self, name: str) -> float:
        key = {"pos": "positive", "neg": "negative"}.get(name, name)
        if key not in ("signed", "positive", "negative"):
            raise ValueError(f"unknown part {name!r}")
        return getattr(self, key)


def curvature_integrals(domain, k: int, tol: float = 1e-8, max_level: int = 3) -> CurvatureIntegrals:
    """Signed, positive and negative parts of int sigma_k(h) dmu, refined jointly."""
    if not 0 <= k <= domain.n:
        raise ValueError(f"order k={k} outside [0, {domain.n}]")
    (pos, neg), level = _refine(lambda lv: _integrands(domain, k, lv), tol, max_level)
    return CurvatureIntegrals(k, float(pos - neg), float(pos), float(neg), level)


def curvature_integral(domain, k: int, part: str = "signed", tol: float = 1e-8, max_level: int = 3) -> float:
    """int sigma_k(h) dmu, or int max(0, +-sigma_k) dmu for part positive/negative."""
    return curvature_integrals(domain, k, tol, max_level).part(part)


def surface_area(domain, tol: float = 1e-10, max_level: int = 3) -> float:
    def fn(level):
        jets, w, _ = domain.quadrature(level)
        return np.array([np.sum(area_element(jets, domain.n) * w)])

    return float(_refine(fn, tol, max_level)[0][0])


def volume_and_barycenter(domain, tol: float = 1e-12, max_level: int = 3) -> tuple[float, np.ndarray]:
    """Vol = int (1+u)^(n+1) dA / (n+1); bar = int (1+u)^(n+2) x dA / ((n+2) Vol)."""
    n = domain.n

    def fn(level):
        u, w, x = domain.quadrature_values(level)
        r = 1.0 + u
        if np.any(r <= 0):
            raise DomainError("1 + u <= 0: not a radial graph")
        vol = np.sum(w * r ** (n + 1)) / (n + 1)
        mom = (w * r ** (n + 2)) @ x / (n + 2)
        return np.concatenate([[vol], mom])

    out, _ = _refine(fn, tol, max_level)
    return float(out[0]), out[1:] / out[0]


def normalize(domain, max_iter: int = 50, vol_tol: float = 1e-12, bar_tol: float = 1e-10):
    """Rescale and re-center so that Vol = Vol(B) and bar = 0.

    Returns the input unchanged when it already satisfies both within tolerance.
    """
    n = domain.n
    target = ball_volume(n + 1)
    d = domain
    for _ in range(max_iter):
        vol, bar = volume_and_barycenter(d)
        if abs(vol / target - 1.0) <= vol_tol and np.linalg.norm(bar) <= bar_tol:
            return d
        if np.linalg.norm(bar) > bar_tol:
            d = d.translated(bar)
            vol, _ = volume_and_barycenter(d)
        d = d.rescaled((target / vol) ** (1.0 / (n + 1)))
    raise NormalizationError(f"normalization did not converge in {max_iter} iterations")


# ------------------------------------------------------------------- oracle


def _tangent_frame(base: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors at unit vectors ``base`` (any, pole-safe)."""
    ref = np.where(np.abs(base[..., 2:3]) < 0.9, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    e1 = np.cross(ref, base)
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    return e1, np.cross(base, e1)


def shape_operator_fd(
    f: SphereField,
    grid: SphereGrid | None = None,
    h: float = 1e-3,
    points=None,
) -> np.ndarray:
    """Principal curvatures by finite differences of the embedding.

    At each base point p a gnomonic chart x(s, t) = normalize(p + s e1 + t e2)
    is used, so the poles are ordinary points.  Base points are the nodes of
    ``grid`` (default: the field's grid) unless ``points`` (unit vectors,
    shape (..., 3)) is given.  Returns shape (..., 2), smaller curvature first.
    """
    if points is None:
        grid = f.grid if grid is None else grid
        base = grid.points
    else:
        base = np.asarray(points, dtype=float)
        base = base / np.linalg.norm(base, axis=-1, keepdims=True)
    e1, e2 = _tangent_frame(base)
    offs = [(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)]
    pts = np.stack([base + h * (a * e1 + b * e2) for a, b in offs], axis=0)
    pts = pts / np.linalg.norm(pts, axis=-1, keepdims=True)
    X = (1.0 + f.value_at(pts))[..., None] * pts
    F = {o: X[i] for i, o in enumerate(offs)}
    Xs = (F[(1, 0)] - F[(-1, 0)]) / (2 * h)
    Xt = (F[(0, 1)] - F[(0, -1)]) / (2 * h)
    Xss = (F[(1, 0)] - 2 * F[(0, 0)] + F[(-1, 0)]) / h**2
    Xtt = (F[(0, 1)] - 2 * F[(0, 0)] + F[(0, -1)]) / h**2
    Xst = (F[(1, 1)] - F[(1, -1)] - F[(-1, 1)] + F[(-1, -1)]) / (4 * h**2)
    N = np.cross(Xs, Xt)
    N /= np.linalg.norm(N, axis=-1, keepdims=True)
    N *= np.sign(np.sum(N * F[(0, 0)], axis=-1))[..., None]  # outward
    E, Fm, G = (np.sum(a * b, axis=-1) for a, b in ((Xs, Xs), (Xs, Xt), (Xt, Xt)))
    # inward normal convention: the unit sphere has curvature +1
    L, M, Nn = (-np.sum(a * N, axis=-1) for a in (Xss, Xst, Xtt))
    det_i = E * G - Fm**2
    if np.any(det_i <= 0):
        raise ValueError("degenerate first fundamental form in FD chart")
    s1 = (E * Nn - 2 * Fm * M + G * L) / det_i
    s2 = (L * Nn - M**2) / det_i
    disc = np.sqrt(np.maximum(s1**2 - 4 * s2, 0.0))
    return np.stack([(s1 - disc) / 2, (s1 + disc) / 2], axis=-1)


# ----------------------------------------------------- quermassintegrals


@dataclass(frozen=True)
class AFRatio:
    """Scale-free comparison of int sigma_k dmu against volume, ball = 1."""

    ratio: float
    valid: bool
    integral: float
    volume: float
    k: int
    n: int

    def __float__(self) -> float:
        return self.ratio


def af_ratio(domain, k: int, tol: float = 1e-8) -> AFRatio:
    """(I_k / I_k(B)) * (|B| / |Omega|)^((n-k)/(n+1)), rooted by 1/(n-k) when k < n.

    Equals 1 on every ball.  A non-positive integral gives ratio NaN and
    ``valid=False``.
    """
    n = domain.n
    if not 1 <= k <= n:
        raise ValueError(f"order k={k} outside [1, {n}]")
    integral = curvature_integral(domain, k, tol=tol)
    vol, _ = volume_and_barycenter(domain)
    if integral <= 0:
        return AFRatio(float("nan"), False, integral, vol, k, n)
    ball_int = comb(n, k, exact=True) * sphere_area(n)
    raw = (integral / ball_int) * (ball_volume(n + 1) / vol) ** ((n - k) / (n + 1))
    ratio = raw ** (1.0 / (n - k)) if k < n else raw
    return AFRatio(float(ratio), True, integral, vol, k, n)


def quermassintegral(domain, j: int, tol: float = 1e-8) -> float:
    """V_j for 0 <= j <= n via curvature integrals (V_j(B) = omega_j).

    V_{n+1} is the volume; for j <= n, with k = n + 1 - j,
    V_j = (j! (k-1)! / (n+1)!) (omega_j / omega_{n+1}) int sigma_{k-1} dmu.
    """
    n = domain.n
    if not 0 <= j <= n + 1:
        raise ValueError(f"index j={j} outside [0, {n + 1}]")
    if j == n + 1:
        return volume_and_barycenter(domain)[0]
    k = n + 1 - j
    integral = curvature_integral(domain, k - 1, tol=tol)
    coef = math.factorial(j) * math.factorial(k - 1) / math.factorial(n + 1)
    return coef * ball_volume(j) / ball_volume(n + 1) * integral


def quermass_conventions(n: int) -> dict[str, float]:
    """The two unit-ball values of V_n that appear in the literature."""
    return {
        "V_n_ball_curvature_integral": ball_volume(n),
        "V_n_ball_hausdorff": 1.0,
    }


# ------------------------------------------------------ integral identities


@dataclass(frozen=True)
class IdentityCheck:
    """Left side of an integration-by-parts identity against two right sides.

    ``printed`` is the form without sphere-curvature terms; ``corrected``
    adds the (n - 1) terms that commuting covariant derivatives on S^n
    produce.
    """

    name: str
    lhs: float
    printed: float
    corrected: float
    scale: float  # largest single integral entering either side

    def _rel(self, other: float) -> float:
        s = max(abs(self.lhs), abs(other), self.scale)
        return abs(self.lhs - other) / s if s > 0 else 0.0

    @property
    def printed_error(self) -> float:
        return self._rel(self.printed)

    @property
    def corrected_error(self) -> float:
        return self._rel(self.corrected)


def integral_identities(field: SphereField, grid: SphereGrid | None = None) -> list[IdentityCheck]:
    """Evaluate identities (a)-(d) for the sigma_2 computations on S^2.

    With phi = |grad u|^2, Delta u = tr D^2u and T_m = T_m(D^2u):
      (a) int phi u^i u_j u_i^j       = -1/4 int phi^2 Delta u
      (b) int u^2 sigma_2             = -1/2 int phi^2 - 3/2 int u phi Delta u   [+ (n-1)/2 int u^2 phi]
      (c) int phi u^i u_j [T_2]_i^j   =  3/2 int phi^2 sigma_2                  [- (n-1)/4 int phi^3]
      (d) int u^i u^j [T_1]_i^k u_kj  = -1/2 int phi sigma_2 + n/2 int phi^2
          corrected: -int phi sigma_2 + (n-1)/2 int phi^2
    The default grid integrates every integrand exactly for a band-limited u.
    """
    n = 2
    grid = SphereGrid.for_lmax(3 * field.lmax + 2) if grid is None else grid
    jets = field.grid_jets(grid)
    w = grid.weights
    u, g, H = jets.u, jets.grad, jets.hess
    phi = np.einsum("...i,...i->...", g, g)
    lap = np.trace(H, axis1=-2, axis2=-1)
    s = sigmas_matrix(H, n)
    T = newton_tensors(H, n)

    def q(M):
        return np.einsum("...i,...ij,...j->...", g, M, g)

    seen: list[float] = []

    def I(x):
        v = float(np.sum(w * x))
        seen.append(abs(v))
        return v

    def check(name, lhs_fn, printed_fn, corrected_fn):
        seen.clear()
        lhs, printed, corrected = lhs_fn(), printed_fn(), corrected_fn()
        return IdentityCheck(name, lhs, printed, corrected, max(seen))

    return [
        check("a", lambda: I(phi * q(H)), lambda: -0.25 * I(phi**2 * lap), lambda: -0.25 * I(phi**2 * lap)),
        check(
            "b",
            lambda: I(u**2 * s[2]),
            lambda: -0.5 * I(phi**2) - 1.5 * I(u * phi * lap),
            lambda: -0.5 * I(phi**2) - 1.5 * I(u * phi * lap) + 0.5 * (n - 1) * I(u**2 * phi),
        ),
        check(
            "c",
            lambda: I(phi * q(T[2])),
            lambda: 1.5 * I(phi**2 * s[2]),
            lambda: 1.5 * I(phi**2 * s[2]) - 0.25 * (n - 1) * I(phi**3),
        ),
        check(
            "d",
            lambda: I(q(T[1] @ H)),
            lambda: -0.5 * I(phi * s[2]) + 0.5 * n * I(phi**2),
            lambda: -I(phi * s[2]) + 0.5 * (n - 1) * I(phi**2),
        ),
    ]


def divergence_residual(u: SphereField, phi: SphereField, psi: SphereField, m: int, grid: SphereGrid | None = None) -> tuple[float, float]:
    """Weak form of div T_m(D^2u) = -(n-m) T_{m-1}(D^2u) grad u on S^2.

    Returns (residual, scale) for
      int <grad phi, T_m grad psi> - (n-m) phi <grad u, T_{m-1} grad psi> + phi tr(T_m D^2 psi) dA,
    which vanishes when the divergence formula holds; scale is the sum of the
    absolute values of the three integrals.
    """
    n = 2
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= {n}")
    L = max(u.lmax, phi.lmax, psi.lmax)
    grid = SphereGrid.for_lmax(2 * m * L + 2) if grid is None else grid
    w = grid.weights
    ju, jf, jp = u.grid_jets(grid), phi.grid_jets(grid), psi.grid_jets(grid)
    T = newton_tensors(ju.hess, m)
    t1 = np.einsum("...i,...ij,...j->...", jf.grad, T[m], jp.grad)
    t2 = -(n - m) * jf.u * np.einsum("...i,...ij,...j->...", ju.grad, T[m - 1], jp.grad)
    t3 = jf.u * np.einsum("...ij,...ji->...", T[m], jp.hess)
    parts = [float(np.sum(w * t)) for t in (t1, t2, t3)]
    return sum(parts), sum(abs(p) for p in parts)


# ------------------------------------------------------------ test fields


def c1_norm(field: SphereField, grid: SphereGrid | None = None) -> float:
    """max(sup |u|, sup |grad u|) sampled on ``grid`` (default: 4x oversampled)."""
    grid = SphereGrid.for_lmax(field.lmax, oversample=4) if grid is None else grid
    d = field.on_grid(grid, derivs=1)
    sn = np.sin(grid.theta)[:, None]
    g = np.sqrt(d["u_t"] ** 2 + (d["u_p"] / sn) ** 2)
    return float(max(np.abs(d["u"]).max(), g.max()))


def random_field(lmax: int, c1: float = 0.05, seed=None, decay: float = 1.0, **kw) -> SphereField:
    """Random real field of degree <= lmax scaled so its sampled C^1 norm is 0.95 c1.

    Coefficients are standard normal damped by (1 + l)^-decay.
    """
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((lmax + 1, 2 * lmax + 1))
    l_idx = np.arange(lmax + 1)[:, None]
    c[np.abs(np.arange(-lmax, lmax + 1))[None, :] > l_idx] = 0.0
    c /= (1.0 + l_idx) ** decay
    f = SphereField(c, **kw)
    return SphereField(c * (0.95 * c1 / c1_norm(f)), **kw)
