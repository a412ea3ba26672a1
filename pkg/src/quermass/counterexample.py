"""Many small dimples: the integral of sigma_k(h) can fall below the ball's.

A radial profile f on [0, 1/kappa] with slope up to eps/2 is planted around q
well-separated centres.  Since the bumps have disjoint supports, the total is
the unperturbed remainder of the sphere plus q copies of one per-bump integral,
and each per-bump integral is an exact one-dimensional quadrature of the
radial-graph curvature formula.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import comb

from ._common import sphere_area
from .axisym import AxisProfile, integrate_1d
from .spheregeom import area_element, sigma_k_h

# knots of the slope shape S on [0, 1] (in units of 1/kappa)
RISE = (0.2, 0.5)
FALL = (0.75, 0.95)


def _binom(n: int, k: int) -> int:
    return int(comb(n, k, exact=True)) if 0 <= k <= n else 0


def _smooth(x):
    """Quintic smoothstep 6x^5 - 15x^4 + 10x^3 on [0, 1] and its derivatives."""
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x**2)
    ds = 30 * x**2 * (1 - x) ** 2
    d2s = 60 * x * (1 - x) * (1 - 2 * x)
    return s, ds, d2s


def _smooth_antiderivative(x):
    """int_0^x smoothstep."""
    x = np.clip(x, 0.0, 1.0)
    return x**6 - 3 * x**5 + 2.5 * x**4


def _slope_shape(s):
    """S(s), S'(s), S''(s): 0 / rise / 1 on [1/2, 3/4] / fall / 0."""
    s = np.asarray(s, dtype=float)
    a0, a1 = RISE
    b0, b1 = FALL
    up = (s - a0) / (a1 - a0)
    dn = (b1 - s) / (b1 - b0)
    su, dsu, d2su = _smooth(up)
    sd, dsd, d2sd = _smooth(dn)
    rising = s < a1
    S = np.where(rising, su, sd)
    dS = np.where(rising, dsu / (a1 - a0), -dsd / (b1 - b0))
    d2S = np.where(rising, d2su / (a1 - a0) ** 2, d2sd / (b1 - b0) ** 2)
    return S, dS, d2S


def _shape_integral_from(s):
    """int_s^1 S(t) dt."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    a0, a1 = RISE
    b0, b1 = FALL
    wu, wd = a1 - a0, b1 - b0

    def prim(t):  # int_0^t S
        t = np.asarray(t, dtype=float)
        rise = wu * _smooth_antiderivative((t - a0) / wu)
        flat = np.clip(t, a1, b0) - a1
        fall = wd * (_smooth_antiderivative(1.0) - _smooth_antiderivative((b1 - np.clip(t, b0, b1)) / wd))
        return rise + flat + np.where(t > b0, fall, 0.0)

    return prim(1.0) - prim(s)


@dataclass(frozen=True)
class BumpSpec:
    """Radial profile f supported in [0, 1/kappa] with f' = (eps/2) S(kappa r)."""

    epsilon: float
    kappa: float

    @property
    def support(self) -> float:
        return 1.0 / self.kappa

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(x / self.kappa for x in (*RISE, *FALL))

    def f(self, r):
        return -0.5 * self.epsilon / self.kappa * _shape_integral_from(self.kappa * np.asarray(r, dtype=float))

    def df(self, r):
        return 0.5 * self.epsilon * _slope_shape(self.kappa * np.asarray(r, dtype=float))[0]

    def d2f(self, r):
        return 0.5 * self.epsilon * self.kappa * _slope_shape(self.kappa * np.asarray(r, dtype=float))[1]

    def d3f(self, r):
        return 0.5 * self.epsilon * self.kappa**2 * _slope_shape(self.kappa * np.asarray(r, dtype=float))[2]

    def c1_norm(self, n_grid: int = 10_001) -> float:
        r = np.linspace(0.0, self.support, n_grid)
        return float(max(np.max(np.abs(self.f(r))), np.max(np.abs(self.df(r)))))

    def verify(self, n_grid: int = 10_001) -> dict[str, bool]:
        """Check the defining constraints on a uniform grid of [0, 1/kappa]."""
        e = self.epsilon
        r = np.linspace(0.0, self.support, n_grid)
        f, df = self.f(r), self.df(r)
        plateau = (r >= 0.5 * self.support) & (r <= 0.75 * self.support)
        checks = {
            "f_range": bool(np.all((f >= -e / 2 - 1e-15) & (f <= 1e-15))),
            "slope_range": bool(np.all((df >= -1e-15) & (df <= e / 2 + 1e-15))),
            "plateau": bool(np.allclose(df[plateau], e / 2, rtol=0, atol=1e-15)),
            "vanishes_at_support": abs(float(self.f(self.support))) <= 1e-15,
        }
        return checks

    def profile(self, n: int) -> AxisProfile:
        """The bump as an axial profile centred at theta = 0 (geodesic radius = theta)."""
        R = self.support

        def cut(g):
            return lambda t: np.where(np.asarray(t) < R, g(np.minimum(t, R)), 0.0)

        def cot_df(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.cos(t) / np.sin(t) * self.df(t)
            return np.where((t < R) & (t > 0), out, 0.0)  # f' vanishes near 0

        return AxisProfile(
            cut(self.f), cut(self.df), cut(self.d2f), n, cot_dV=cot_df,
            label=f"bump(eps={self.epsilon:g}, kappa={self.kappa:g})",
        )


def make_bump(epsilon: float, kappa: float) -> BumpSpec:
    """Build the bump profile; requires eps in (0, 1) and kappa >= 4."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not kappa >= 4:
        raise ValueError("kappa must be >= 4 so that the support fits well inside a hemisphere")
    spec = BumpSpec(float(epsilon), float(kappa))
    bad = [k for k, ok in spec.verify().items() if not ok]
    if bad:
        raise ValueError(f"bump constraints violated: {bad}")
    return spec


def radial_sigma_flat(spec: BumpSpec, r, k: int, n: int, form: str = "product"):
    """sigma_k of the flat Hessian of the radial function f(|x|) on R^n.

    ``product``:    C(n-1, k-1) f'' (f'/r)^(k-1) + C(n-1, k) (f'/r)^k
    ``divergence``: C(n-1, k-1) r^(1-n) d/dr[(r^(n-k)/k) f'^k]
    Both vanish near r = 0, where f' is identically zero.
    """
    if not 1 <= k <= n:
        raise ValueError(f"order k={k} outside [1, {n}]")
    r = np.asarray(r, dtype=float)
    rs = np.where(r > 0, r, 1.0)
    d1, d2 = spec.df(r), spec.d2f(r)
    if form == "product":
        out = _binom(n - 1, k - 1) * d2 * (d1 / rs) ** (k - 1) + _binom(n - 1, k) * (d1 / rs) ** k
    elif form == "divergence":
        deriv = ((n - k) * rs ** (n - k - 1) * d1**k + rs ** (n - k) * k * d1 ** (k - 1) * d2) / k
        out = _binom(n - 1, k - 1) * rs ** (1 - n) * deriv
    else:
        raise ValueError(f"unknown form {form!r}")
    out = np.where(r > 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DirichletSigma:
    """int_{R^n} |Du|^2 sigma_k(D^2 u) dx per unit solid angle, two routes."""

    value: float  # integrated by parts
    direct: float
    plateau_bound: float


def dirichlet_sigma_integral(spec: BumpSpec, k: int, n: int, tol: float = 1e-13) -> DirichletSigma:
    """C(n-1,k-1) (n-k) 2/(k(k+2)) int r^(n-k-1) f'^(k+2) dr and the direct route.

    The angular factor |S^(n-1)| is not included.
    """
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    c = _binom(n - 1, k - 1)
    kw = dict(a=0.0, b=spec.support, tol=tol, breakpoints=spec.breakpoints, floor=0.0)
    ibp = c * (n - k) * 2 / (k * (k + 2)) * integrate_1d(lambda r: r ** (n - k - 1) * spec.df(r) ** (k + 2), **kw)
    direct = integrate_1d(lambda r: r ** (n - 1) * spec.df(r) ** 2 * radial_sigma_flat(spec, r, k, n), **kw)
    e = spec.epsilon
    plateau = (
        c * (n - k) * 2 / (k * (k + 2)) * (e / 2) ** (k + 2)
        * ((3 / 4) ** (n - k) - (1 / 2) ** (n - k)) * spec.kappa ** (k - n) / (n - k)
    )
    return DirichletSigma(ibp, direct, plateau)


# ---------------------------------------------------------------- packing


def cap_area(n: int, rho: float) -> float:
    """Area of a geodesic cap of radius rho on S^n."""
    return sphere_area(n - 1) * integrate_1d(lambda t: np.sin(t) ** (n - 1), 0.0, rho, tol=1e-14, floor=0.0)


@dataclass(frozen=True)
class PackedBumps:
    n: int
    kappa: float
    q: int
    mode: str
    c_n: float
    centers: np.ndarray | None = field(default=None, repr=False)

    def min_separation(self) -> float:
        if self.centers is None or len(self.centers) < 2:
            return math.inf
        d, _ = cKDTree(self.centers).query(self.centers, k=2)
        return float(d[:, 1].min())


def packing_constant(n: int) -> float:
    """c_n = |S^n| / (2^n omega_n): q ~ c_n kappa^n for large kappa."""
    omega = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return sphere_area(n) / (2**n * omega)


def _count(n: int, kappa: float) -> int:
    # a maximal 2/kappa-separated set: caps of chord radius 2/kappa cover S^n
    rho = 2 * math.asin(min(1.0, 1.0 / kappa))
    return max(1, int(math.floor(sphere_area(n) / cap_area(n, rho))))


def _greedy(n: int, kappa: float, seed: int, batch: int = 4096, patience: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    sep = 2.0 / kappa
    pts = np.empty((0, n + 1))
    tree = None
    misses = 0
    while misses < patience:
        cand = rng.standard_normal((batch, n + 1))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        if tree is not None:
            d, _ = tree.query(cand, k=1)
            cand = cand[d >= sep]
        nbrs = cKDTree(cand).query_ball_point(cand, sep) if len(cand) else []
        keep = np.zeros(len(cand), dtype=bool)
        for i, near in enumerate(nbrs):  # sequential within the batch
            keep[i] = not any(keep[j] for j in near if j < i)
        accepted = cand[keep]
        if len(accepted):
            pts = np.vstack([pts, accepted])
            tree = cKDTree(pts)
            misses = 0
        else:
            misses += 1
    return pts


def pack_caps(n: int, kappa: float, mode: str = "count", seed: int = 0) -> PackedBumps:
    """Centres with pairwise chordal distance >= 2/kappa.

    ``count`` returns the covering lower bound for the size of a maximal
    packing; ``greedy`` (n <= 3, kappa <= 32) places points by random
    sequential addition and verifies the separation.
    """
    if kappa < 4:
        raise ValueError("kappa must be >= 4")
    c_n = packing_constant(n)
    if mode == "greedy":
        if n > 3 or kappa > 32:
            warnings.warn("greedy packing limited to n <= 3, kappa <= 32; using count", RuntimeWarning)
            mode = "count"
        else:
            centers = _greedy(n, kappa, seed)
            out = PackedBumps(n, float(kappa), len(centers), "greedy", c_n, centers)
            if out.min_separation() < 2.0 / kappa - 1e-12:
                raise RuntimeError("greedy packing violated the separation")
            return out
    if mode != "count":
        raise ValueError(f"unknown mode {mode!r}")
    return PackedBumps(n, float(kappa), _count(n, kappa), "count", c_n)


# --------------------------------------------------------------- assembly


def bump_deviation(spec: BumpSpec, n: int, k: int, tol: float = 1e-11) -> float:
    """int over one cap of (sigma_k(h) dmu/dA - C(n,k)) dA, exact radial-graph formula."""
    prof = spec.profile(n)
    base = _binom(n, k)

    def integrand(t):
        j = prof.jets(t)
        return (sigma_k_h(j, k, n) * area_element(j, n) - base) * np.sin(t) ** (n - 1)

    # first-order pieces of size eps * C(n,k) * kappa^-n largely cancel
    atol = 1e-12 * _binom(n, k) * spec.epsilon * spec.support**n
    return sphere_area(n - 1) * integrate_1d(
        integrand, 0.0, spec.support, tol=tol, breakpoints=spec.breakpoints, floor=0.0, atol=atol
    )


def flat_expansion_deviation(spec: BumpSpec, n: int, k: int) -> float:
    """Per-bump deviation from the second-order expansion with flat-space radial integrals."""
    area = sphere_area(n - 1)
    kw = dict(a=0.0, b=spec.support, tol=1e-13, breakpoints=spec.breakpoints, floor=0.0)
    base = _binom(n, k)
    lin = base * (n - k) * integrate_1d(lambda r: r ** (n - 1) * spec.f(r), **kw)
    quad = base * (n - k) * (n - k - 1) / 2 * integrate_1d(lambda r: r ** (n - 1) * spec.f(r) ** 2, **kw)
    total = lin + quad
    for m in range(k + 1):
        w = (-1) ** m * _binom(n - m, k - m) * (n - k) * (k + 1) / (2 * (m + 1) * (n - m))
        if m == 0:
            val = integrate_1d(lambda r: r ** (n - 1) * spec.df(r) ** 2, **kw)
        else:
            val = dirichlet_sigma_integral(spec, m, n).value
        total += w * val
    return area * total


@dataclass(frozen=True)
class Counterexample:
    n: int
    k: int
    epsilon: float
    kappa: float
    q: int
    c_n: float
    per_bump: float  # deviation of one bump from the ball contribution
    I_k: float
    baseline: float

    @property
    def margin(self) -> float:
        return self.I_k - self.baseline

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "epsilon": self.epsilon, "kappa": self.kappa, "q": self.q,
            "c_n": self.c_n, "per_bump": self.per_bump, "I_k": self.I_k,
            "baseline": self.baseline, "margin": self.margin,
        }


def assemble_counterexample(n: int, k: int, epsilon: float, kappa: float, mode: str = "count", seed: int = 0) -> Counterexample:
    """I_k = C(n,k) |S^n| + q * (per-bump deviation); baseline C(n,k) |S^n|."""
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    spec = make_bump(epsilon, kappa)
    packing = pack_caps(n, kappa, mode, seed)
    dev = bump_deviation(spec, n, k)
    baseline = _binom(n, k) * sphere_area(n)
    return Counterexample(n, k, spec.epsilon, spec.kappa, packing.q, packing.c_n, dev, baseline + packing.q * dev, baseline)
