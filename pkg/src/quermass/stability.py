"""Deficit functionals and hypothesis predicates for nearly spherical domains.

Every ``deficit_*`` function normalizes its input the way the matching theorem
asks (volume, area or I_j' plus barycenter), evaluates the curvature integrals
at one common quadrature level and returns a :class:`DeficitReport`.  Constants
such as d(k, n) are never assumed; the report carries the measured ratio
deficit / int |grad u|^2 instead.  Hypothesis failures are flagged, not raised.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from ._common import NormalizationError, ball_volume, max_workers, sphere_area
from .axisym import AxisProfile, gauss_theta
from .harmonics import HarmonicSpectrum, dirichlet_energy, synthesize
from .spheregeom import SphereField, _refine, area_element, sigma_k_h, volume_and_barycenter
from .symfun import sigmas_matrix

THEOREMS = ("1.1", "1.2", "1.4", "1.5", "4.4", "4.5")


class NormalizationNotice(UserWarning):
    """Emitted when a deficit routine had to normalize its input."""


def _binom(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


@dataclass(frozen=True)
class Predicate:
    """A pointwise condition: whether it holds and the worst-point margin."""

    holds: bool
    margin: float


@dataclass(frozen=True)
class DeficitReport:
    """Curvature integrals and the measured deficit of one domain.

    ``signed``, ``positive`` and ``negative`` are indexed by j = 0..k
    (j = 0 is the area).  ``value`` is the theorem's left-hand side and
    ``deficit = value - baseline``.
    """

    theorem: str
    n: int
    k: int
    signed: tuple[float, ...]
    positive: tuple[float, ...]
    negative: tuple[float, ...]
    compensated: float
    value: float
    baseline: float
    deficit: float
    dirichlet: float
    ratio: float
    flags: dict[str, bool] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)
    residuals: dict[str, float] = field(default_factory=dict)
    jprime: int | None = None
    delta: float | None = None
    level: int = 0
    notes: tuple[str, ...] = ()

    @property
    def ratio_defined(self) -> bool:
        return bool(np.isfinite(self.ratio))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("signed", "positive", "negative", "notes"):
            d[key] = list(d[key])
        d["ratio"] = None if not self.ratio_defined else self.ratio
        return d


# ------------------------------------------------------------ normalization


def _measure(domain, kind: str, j: int = 0) -> tuple[float, float]:
    """(measured value, target) for the size constraint ``kind``."""
    n = domain.n
    if kind == "volume":
        return volume_and_barycenter(domain)[0], ball_volume(n + 1)
    return _parts(domain, j, tol=1e-12)[0][j], _binom(n, j) * sphere_area(n)


def _scale_power(n: int, kind: str, j: int) -> int:
    return n + 1 if kind == "volume" else n - j


def normalization_residuals(domain, kind: str = "volume", j: int = 0) -> dict[str, float]:
    """Relative size residual and barycenter norm."""
    val, target = _measure(domain, kind, j)
    bar = volume_and_barycenter(domain)[1]
    return {"size": float(val / target - 1.0), "barycenter": float(np.linalg.norm(bar))}


def normalize_to(domain, kind: str = "volume", j: int = 0, max_iter: int = 50, tol: float = 1e-8):
    """Rescale to match Vol(B) (kind 'volume') or I_j(B) (kind 'quermass'), then re-center.

    Iterates until both residuals are below ``tol``.  Returns the domain
    unchanged when it already satisfies them.
    """
    if kind not in ("volume", "quermass"):
        raise ValueError(f"unknown normalization {kind!r}")
    p = _scale_power(domain.n, kind, j)
    if p <= 0:
        raise ValueError(f"I_{j} is scale invariant for n={domain.n}; cannot normalize by it")
    d = domain
    for _ in range(max_iter):
        res = normalization_residuals(d, kind, j)
        if abs(res["size"]) <= tol and res["barycenter"] <= tol:
            return d
        d = d.rescaled((1.0 + res["size"]) ** (-1.0 / p))
        bar = volume_and_barycenter(d)[1]
        if np.linalg.norm(bar) > tol:
            d = d.translated(bar)
    raise NormalizationError(f"{kind} normalization did not converge in {max_iter} rounds")


def _prepare(domain, kind: str, j: int = 0):
    res = normalization_residuals(domain, kind, j)
    notes = []
    if abs(res["size"]) > 1e-8 or res["barycenter"] > 1e-8:
        label = "volume" if kind == "volume" else f"I_{j}"
        msg = f"input not normalized ({label} residual {res['size']:.2e}, barycenter {res['barycenter']:.2e}); normalized automatically"
        warnings.warn(msg, NormalizationNotice, stacklevel=3)
        notes.append(msg)
        domain = normalize_to(domain, kind, j)
        res = normalization_residuals(domain, kind, j)
    return domain, res, notes


# --------------------------------------------------------------- integrals


def _sigma_stack(jets, kmax: int, n: int) -> np.ndarray:
    out = [np.ones_like(np.asarray(jets.u, dtype=float))]
    out += [sigma_k_h(jets, j, n) for j in range(1, kmax + 1)]
    return np.array(out)


def _sign_breaks(profile: AxisProfile, kmax: int, samples: int = 4097) -> list[float]:
    """Zeros of sigma_1(h)..sigma_kmax(h) in (0, pi), where the parts have kinks."""
    n = profile.n
    t = np.linspace(0.0, math.pi, samples)[1:-1]
    s = _sigma_stack(profile.jets(t), kmax, n)
    cuts = []
    for j in range(1, kmax + 1):
        idx = np.nonzero(np.sign(s[j][:-1]) * np.sign(s[j][1:]) < 0)[0]
        g = lambda x, j=j: float(_sigma_stack(profile.jets(np.array([x])), j, n)[j][0])  # noqa: E731
        cuts += [brentq(g, t[i], t[i + 1], xtol=1e-15) for i in idx]
    return sorted(cuts)


def _parts(domain, kmax: int, tol: float | None = None, max_level: int | None = None):
    """Positive and negative parts of int sigma_j(h) dmu for j = 0..kmax at one level.

    Axisymmetric profiles are integrated piecewise between the sign changes
    of the sigma_j, so the parts stay spectrally accurate.  On S^2 grids the
    kinks cost accuracy, and the default tolerance drops to 1e-6 when any
    negative part is present.  Returns (signed, positive, negative, level, note).
    """
    n = domain.n
    note = None
    if isinstance(domain, AxisProfile):
        cuts = [0.0] + _sign_breaks(domain, kmax) + [math.pi]
        base = max(16, domain.quad_nodes // max(1, len(cuts) - 1))
        area = sphere_area(n - 1)

        def fn(level):
            acc = np.zeros(2 * (kmax + 1))
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                t, w = gauss_theta(base << level, lo, hi)
                jets = domain.jets(t)
                s = _sigma_stack(jets, kmax, n)
                dmu = area_element(jets, n) * w * area * np.sin(t) ** (n - 1)
                acc += np.concatenate([np.maximum(s, 0) @ dmu, np.maximum(-s, 0) @ dmu])
            return acc

        tol = 1e-11 if tol is None else tol
        max_level = 5 if max_level is None else max_level
    else:

        def fn(level):
            jets, w, _ = domain.quadrature(level)
            s = _sigma_stack(jets, kmax, n)
            dmu = area_element(jets, n) * w
            return np.concatenate([np.maximum(s, 0) @ dmu, np.maximum(-s, 0) @ dmu])

        if tol is None:
            tol = 1e-10
            if np.any(fn(0)[kmax + 2 :] > 0):
                tol = 1e-6
                note = "negative parts present on a grid domain; quadrature tolerance relaxed to 1e-6"
        max_level = 3 if max_level is None else max_level

    out, level = _refine(fn, tol, max_level)
    pos, neg = out[: kmax + 1], out[kmax + 1 :]
    return pos - neg, pos, neg, level, note


def c1_norm(domain, level: int = 1) -> float:
    """max(sup |u|, sup |grad u|) over the quadrature nodes."""
    jets, _, _ = domain.quadrature(level)
    g = np.sqrt(np.einsum("...i,...i->...", jets.grad, jets.grad))
    return float(max(np.max(np.abs(jets.u)), np.max(g)))


def _ratio(deficit: float, dirichlet: float) -> float:
    return deficit / dirichlet if dirichlet > 0 else float("nan")


def _report(theorem, domain, k, value_fn, kind, j=0, tol=None, **extra) -> DeficitReport:
    n = domain.n
    if not 0 <= k <= n:
        raise ValueError(f"order k={k} outside [0, {n}]")
    flags = dict(extra.pop("flags", {}))
    pre_notes = list(extra.pop("notes", ()))
    domain, res, notes = _prepare(domain, kind, j)
    notes = pre_notes + notes
    kmax = max(k, j)
    signed, pos, neg, level, qnote = _parts(domain, kmax, tol)
    if qnote:
        notes.append(qnote)
    compensated = float(signed[k] + neg[1 : k + 1].sum())
    value = float(value_fn(domain, signed, pos, neg, compensated))
    baseline = _binom(n, k) * sphere_area(n)
    deficit = value - baseline
    dir_e = dirichlet_energy(domain, level)
    flags["ratio_defined"] = dir_e > 0
    return DeficitReport(
        theorem=theorem,
        n=n,
        k=k,
        signed=tuple(float(x) for x in signed[: kmax + 1]),
        positive=tuple(float(x) for x in pos[: kmax + 1]),
        negative=tuple(float(x) for x in neg[: kmax + 1]),
        compensated=compensated,
        value=value,
        baseline=float(baseline),
        deficit=float(deficit),
        dirichlet=float(dir_e),
        ratio=float(_ratio(deficit, dir_e)),
        flags=flags,
        residuals={k_: float(v) for k_, v in res.items()},
        level=level,
        notes=tuple(notes),
        **extra,
    )


def _compensated(domain, signed, pos, neg, comp):
    return comp


# -------------------------------------------------------------- predicates


def _node_values(domain, level: int):
    jets, _, _ = domain.quadrature(level)
    return jets


def hypothesis_predicates(domain, k: int, level: int = 1) -> dict[str, Predicate]:
    """Pointwise hypotheses on the quadrature nodes.

    ``convex_m``: sigma_m(h) > 0 (k-convexity is all of them for m <= k).
    ``hessian_m``: (-1)^m sigma_m(D^2 u) >= (-1)^m C_n^m, as stated for the
    sigma_k result under a Hessian condition.  Margins are worst-point values
    of the left minus the right side.
    """
    n = domain.n
    if not 1 <= k <= n:
        raise ValueError(f"order k={k} outside [1, {n}]")
    jets = _node_values(domain, level)
    sh = _sigma_stack(jets, k, n)
    su = sigmas_matrix(jets.hess, k)
    out: dict[str, Predicate] = {}
    for m in range(1, k + 1):
        lo = float(np.min(sh[m]))
        out[f"convex_{m}"] = Predicate(lo > 0, lo)
        gap = float(np.min((-1) ** m * (su[m] - _binom(n, m))))
        out[f"hessian_{m}"] = Predicate(gap >= 0, gap)
    out["k_convex"] = Predicate(all(out[f"convex_{m}"].holds for m in range(1, k + 1)), min(out[f"convex_{m}"].margin for m in range(1, k + 1)))
    out["hessian_all"] = Predicate(all(out[f"hessian_{m}"].holds for m in range(1, k + 1)), min(out[f"hessian_{m}"].margin for m in range(1, k + 1)))
    return out


def _flatten(preds: dict[str, Predicate]) -> tuple[dict[str, bool], dict[str, float]]:
    return {k: p.holds for k, p in preds.items()}, {k: p.margin for k, p in preds.items()}


# ---------------------------------------------------------------- theorems


def deficit_compensated(domain, k: int, tol: float | None = None) -> DeficitReport:
    """int sigma_k + sum_{j<=k} sigma_j^- dmu - C_n^k |S^n| at Vol = Vol(B), bar = 0."""
    n = domain.n
    flags = {"n_ge_5": n >= 5, "in_theorem": n >= 5 and 1 <= k <= (n - 1) // 2}
    return _report("1.1", domain, k, _compensated, "volume", tol=tol, flags=flags)


def deficit_sigma2plus(domain, M: float | None = None, tol: float | None = None, level: int = 1) -> DeficitReport:
    """int sigma_2^+ dmu - C_n^2 |S^n| with the -M <= Delta u <= n check.

    With M unset the lower bound is recorded (margin ``laplacian_min``) but
    flagged as satisfied, since some finite M always exists.
    """
    n = domain.n
    if n < 2:
        raise ValueError("sigma_2 needs n >= 2")
    d, _, notes = _prepare(domain, "volume")
    jets = _node_values(d, level)
    lap = np.trace(jets.hess, axis1=-2, axis2=-1)
    lmax, lmin = float(np.max(lap)), float(np.min(lap))
    flags = {
        "n_ge_5": n >= 5,
        "laplacian_upper": lmax <= n,
        "laplacian_lower": True if M is None else lmin >= -M,
    }
    rep = _report("4.4", d, 2, lambda dom, s, p, q, c: p[2], "volume", tol=tol, flags=flags, notes=notes)
    rep.margins.update({"laplacian_max": lmax, "laplacian_min": lmin, "upper_margin": n - lmax})
    return rep


def thm12_pointwise(domain, k: int, jprime: int, level: int = 1) -> dict[str, Predicate]:
    """Both pointwise sums of the I_j'-normalized sigma_k result."""
    n = domain.n
    jets = _node_values(domain, level)
    sh = _sigma_stack(jets, max(k, jprime), n)
    p1 = sum(((-1) ** m * sh[m] for m in range(1, jprime + 1)), np.zeros_like(sh[0]))
    p2 = sum(
        ((_binom(n, k + 1) / _binom(n, m) + (-1) ** (k - m)) * sh[m] for m in range(jprime + 1, k + 1)),
        np.zeros_like(sh[0]),
    )
    m1, m2 = float(np.min(p1)), float(np.min(p2))
    return {"first_sum": Predicate(m1 >= 0, m1), "second_sum": Predicate(m2 >= 0, m2)}


def deficit_thm12(domain, k: int, jprime: int, tol: float | None = None, level: int = 1) -> DeficitReport:
    """int sigma_k dmu - C_n^k |S^n| at I_j'(Omega) = I_j'(B), bar = 0."""
    n = domain.n
    if not 0 <= jprime <= n:
        raise ValueError(f"j'={jprime} outside [0, {n}]")
    d, _, notes = _prepare(domain, "quermass", jprime)
    preds = thm12_pointwise(d, k, jprime, level)
    flags, margins = _flatten(preds)
    flags.update(
        {
            "n_ge_5": n >= 5,
            "jprime_even": jprime % 2 == 0,
            "k_even": k % 2 == 0,
            "jprime_lt_k": jprime < k,
            "k_gt_n_minus_jprime_minus_2": k > n - jprime - 2,
        }
    )
    flags["in_theorem"] = all(flags[x] for x in ("n_ge_5", "jprime_even", "k_even", "jprime_lt_k", "k_gt_n_minus_jprime_minus_2"))
    rep = _report("1.2", d, k, lambda dom, s, p, q, c: s[k], "quermass", jprime, tol=tol, flags=flags, jprime=jprime, notes=notes)
    rep.margins.update(margins)
    return rep


def deficit_thm14(domain, k: int, delta: float, tol: float | None = None) -> DeficitReport:
    """Compensated deficit at I_0(Omega) = |S^n|, bar = 0; margin = deficit + delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = domain.n
    flags = {"n_ge_5": n >= 5, "in_theorem": n >= 5 and k < n // 2}
    rep = _report("1.4", domain, k, _compensated, "quermass", 0, tol=tol, flags=flags, delta=float(delta))
    rep.margins["delta_margin"] = rep.deficit + delta
    rep.flags["above_minus_delta"] = rep.deficit >= -delta
    return rep


def _is_axisymmetric(domain, tol: float = 1e-12) -> bool:
    if isinstance(domain, AxisProfile):
        return True
    if isinstance(domain, SphereField):
        c = np.array(domain.coeffs)
        L = domain.lmax
        c[:, L] = 0.0
        return float(np.abs(c).max(initial=0.0)) <= tol * max(1.0, float(np.abs(domain.coeffs).max(initial=0.0)))
    return False


def deficit_thm15(domain, k: int, tol: float | None = None) -> DeficitReport:
    """Compensated deficit at I_0(Omega) = |S^n| for axially symmetric domains."""
    n = domain.n
    flags = {"n_ge_5": n >= 5, "axisymmetric": _is_axisymmetric(domain)}
    flags["in_theorem"] = flags["n_ge_5"] and flags["axisymmetric"]
    return _report("1.5", domain, k, _compensated, "quermass", 0, tol=tol, flags=flags)


def deficit_thm45(domain, k: int, tol: float | None = None, level: int = 1) -> DeficitReport:
    """int sigma_k dmu - C_n^k |S^n| at Vol = Vol(B) with the Hessian condition flagged."""
    n = domain.n
    d, _, notes = _prepare(domain, "volume")
    flags, margins = _flatten({k_: p for k_, p in hypothesis_predicates(d, k, level).items() if k_.startswith("hessian")})
    flags.update({"n_ge_5": n >= 5, "k_lt_n_minus_1": k < n - 1})
    flags["in_theorem"] = flags["n_ge_5"] and flags["k_lt_n_minus_1"]
    rep = _report("4.5", d, k, lambda dom, s, p, q, c: s[k], "volume", tol=tol, flags=flags, notes=notes)
    rep.margins.update(margins)
    return rep


def run_theorem(theorem: str, domain, k: int = 1, jprime: int = 0, delta: float = 1e-3, M: float | None = None) -> DeficitReport:
    """Dispatch on a theorem id from :data:`THEOREMS`."""
    if theorem == "1.1":
        return deficit_compensated(domain, k)
    if theorem == "1.2":
        return deficit_thm12(domain, k, jprime)
    if theorem == "1.4":
        return deficit_thm14(domain, k, delta)
    if theorem == "1.5":
        return deficit_thm15(domain, k)
    if theorem == "4.4":
        return deficit_sigma2plus(domain, M)
    if theorem == "4.5":
        return deficit_thm45(domain, k)
    raise ValueError(f"unknown theorem {theorem!r}; choose from {', '.join(THEOREMS)}")


# ------------------------------------------------------ quadratic expansion


def expansion_second_order(field, k: int, n: int | None = None, route: str = "hessian", level: int = 1) -> float:
    """Quadratic part of I_k(Omega) - I_k(B) for a normalized perturbation.

    route 'hessian' uses sigma_m(D^2 u); route 'curvature' substitutes
    sum_j (-1)^j C_{n-j}^{m-j} sigma_j(h), which agrees up to O(eps^3).
    """
    n = field.n if n is None else n
    if n != field.n:
        raise ValueError(f"field lives on S^{field.n}, not S^{n}")
    if not 0 <= k <= n:
        raise ValueError(f"order k={k} outside [0, {n}]")
    jets, w, _ = field.quadrature(level)
    g2 = np.einsum("...i,...i->...", jets.grad, jets.grad)
    c = _binom(n, k) * (n - k) * (k + 1)
    total = c / (2 * n) * g2 - c / 2 * jets.u**2
    if k == 0:
        return float(np.sum(w * total))
    if route == "hessian":
        s = sigmas_matrix(jets.hess, k)
    elif route == "curvature":
        sh = _sigma_stack(jets, k, n)
        s = np.array([sum((-1) ** j * _binom(n - j, m - j) * sh[j] for j in range(m + 1)) for m in range(k + 1)])
    else:
        raise ValueError(f"unknown route {route!r}")
    for m in range(1, k + 1):
        coef = (-1) ** m * _binom(n - m, k - m) * (n - k) * (k + 1) / (2 * (m + 1) * (n - m))
        total = total + coef * g2 * s[m]
    return float(np.sum(w * total))


def fit_exponent(ts: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(t)."""
    return float(np.polyfit(np.log(ts), np.log(np.abs(errors)), 1)[0])


# ------------------------------------------------------------------ families


def random_axisym_family(size: int = 30, n: int = 5, c1: float = 0.02, lmax: int = 6, seed: int = 0) -> list[AxisProfile]:
    """Normalized zonal perturbations with random degree-2..lmax content and C^1 norm <= c1."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(size):
        spec = np.zeros(lmax + 1)
        spec[2:] = rng.standard_normal(lmax - 1) / np.arange(2, lmax + 1)
        scale = rng.uniform(0.25, 0.9) * c1 / c1_norm(synthesize(HarmonicSpectrum(n, spec, "zonal")), 2)
        prof = synthesize(HarmonicSpectrum(n, scale * spec, "zonal"))
        prof = normalize_to(prof, "volume")
        if c1_norm(prof, 2) > c1:
            raise RuntimeError("normalization pushed the C^1 norm over the bound")
        out.append(prof)
    return out


def sweep(domains: Sequence, fn: Callable, workers: int | None = None) -> list:
    """Apply ``fn`` to each domain, threaded up to QUERMASS_THREADS."""
    workers = max_workers() if workers is None else workers
    if workers <= 1:
        return [fn(d) for d in domains]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, domains))
