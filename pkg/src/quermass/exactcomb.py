"""Exact rational evaluation of the binomial and Beta-function identities.

Everything in this module works over :class:`fractions.Fraction`; floats only
appear when a caller converts a result at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial

ExactRational = Fraction


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def binom(n: int, k: int) -> Fraction:
    """Binomial coefficient C_n^k, zero outside ``0 <= k <= n``."""
    if n < 0 or k < 0 or k > n:
        return Fraction(0)
    return Fraction(comb(n, k))


def beta_int(a: int, b: int) -> Fraction:
    """Beta function at positive integers, (a-1)!(b-1)!/(a+b-1)!."""
    _require(a >= 1 and b >= 1, f"Beta needs positive integer arguments, got ({a}, {b})")
    return Fraction(factorial(a - 1) * factorial(b - 1), factorial(a + b - 1))


def alt_binomial_sum(n: int, t: int) -> Fraction:
    """Partial alternating sum sum_{r=0}^{t} (-1)^r C_n^r.

    The closed form (-1)^t C_{n-1}^t is available as
    :func:`alt_binomial_closed_form` so the two can be compared.
    """
    _require(n >= 1 and 0 <= t <= n, f"need n >= 1 and 0 <= t <= n, got n={n}, t={t}")
    return sum((Fraction((-1) ** r) * binom(n, r) for r in range(t + 1)), Fraction(0))


def alt_binomial_closed_form(n: int, t: int) -> Fraction:
    _require(n >= 1 and 0 <= t <= n, f"need n >= 1 and 0 <= t <= n, got n={n}, t={t}")
    return (-1) ** t * binom(n - 1, t)


@dataclass(frozen=True)
class CorollarySums:
    first: Fraction
    second: Fraction
    first_closed: Fraction
    second_closed: Fraction

    @property
    def holds(self) -> bool:
        return self.first == self.first_closed and self.second == self.second_closed


def corollary_sums(n: int, jprime: int, k: int) -> CorollarySums:
    """Both partial alternating sums around a split index ``jprime``.

    ``first``  = sum_{s=1}^{j'} (-1)^s C_n^s          (empty when j' = 0)
    ``second`` = sum_{m=j'+1}^{k} (-1)^(k-m) C_n^m
    """
    _require(jprime >= 0 and jprime + 1 <= k <= n,
             f"need 0 <= j' and j'+1 <= k <= n, got n={n}, j'={jprime}, k={k}")
    first = sum((Fraction((-1) ** s) * binom(n, s) for s in range(1, jprime + 1)), Fraction(0))
    second = sum((Fraction((-1) ** (k - m)) * binom(n, m) for m in range(jprime + 1, k + 1)),
                 Fraction(0))
    first_closed = (-1) ** jprime * binom(n - 1, jprime) - 1
    second_closed = binom(n - 1, k) - (-1) ** (k + jprime) * binom(n - 1, jprime)
    return CorollarySums(first, second, first_closed, second_closed)


@dataclass(frozen=True)
class BetaIdentity:
    lhs: Fraction
    rhs: Fraction
    negative: bool


def beta_identity(n: int, k: int, j: int) -> BetaIdentity:
    """Alternating factorial sum against its Beta-function closed form.

    ``negative`` is the predicted sign rule: j > n-k-1 and k-j odd.
    """
    _require(n > k >= j >= 0, f"need n > k >= j >= 0, got n={n}, k={k}, j={j}")
    lhs = Fraction(0)
    for m in range(j, k + 1):
        lhs += Fraction((-1) ** (j + m), factorial(m - j) * factorial(k - m) * (m + 1) * (n - m))
    rhs = Fraction(1, factorial(k - j) * (n + 1)) * (
        beta_int(j + 1, k - j + 1) + (-1) ** (k - j) * beta_int(n - k, k - j + 1))
    negative = j > n - k - 1 and (k - j) % 2 == 1
    return BetaIdentity(lhs, rhs, negative)


def _grad_weight(n: int, k: int, m: int) -> Fraction:
    # (n-k)(k+1) / (2(m+1)(n-m)), the weight in front of |grad u|^2 sigma_m(D^2 u)
    return Fraction((n - k) * (k + 1), 2 * (m + 1) * (n - m))


def expansion_weight(n: int, k: int, m: int) -> Fraction:
    """(-1)^m C_{n-m}^{k-m} (n-k)(k+1)/(2(m+1)(n-m)).

    Coefficient of |grad u|^2 sigma_m(D^2 u) in the second-order expansion of
    the k-th curvature integral.
    """
    _require(0 <= m <= k < n, f"need 0 <= m <= k < n, got n={n}, k={k}, m={m}")
    return (-1) ** m * binom(n - m, k - m) * _grad_weight(n, k, m)


def high_freq_coefficient(n: int, k: int) -> Fraction:
    """Coefficient of |grad u_2|^2 once sigma_m(D^2 u) is frozen at C_n^m."""
    _require(1 <= k < n - 1, f"need 1 <= k < n-1, got n={n}, k={k}")
    return sum((expansion_weight(n, k, m) * binom(n, m) for m in range(k + 1)), Fraction(0))


def low_freq_extra_term(n: int, k: int) -> Fraction:
    _require(1 <= k < n - 1, f"need 1 <= k < n-1, got n={n}, k={k}")
    return binom(n - 1, k - 1) * Fraction((n - k) * (k + 1), 2 * 2 * (n - 1)) * binom(n, 1)


def low_freq_coefficient(n: int, k: int) -> Fraction:
    """Coefficient of |grad u_1|^2: the high-frequency one plus the sigma_1 transfer."""
    return high_freq_coefficient(n, k) + low_freq_extra_term(n, k)


def poincare_gate(n: int, k: int) -> bool:
    """Whether the extra low-frequency term beats the u^2 weight under
    the degree-2 Poincare constant 2(n+1)."""
    return 2 * (n + 1) * low_freq_extra_term(n, k) > binom(n, k) * Fraction((n - k) * (k + 1), 2)


@dataclass(frozen=True)
class InvolutionMatrix:
    n: int
    entries: tuple[tuple[Fraction, ...], ...]

    def square(self) -> tuple[tuple[Fraction, ...], ...]:
        size = self.n + 1
        a = self.entries
        return tuple(
            tuple(sum((a[i][m] * a[m][j] for m in range(size)), Fraction(0)) for j in range(size))
            for i in range(size))

    def is_involution(self) -> bool:
        size = self.n + 1
        sq = self.square()
        return all(sq[i][j] == (1 if i == j else 0) for i in range(size) for j in range(size))


def involution_matrix(n: int) -> InvolutionMatrix:
    """Lower-triangular A_{km} = (-1)^m C_{n-m}^{k-m}, mapping sigma(D^2u) to sigma(h)."""
    _require(n >= 1, f"need n >= 1, got {n}")
    rows = tuple(
        tuple(Fraction((-1) ** m) * binom(n - m, k - m) if k >= m else Fraction(0)
              for m in range(n + 1))
        for k in range(n + 1))
    return InvolutionMatrix(n, rows)


def involution_check(n: int) -> InvolutionMatrix:
    a = involution_matrix(n)
    if not a.is_involution():
        raise AssertionError(f"A^2 != Id for n={n}")
    return a


@dataclass(frozen=True)
class Eq222Coefficients:
    n: int
    k: int
    jprime: int
    A: Fraction
    tail: dict[int, Fraction] = field(default_factory=dict)
    A_positive_predicted: bool = False


def eq222_coefficients(n: int, k: int, jprime: int) -> Eq222Coefficients:
    """Coefficients of |grad u|^2 sigma_m(h) after the I_{j'} constraint is used.

    ``A`` multiplies every m <= j' (with sign (-1)^m); ``tail[m]`` is the weight
    for j' < m <= k.  ``A_positive_predicted`` is the sufficient condition
    j'+1+k+1 > n with j' even.
    """
    _require(jprime % 2 == 0 and 0 <= jprime < k < n,
             f"need even j' and 0 <= j' < k < n, got n={n}, k={k}, j'={jprime}")
    a = binom(n, k) * (n - k) / (2 * (n + 1)) * (
        Fraction((-1) ** k) / binom(n, k + 1) - Fraction((-1) ** jprime) / binom(n, jprime + 1))
    tail = {
        m: Fraction(k + 1, 2 * (n + 1)) * (binom(n, k + 1) / binom(n, m) + (-1) ** (k - m))
        for m in range(jprime + 1, k + 1)
    }
    return Eq222Coefficients(n, k, jprime, a, tail, jprime + 1 + k + 1 > n)


def curvature_weight(n: int, k: int, ell: int) -> Fraction:
    """Weight of |grad u|^2 sigma_ell(h) obtained by pushing the expansion
    weights through the involution (double sum, no closed form used)."""
    _require(0 <= ell <= k < n, f"need 0 <= ell <= k < n, got n={n}, k={k}, ell={ell}")
    return sum((Fraction((-1) ** (m + ell)) * binom(n - m, k - m) * binom(n - ell, m - ell)
                * _grad_weight(n, k, m) for m in range(ell, k + 1)), Fraction(0))


def curvature_weight_closed(n: int, k: int, ell: int) -> Fraction:
    """(k+1)/(2(n+1)) (C_n^{k+1}/C_n^ell + (-1)^(k-ell))."""
    return Fraction(k + 1, 2 * (n + 1)) * (binom(n, k + 1) / binom(n, ell) + (-1) ** (k - ell))


@dataclass(frozen=True)
class TelescopingReport:
    k: int
    m: int
    direct: Fraction
    pre_pascal: Fraction
    claimed: Fraction

    @property
    def matches_claim(self) -> bool:
        return self.direct == self.claimed


def telescoping_T(k: int, m: int) -> TelescopingReport:
    """T = C_{k+2}^{m+2} - sum_{t=0}^{k-m-1} (t+1) C_{k-t}^m.

    ``direct`` is the summed value, ``pre_pascal`` the expression obtained
    from the hockey-stick sums before Pascal's rule, and ``claimed`` the
    printed closed form -(k-m+1).  Nothing is reconciled here.
    """
    _require(0 <= m < k, f"need 0 <= m < k, got k={k}, m={m}")
    s = sum((Fraction(t + 1) * binom(k - t, m) for t in range(k - m)), Fraction(0))
    direct = binom(k + 2, m + 2) - s
    inner = (k + 1 - m) * binom(k + 1, m + 1) - (m + 1) * binom(k + 1, m + 2) - (k - m + 1)
    pre_pascal = binom(k + 2, m + 2) - inner
    return TelescopingReport(k, m, direct, pre_pascal, Fraction(-(k - m + 1)))


def hockey_stick(k: int, m: int) -> tuple[Fraction, Fraction]:
    """(sum_{j=m+1}^{k} C_j^m, C_{k+1}^{m+1} - 1)."""
    _require(0 <= m < k, f"need 0 <= m < k, got k={k}, m={m}")
    return sum((binom(j, m) for j in range(m + 1, k + 1)), Fraction(0)), binom(k + 1, m + 1) - 1


def derivative_binomials(n: int, m: int, j: int) -> tuple[bool, bool]:
    """The two rewrites used when differentiating the axisymmetric primitive.

    (C_{n-1}^{m-1}/m) C_m^{m-j} j     == C_{n-j}^{m-j} C_{n-1}^{j-1}
    (C_{n-1}^{m-1}/m) C_m^{m-j} (n-j) == C_{n-j}^{m-j} C_{n-1}^{j}
    """
    _require(1 <= j <= m <= n - 1, f"need 1 <= j <= m <= n-1, got n={n}, m={m}, j={j}")
    base = binom(n - 1, m - 1) / m * binom(m, m - j)
    return (base * j == binom(n - j, m - j) * binom(n - 1, j - 1),
            base * (n - j) == binom(n - j, m - j) * binom(n - 1, j))


@dataclass(frozen=True)
class IdentityRecord:
    identity: str
    params: dict
    lhs: Fraction
    rhs: Fraction

    @property
    def passed(self) -> bool:
        return self.lhs == self.rhs

    def to_dict(self) -> dict:
        return {"identity": self.identity, "params": self.params,
                "lhs": str(self.lhs), "rhs": str(self.rhs), "pass": self.passed}


def identity_suite(n_max: int = 20) -> list[IdentityRecord]:
    """Every exact identity over its full parameter range up to ``n_max``.

    The telescoping record compares the direct value with the printed closed
    form, so it is expected to fail; it is included to expose the mismatch.
    """
    out: list[IdentityRecord] = []
    for n in range(1, n_max + 1):
        for t in range(n + 1):
            out.append(IdentityRecord("alt_binomial_sum", {"n": n, "t": t},
                                      alt_binomial_sum(n, t), alt_binomial_closed_form(n, t)))
        for k in range(1, n + 1):
            for jp in range(0, k):
                c = corollary_sums(n, jp, k)
                out.append(IdentityRecord("corollary_first", {"n": n, "jprime": jp, "k": k},
                                          c.first, c.first_closed))
                out.append(IdentityRecord("corollary_second", {"n": n, "jprime": jp, "k": k},
                                          c.second, c.second_closed))
                if jp % 2 == 0 and jp < n:
                    out.append(IdentityRecord("corollary_even_nonneg",
                                              {"n": n, "jprime": jp, "k": k},
                                              Fraction(int(c.first >= 0)), Fraction(1)))
        for k in range(n):
            for j in range(k + 1):
                b = beta_identity(n, k, j)
                out.append(IdentityRecord("beta_identity", {"n": n, "k": k, "j": j}, b.lhs, b.rhs))
                out.append(IdentityRecord("beta_sign_rule", {"n": n, "k": k, "j": j},
                                          Fraction(int(b.lhs < 0)), Fraction(int(b.negative))))
                out.append(IdentityRecord("involution_pushforward", {"n": n, "k": k, "ell": j},
                                          curvature_weight(n, k, j),
                                          curvature_weight_closed(n, k, j)))
        a = involution_matrix(n)
        out.append(IdentityRecord("involution_square", {"n": n},
                                  Fraction(int(a.is_involution())), Fraction(1)))
        for m in range(1, n):
            for j in range(1, m + 1):
                first, second = derivative_binomials(n, m, j)
                out.append(IdentityRecord("derivative_binomials", {"n": n, "m": m, "j": j},
                                          Fraction(int(first and second)), Fraction(1)))
        for k in range(1, n - 1):
            out.append(IdentityRecord("high_freq_positive", {"n": n, "k": k},
                                      Fraction(int(high_freq_coefficient(n, k) > 0)), Fraction(1)))
            out.append(IdentityRecord("poincare_gate", {"n": n, "k": k},
                                      Fraction(int(poincare_gate(n, k))), Fraction(1)))
    for k in range(1, n_max + 1):
        for m in range(k):
            hs, closed = hockey_stick(k, m)
            out.append(IdentityRecord("hockey_stick", {"k": k, "m": m}, hs, closed))
            t = telescoping_T(k, m)
            out.append(IdentityRecord("telescoping_pre_pascal", {"k": k, "m": m},
                                      t.direct, t.pre_pascal))
            out.append(IdentityRecord("telescoping_claimed", {"k": k, "m": m},
                                      t.direct, t.claimed))
    return out
