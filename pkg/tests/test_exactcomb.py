from fractions import Fraction
from itertools import product
from math import comb, factorial

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quermass.exactcomb import (
    alt_binomial_closed_form,
    alt_binomial_sum,
    beta_identity,
    beta_int,
    binom,
    corollary_sums,
    curvature_weight,
    curvature_weight_closed,
    derivative_binomials,
    eq222_coefficients,
    high_freq_coefficient,
    hockey_stick,
    identity_suite,
    involution_check,
    involution_matrix,
    low_freq_coefficient,
    low_freq_extra_term,
    poincare_gate,
    telescoping_T,
)


def brute_beta(a, b):
    # B(a, b) = int_0^1 x^(a-1) (1-x)^(b-1) dx, expanded binomially
    return sum(Fraction((-1) ** i * comb(b - 1, i), a + i) for i in range(b))


@pytest.mark.parametrize("n,k,expected", [(5, 2, 10), (7, 0, 1), (4, 6, 0), (3, -1, 0)])
def test_binom_examples(n, k, expected):
    assert binom(n, k) == expected
    assert isinstance(binom(n, k), Fraction)


@given(st.integers(1, 12), st.integers(1, 12))
def test_beta_int_matches_expansion(a, b):
    assert beta_int(a, b) == brute_beta(a, b)


def test_beta_int_domain():
    with pytest.raises(ValueError):
        beta_int(0, 3)


@pytest.mark.parametrize("n,t,expected", [(5, 2, 6), (6, 3, -10), (9, 0, 1)])
def test_alt_binomial_examples(n, t, expected):
    assert alt_binomial_sum(n, t) == expected


def test_alt_binomial_sweep():
    for n in range(1, 31):
        for t in range(n + 1):
            assert alt_binomial_sum(n, t) == (-1) ** t * comb(n - 1, t)
            assert alt_binomial_sum(n, t) == alt_binomial_closed_form(n, t)


@pytest.mark.parametrize("n,t", [(0, 0), (3, 4), (3, -1)])
def test_alt_binomial_domain(n, t):
    with pytest.raises(ValueError):
        alt_binomial_sum(n, t)


def test_corollary_examples():
    c = corollary_sums(6, 2, 3)
    assert c.first == 9 == -6 + 15
    assert c.second == 20
    assert corollary_sums(6, 0, 3).second == 11 == 20 - 15 + 6
    assert corollary_sums(6, 0, 3).first == 0


def test_corollary_sweep_and_even_sign():
    for n in range(1, 21):
        for k in range(1, n + 1):
            for jp in range(k):
                c = corollary_sums(n, jp, k)
                assert c.holds
                if jp % 2 == 0 and jp < n:
                    assert c.first >= 0


def test_corollary_domain():
    with pytest.raises(ValueError):
        corollary_sums(5, 3, 3)


def test_beta_identity_example():
    b = beta_identity(5, 2, 0)
    assert b.lhs == b.rhs == Fraction(11, 360)
    assert b.lhs == Fraction(1, 10) - Fraction(1, 8) + Fraction(1, 18)
    assert not b.negative


def test_beta_identity_sweep():
    for n in range(1, 21):
        for k in range(n):
            for j in range(k + 1):
                b = beta_identity(n, k, j)
                assert b.lhs == b.rhs
                assert b.negative == (b.lhs < 0)
                if (k - j) % 2 == 0:
                    assert not b.negative
            d = beta_identity(n, k, k)
            assert d.lhs == Fraction(1, (k + 1) * (n - k))


def test_beta_identity_domain():
    with pytest.raises(ValueError):
        beta_identity(3, 3, 0)


def test_frequency_coefficients_examples():
    assert high_freq_coefficient(5, 1) == Fraction(3, 2) == 4 - Fraction(5, 2)
    assert low_freq_extra_term(5, 1) == Fraction(5, 2)
    assert low_freq_coefficient(5, 1) == 4
    assert poincare_gate(5, 1)
    assert 12 * Fraction(5, 2) == 30 > 20


def test_high_freq_5_2_against_termwise_oracle():
    n, k = 5, 2
    total = Fraction(0)
    for m in range(k + 1):
        total += Fraction((-1) ** m * comb(n - m, k - m) * comb(n, m) * (n - k) * (k + 1), 2 * (m + 1) * (n - m))
    assert high_freq_coefficient(n, k) == total == Fraction(11, 4)


def test_frequency_sweeps():
    for n in range(3, 31):
        for k in range(1, n - 1):
            assert high_freq_coefficient(n, k) > 0
            if n <= 20:
                assert poincare_gate(n, k)


@pytest.mark.parametrize("n,k", [(5, 4), (5, 0), (3, 2)])
def test_frequency_domain(n, k):
    with pytest.raises(ValueError):
        high_freq_coefficient(n, k)


def test_involution_examples():
    a3 = involution_matrix(3)
    assert a3.entries[2] == (3, -2, 1, 0)
    assert involution_matrix(1).entries == ((1, 0), (1, -1))
    for n in range(1, 31):
        a = involution_check(n)
        assert all(a.entries[i][i] == (-1) ** i * 1 or a.entries[i][i] == 1 for i in range(n + 1))
        assert all(a.entries[i][j] == 0 for i in range(n + 1) for j in range(i + 1, n + 1))


def test_involution_diagonal_is_signed_identity():
    # A_kk = (-1)^k C_{n-k}^0: unit magnitude, alternating sign
    a = involution_matrix(6)
    assert [a.entries[i][i] for i in range(7)] == [(-1) ** i for i in range(7)]


def test_eq222_examples():
    e = eq222_coefficients(5, 4, 2)
    assert e.A_positive_predicted and e.A > 0
    # m = k weight evaluated from the defining formula
    assert e.tail[4] == Fraction(5, 12) * (Fraction(comb(5, 5), comb(5, 4)) + 1) == Fraction(1, 2)
    for n in range(3, 15):
        for k in range(1, n):
            for jp in range(0, k, 2):
                if k + jp + 2 > n:
                    a = eq222_coefficients(n, k, jp).A
                    scale = Fraction(comb(n, k) * (n - k), 2 * (n + 1))
                    if k % 2 == 0:
                        assert a == scale * (Fraction(1, comb(n, k + 1)) - Fraction(1, comb(n, jp + 1)))
                        assert a > 0
                    else:
                        # odd k flips the first term: A = -scale (1/C_n^{k+1} + 1/C_n^{j'+1}) < 0
                        assert a == -scale * (Fraction(1, comb(n, k + 1)) + Fraction(1, comb(n, jp + 1)))
                        assert a < 0


def test_eq222_domain():
    with pytest.raises(ValueError):
        eq222_coefficients(5, 3, 1)


def test_curvature_weight_closed_form():
    for n in range(2, 16):
        for k in range(n):
            for ell in range(k + 1):
                assert curvature_weight(n, k, ell) == curvature_weight_closed(n, k, ell)


def test_telescoping_examples():
    t = telescoping_T(3, 1)
    assert t.direct == 10 - (3 + 4) == 3
    assert t.claimed == -3
    assert not t.matches_claim
    assert telescoping_T(2, 1).direct == 4 - 2 == 2


def test_telescoping_direct_is_positive_k_minus_m_plus_1():
    for k in range(1, 25):
        for m in range(k):
            t = telescoping_T(k, m)
            assert t.direct == t.pre_pascal == k - m + 1


def test_hockey_stick():
    for k, m in product(range(1, 25), range(24)):
        if m < k:
            lhs, rhs = hockey_stick(k, m)
            assert lhs == rhs


def test_derivative_binomials():
    for n in range(2, 21):
        for m in range(1, n):
            for j in range(1, m + 1):
                assert derivative_binomials(n, m, j) == (True, True)


def test_identity_suite_only_known_discrepancy_fails():
    recs = identity_suite(8)
    bad = {r.identity for r in recs if not r.passed}
    assert bad == {"telescoping_claimed"}
    d = recs[0].to_dict()
    assert set(d) == {"identity", "params", "lhs", "rhs", "pass"}


@settings(max_examples=50)
@given(st.integers(1, 40), st.data())
def test_binom_factorial_oracle(n, data):
    k = data.draw(st.integers(0, n))
    assert binom(n, k) == Fraction(factorial(n), factorial(k) * factorial(n - k))
