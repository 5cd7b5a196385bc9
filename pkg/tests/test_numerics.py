from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import iv

from hypershift.errors import ConfigError, PrecisionUndecidable
from hypershift.numerics import (certified_floor, decimal, digamma, env_precision_bits, escalate,
                                 harmonic, harmonic_crossing, harmonic_exact, hi, lo, log1mexp,
                                 logaddexp, mid, precision, rational_sum, shifted_reciprocal_sum,
                                 to_iv)

from oracles import harmonic_brute


def contains(interval, value):
    return lo(interval) <= value <= hi(interval)


def test_precision_restores_both_contexts():
    before = (iv.prec, mpmath.mp.prec)
    with precision(300):
        assert iv.prec == 300 and mpmath.mp.prec == 300
    assert (iv.prec, mpmath.mp.prec) == before


def test_mid_uses_interval_precision():
    with precision(400):
        x = to_iv(Fraction(1, 3))
    # outside the block mp.prec is back to 53 bits; mid must still resolve the 400-bit interval
    with precision(400):
        m = mid(x)
        assert abs(m - mpmath.mpf(1) / 3) < mpmath.mpf(2) ** -390


def test_certified_floor_and_escalation():
    with precision(64):
        assert certified_floor(to_iv(Fraction(7, 2))) == 3
        with pytest.raises(PrecisionUndecidable):
            certified_floor(iv.mpf([0.9, 1.1]))
    near_one = Fraction(10 ** 40 - 1, 10 ** 40)
    assert escalate(lambda: certified_floor(to_iv(near_one)), 64) == 0


def test_env_precision(monkeypatch):
    monkeypatch.delenv("HYPERSHIFT_PRECISION", raising=False)
    assert env_precision_bits() is None
    monkeypatch.setenv("HYPERSHIFT_PRECISION", "50")
    assert env_precision_bits() == 167
    monkeypatch.setenv("HYPERSHIFT_PRECISION", "10")
    with pytest.raises(ConfigError):
        env_precision_bits()
    monkeypatch.setenv("HYPERSHIFT_PRECISION", "lots")
    with pytest.raises(ConfigError):
        env_precision_bits()


def test_decimal_beyond_interpreter_digit_limit():
    n = 7 ** 20000
    text = decimal(n)
    # 20000 log10(7) = 16901.96..., so 16902 digits led by 10^0.96... = 9.13...
    assert len(text) == 16902 and text.startswith("9136") and text.endswith("001")


def test_log1mexp_both_branches():
    with precision(128):
        for x in (-1e-9, -0.5, -0.69314718, -3.0, -40.0):
            want = mpmath.log(1 - mpmath.exp(x))
            assert abs(mid(log1mexp(x)) - want) < 1e-30 * max(1, abs(want))
        with pytest.raises(ValueError):
            log1mexp(0.0)


def test_logaddexp_with_minus_infinity():
    with precision(128):
        assert mid(logaddexp(None, 2.5)) == 2.5
        v = logaddexp(1000, 1000)
        assert abs(mid(v) - (1000 + mpmath.log(2))) < 1e-30


def test_rational_sums_exact():
    assert rational_sum([(1, 2), (1, 3), (1, 6)]) == 1
    assert rational_sum([]) == 0
    assert shifted_reciprocal_sum(1, 4) == Fraction(25, 12)
    assert shifted_reciprocal_sum(Fraction(1, 2), 2) == Fraction(8, 3)


@pytest.mark.parametrize("x", [Fraction(1), Fraction(1, 2), Fraction(121, 120), Fraction(43, 40),
                               Fraction(7, 3), Fraction(1001, 7), Fraction(10 ** 9 + 1, 3)])
def test_digamma_matches_mpmath(x):
    with precision(260):
        want = mpmath.psi(0, mpmath.mpf(x.numerator) / x.denominator)
        got = digamma(x, 200)
        assert contains(got, want) or abs(mid(got) - want) < mpmath.mpf(2) ** -190
        assert hi(got) - lo(got) < mpmath.mpf(2) ** -180


def test_digamma_known_values():
    # references at far higher precision than any cached enclosure
    with precision(1000):
        assert contains(digamma(1, 150), -mpmath.euler)
        assert contains(digamma(Fraction(1, 2), 150), -mpmath.euler - 2 * mpmath.log(2))
        assert contains(digamma(Fraction(1, 4), 150), -mpmath.euler - mpmath.pi / 2 - 3 * mpmath.log(2))


def test_harmonic_small_is_exact_rational_enclosure():
    with precision(128):
        h = harmonic(3, 5, 10)
        want = harmonic_brute(Fraction(3), Fraction(5), 10)
        assert contains(h, mpmath.mpf(want.numerator) / want.denominator)
    assert harmonic_exact(3, 5, 10) == want


def test_harmonic_large_matches_brute_force():
    A, D, n = Fraction(121, 2), Fraction(3), 3000
    want = harmonic_brute(A, D, n)
    with precision(200):
        got = harmonic(A, D, n, 160)
        assert abs(mid(got) - mpmath.mpf(want.numerator) / want.denominator) < mpmath.mpf(2) ** -140


@pytest.mark.parametrize("A, D, tau", [(5, 3, Fraction(1, 2)), (8, 42, Fraction(3, 10)), (121, 120, Fraction(1, 20)),
                                       (2, 7, Fraction(2)), (48, 32, Fraction(1, 30))])
def test_harmonic_crossing_is_first_index_above(A, D, tau):
    # (48, 32, 1/30) hits H(2) = tau exactly
    n = harmonic_crossing(A, D, tau)
    assert harmonic_exact(A, D, n) > tau
    assert n == 0 or harmonic_exact(A, D, n - 1) <= tau


def test_harmonic_crossing_far_out_with_interval_threshold():
    # tau = ln 3 / 2 needs about e^{D tau} terms: far beyond any loop
    A, D = Fraction(3000), Fraction(3000)
    n = harmonic_crossing(A, D, lambda: iv.log(3) / 2)
    assert n.bit_length() > 2000
    with precision(n.bit_length() + 128):
        t = iv.log(3) / 2
        assert hi(harmonic(A, D, n - 1)) < lo(t) < hi(t) < lo(harmonic(A, D, n))


@settings(max_examples=40, deadline=None)
@given(A=st.integers(1, 50), D=st.integers(1, 50), num=st.integers(1, 40))
def test_crossing_property(A, D, num):
    tau = Fraction(num, 20 * A)
    n = harmonic_crossing(A, D, tau)
    assert harmonic_exact(A, D, n) > tau >= harmonic_exact(A, D, max(n - 1, 0)) or n == 0


@settings(max_examples=30, deadline=None)
@given(p=st.integers(1, 400), q=st.integers(1, 60))
def test_digamma_recurrence(p, q):
    x = Fraction(p, q)
    with precision(200):
        lhs = digamma(x + 1, 160)
        rhs = digamma(x, 160) + to_iv(1 / x)
        assert abs(mid(lhs) - mid(rhs)) < mpmath.mpf(2) ** -150
