"""Certified real arithmetic on top of :mod:`mpmath` intervals.

Everything that decides a discrete fact (a floor, a sign, a comparison) goes
through an interval evaluated at some working precision.  If the interval does
not decide the fact, callers retry at higher precision; past ``max_bits`` a
:class:`~hypershift.errors.PrecisionUndecidable` is raised instead of guessing.

The digamma function is the workhorse for closed-form schedules: partial sums
of ``1/(A + iD)`` are ``(psi(A/D + n) - psi(A/D)) / D``.  :func:`digamma`
chooses between the asymptotic series (large arguments), a Taylor expansion
about an integer, Gauss's digamma theorem for rationals with small
denominators, and an mpmath fallback whose agreement across two precisions is
checked before being trusted.
"""

import math
import os
import sys
from contextlib import contextmanager
from fractions import Fraction

import mpmath
from mpmath import iv, mp

from .errors import ConfigError, PrecisionUndecidable

DEFAULT_MAX_BITS = 1 << 20
MIN_BITS = 64
PRECISION_ENV = "HYPERSHIFT_PRECISION"


def env_precision_bits():
    """Working precision requested through ``HYPERSHIFT_PRECISION`` (decimal digits), in bits."""
    raw = os.environ.get(PRECISION_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        digits = int(raw)
    except ValueError:
        raise ConfigError(f"{PRECISION_ENV} must be an integer number of digits, got {raw!r}")
    if digits < 15:
        raise ConfigError(f"{PRECISION_ENV} must be at least 15 digits")
    return int(math.ceil(digits * math.log2(10)))


@contextmanager
def precision(bits):
    """Set the working precision of both mpmath contexts for the duration of a block."""
    bits = max(int(bits), MIN_BITS)
    old_iv, old_mp = iv.prec, mp.prec
    iv.prec = bits
    mp.prec = bits
    try:
        yield bits
    finally:
        iv.prec = old_iv
        mp.prec = old_mp


def to_iv(x):
    """Enclose an int, Fraction, float or interval in an mpmath interval."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return iv.mpf(x.numerator)
        return iv.mpf(x.numerator) / x.denominator
    if isinstance(x, iv.mpf):
        return x
    return iv.mpf(x)


def lo(x):
    """Lower endpoint of an interval as an mpmath float."""
    return mp.make_mpf(to_iv(x)._mpi_[0])


def hi(x):
    return mp.make_mpf(to_iv(x)._mpi_[1])


def mid(x):
    with mp.workprec(max(mp.prec, iv.prec) + 8):
        return (lo(x) + hi(x)) / 2


def width(x):
    return hi(x) - lo(x)


def certified_floor(x):
    """Floor of a real known only through the interval ``x``.

    Raises PrecisionUndecidable when the interval straddles an integer.
    """
    a, b = lo(x), hi(x)
    fa = int(mpmath.floor(a))
    fb = int(mpmath.floor(b))
    if fa != fb:
        raise PrecisionUndecidable(f"floor undecided on [{mpmath.nstr(a, 20)}, {mpmath.nstr(b, 20)}]")
    return fa


def certified_less(x, y):
    """True if x < y for every point of the intervals, False if x >= y everywhere."""
    if hi(x) < lo(y):
        return True
    if lo(x) >= hi(y):
        return False
    raise PrecisionUndecidable("comparison undecided at current precision")


def escalate(fn, bits, max_bits=DEFAULT_MAX_BITS):
    """Call ``fn()`` at increasing precision until it stops raising PrecisionUndecidable."""
    bits = max(int(bits), MIN_BITS)
    while True:
        with precision(bits):
            try:
                return fn()
            except PrecisionUndecidable:
                if bits >= max_bits:
                    raise
        bits = min(2 * bits, max_bits)


def decimal(n):
    """Decimal text of an integer of any size (sidesteps the interpreter's digit limit)."""
    n = int(n)
    old = sys.get_int_max_str_digits()
    sys.set_int_max_str_digits(0)
    try:
        return str(n)
    finally:
        sys.set_int_max_str_digits(old)


def bits_for(*magnitudes, guard=64):
    """Working precision that resolves quantities of the given integer sizes."""
    size = 0
    for m in magnitudes:
        if isinstance(m, int):
            size = max(size, abs(m).bit_length())
        else:
            size = max(size, int(m))
    return size + guard


def log1mexp(x):
    """log(1 - e^x) for an interval x < 0."""
    x = to_iv(x)
    if hi(x) >= 0:
        raise ValueError("log1mexp needs x < 0")
    if lo(x) > -0.6931471805599453:
        return iv.log(-iv.expm1(x))
    if hi(x) < -0.6931471805599453:
        return iv.log1p(-iv.exp(x))
    # straddles -ln 2: both formulas are valid, log(-expm1) keeps the width small
    return iv.log(-iv.expm1(x))


def logaddexp(a, b):
    """log(e^a + e^b) with -inf allowed on either side (passed as None)."""
    if a is None:
        return b
    if b is None:
        return a
    a, b = to_iv(a), to_iv(b)
    if mid(a) < mid(b):
        a, b = b, a
    return a + iv.log1p(iv.exp(b - a))


def frac_interval(x):
    """Fractional part of an interval that does not straddle an integer."""
    x = to_iv(x)
    return x - certified_floor(x)


def rational_sum(pairs):
    """Exact sum of fractions given as (numerator, denominator) pairs, by binary splitting."""
    pairs = list(pairs)
    if not pairs:
        return Fraction(0)

    def split(i, j):
        if j - i == 1:
            return pairs[i]
        m = (i + j) // 2
        p1, q1 = split(i, m)
        p2, q2 = split(m, j)
        return p1 * q2 + p2 * q1, q1 * q2

    p, q = split(0, len(pairs))
    return Fraction(p, q)


def shifted_reciprocal_sum(x, n):
    """Exact value of sum_{k=0}^{n-1} 1/(x + k) for a positive rational x."""
    x = Fraction(x)
    p, q = x.numerator, x.denominator
    return rational_sum((q, p + k * q) for k in range(n))


# ---------------------------------------------------------------------------
# digamma

_BERNOULLI = {}
_ASYMPTOTIC_MAX_TERMS = 400
_DIRECT_SUM_LIMIT = 20000
_GAUSS_MAX_DENOMINATOR = 4096
_TAYLOR_MAX_TERMS = 48
_PSI_CACHE = {}


def bernoulli(n):
    """Exact Bernoulli number B_n as a Fraction."""
    b = _BERNOULLI.get(n)
    if b is None:
        p, q = mpmath.bernfrac(n)
        b = _BERNOULLI[n] = Fraction(int(p), int(q))
    return b


def _log2_fraction(x):
    x = abs(Fraction(x))
    return math.log2(x.numerator) - math.log2(x.denominator)


def _asymptotic_terms(x, bits):
    """Number of Bernoulli terms making the asymptotic digamma series accurate to 2^-bits, or None."""
    if x < 2:
        return None
    lx = _log2_fraction(x)
    target = -(bits + 8)
    for k in range(0, _ASYMPTOTIC_MAX_TERMS + 1):
        n = 2 * k + 2
        if n > 6.0 * float(min(x, 10 ** 6)):
            return None
        bound = _log2_fraction(bernoulli(n)) - math.log2(n) - n * lx
        if bound < target:
            return k
    return None


def _digamma_asymptotic(x, k_terms):
    xi = to_iv(x)
    inv2 = 1 / (xi * xi)
    s = iv.log(xi) - 1 / (2 * xi)
    t = inv2
    for k in range(1, k_terms + 1):
        s -= to_iv(bernoulli(2 * k) / (2 * k)) * t
        t *= inv2
    n = 2 * k_terms + 2
    rem = abs(to_iv(bernoulli(n) / n)) * t
    r = hi(rem)
    return s + iv.mpf([-r, r])


def _digamma_gauss(p, r):
    """psi(p/r) for 1 <= p < r by Gauss's digamma theorem."""
    pi = iv.pi
    half = r // 2
    # cos(2 pi m / r) = 1 - 2 sin^2(pi m / r), so one table of sines serves both sums
    sines = [None] + [iv.sin(pi * m / r) for m in range(1, half + 1)]

    def sin_at(m):
        m %= r
        return sines[m if m <= half else r - m]

    # iv.cot loses the enclosure next to pi/2, where cos/sin is harmless
    cot = iv.cos(pi * p / r) / iv.sin(pi * p / r)
    total = -iv.euler - iv.log(iv.mpf(2 * r)) - pi / 2 * cot
    acc = iv.mpf(0)
    for n in range(1, (r - 1) // 2 + 1):
        acc += (1 - 2 * sin_at(n * p) ** 2) * iv.log(sines[n])
    return total + 2 * acc


def _zeta_int(k):
    if k == 2:
        return iv.pi ** 2 / 6
    v = mpmath.zeta(k)
    eps = mpmath.ldexp(1, -mp.prec + 8)
    return iv.mpf([v - eps, v + eps])


def _digamma_taylor_one(t, k_terms):
    """psi(1 + t) for small rational t."""
    ti = to_iv(t)
    s = -iv.euler
    p = ti
    for k in range(1, k_terms + 1):
        term = _zeta_int(k + 1) * p
        s = s + term if k % 2 == 1 else s - term
        p *= ti
    at = abs(Fraction(t))
    rem = hi(to_iv(2 * at ** (k_terms + 1) / (1 - at)))
    return s + iv.mpf([-rem, rem])


def _digamma_fallback(x, bits):
    with precision(bits + 64):
        v1 = mpmath.psi(0, mpmath.mpf(x.numerator) / x.denominator)
    with precision(bits + 128):
        v2 = mpmath.psi(0, mpmath.mpf(x.numerator) / x.denominator)
    eps = mpmath.ldexp(max(1, abs(v2)), -bits - 16)
    if abs(v1 - v2) > eps / 4:
        raise PrecisionUndecidable("digamma fallback did not stabilise")
    return iv.mpf([v2 - eps, v2 + eps])


def _digamma_uncached(x, bits):
    k = _asymptotic_terms(x, bits)
    if k is not None:
        return _digamma_asymptotic(x, k)
    n = x.numerator // x.denominator
    frac = x - n
    if frac == 0 and n <= _DIRECT_SUM_LIMIT:
        return -iv.euler + to_iv(shifted_reciprocal_sum(1, n - 1))
    # Gauss costs about q/2 log-sines whatever the precision; Taylor needs bits/log2(1/t) zeta values
    if frac.denominator <= _GAUSS_MAX_DENOMINATOR and n <= _DIRECT_SUM_LIMIT:
        base = _digamma_gauss(frac.numerator, frac.denominator)
        return base + to_iv(shifted_reciprocal_sum(frac, n))
    n0 = round(x)
    t = x - n0
    if n0 >= 1 and t != 0 and n0 <= _DIRECT_SUM_LIMIT:
        kt = math.ceil((bits + 16) / -_log2_fraction(t)) if abs(t) < Fraction(1, 4) else None
        if kt is not None and kt <= _TAYLOR_MAX_TERMS:
            return _digamma_taylor_one(t, kt) + to_iv(shifted_reciprocal_sum(1 + t, n0 - 1))
    shift = 1
    while shift <= _DIRECT_SUM_LIMIT:
        k = _asymptotic_terms(x + shift, bits)
        if k is not None:
            return _digamma_asymptotic(x + shift, k) - to_iv(shifted_reciprocal_sum(x, shift))
        shift *= 2
    return _digamma_fallback(x, bits)


def _cache_bits(bits):
    # quarter-octave grid so that slowly growing requests reuse one evaluation
    e = math.ceil(4 * math.log2(max(bits, MIN_BITS)))
    return int(math.ceil(2 ** (e / 4)))


def digamma(x, bits=None):
    """Enclosure of psi(x) for a positive rational x, accurate to about 2^-bits absolute.

    Results for arguments that are expensive to evaluate (small, non-integral)
    are cached at the highest precision requested so far.
    """
    x = Fraction(x)
    if x <= 0:
        raise ValueError("digamma needs a positive argument")
    if bits is None:
        bits = iv.prec
    cached = _PSI_CACHE.get(x)
    if cached is not None and cached[0] >= bits:
        return cached[1]
    cheap = _asymptotic_terms(x, bits) is not None
    work = bits if cheap else _cache_bits(bits)
    with precision(work + 32):
        val = _digamma_uncached(x, work + 16)
    if not cheap:
        _PSI_CACHE[x] = (work, val)
    return val


def harmonic(A, D, n, bits=None):
    """Enclosure of H(A, D, n) = sum_{i<n} 1/(A + i D) for positive rationals A, D."""
    A, D = Fraction(A), Fraction(D)
    if n <= 0:
        return iv.mpf(0)
    if n <= 256:
        return to_iv(rational_sum(((A + i * D).denominator, (A + i * D).numerator) for i in range(n)))
    if bits is None:
        bits = iv.prec
    a = A / D
    return (digamma(a + n, bits) - digamma(a, bits)) / to_iv(D)


def harmonic_exact(A, D, n):
    A, D = Fraction(A), Fraction(D)
    return rational_sum(((A + i * D).denominator, (A + i * D).numerator) for i in range(n))


def harmonic_crossing(A, D, tau, max_bits=DEFAULT_MAX_BITS, min_bits=MIN_BITS):
    """Smallest n >= 0 with H(A, D, n) > tau.

    ``tau`` is a Fraction or a callable returning an interval enclosure of the
    threshold at the current working precision (for irrational thresholds).
    """
    A, D = Fraction(A), Fraction(D)
    tau_fn = tau if callable(tau) else (lambda: to_iv(Fraction(tau)))
    a = A / D

    with precision(max(min_bits, 128)):
        t0 = mid(tau_fn())
    if t0 < 0:
        # H(0) = 0 > tau already
        return 0

    # coarse estimate of psi(a + n) = psi(a) + D tau
    with precision(max(min_bits, 128)):
        psi_a = mpmath.psi(0, mpmath.mpf(a.numerator) / a.denominator)
        big = psi_a + mpmath.mpf(D.numerator) / D.denominator * t0
    est_log2 = float(big) / math.log(2) if big > 0 else 0.0

    if est_log2 < 11:
        if not callable(tau):
            return _crossing_exact(A, D, Fraction(tau))
        return _crossing_linear(A, D, tau_fn, max_bits, min_bits)

    bits = max(min_bits, int(est_log2) + max(1, int(math.log2(abs(est_log2) + 2))) + 64)
    with precision(bits + 32):
        psi_a = mid(digamma(a, bits + 32))
        target = psi_a + mpmath.mpf(D.numerator) / D.denominator * mid(tau_fn())
        x = mpmath.exp(target) + mpmath.mpf(0.5)
        for _ in range(6):
            fx = mpmath.psi(0, x) - target
            x = x - fx / mpmath.psi(1, x)
        n = int(mpmath.ceil(x - mpmath.mpf(a.numerator) / a.denominator))
    n = max(n, 1)

    def check(n):
        lower = harmonic(A, D, n - 1)
        upper = harmonic(A, D, n)
        t = tau_fn()
        if hi(upper) <= lo(t):
            return +1
        if lo(lower) > hi(t):
            return -1
        if hi(lower) <= lo(t) and lo(upper) > hi(t):
            return 0
        raise PrecisionUndecidable("harmonic crossing undecided")

    def side(n):
        return 1 if n < 1 else escalate(lambda: check(n), bits, max_bits)

    # gallop away from the estimate, then bisect; side(n) is +1 below the crossing, -1 above
    d = side(n)
    if d == 0:
        return n
    step = 1
    while True:
        m = n + d * step
        e = side(m) if m >= 1 else 1
        if e == 0:
            return max(m, 0)
        if e != d:
            break
        n, step = m, 2 * step
    below, above = (n, m) if d > 0 else (m, n)
    while above - below > 1:
        c = (below + above) // 2
        e = side(c)
        if e == 0:
            return c
        below, above = (c, above) if e > 0 else (below, c)
    return above


def _crossing_exact(A, D, tau):
    s, n = Fraction(0), 0
    while s <= tau:
        s += 1 / (A + n * D)
        n += 1
    return n


def _crossing_linear(A, D, tau_fn, max_bits, min_bits):
    def run():
        t = tau_fn()
        s = iv.mpf(0)
        n = 0
        while True:
            if lo(s) > hi(t):
                return n
            if hi(s) > lo(t):
                raise PrecisionUndecidable("harmonic crossing undecided")
            s += to_iv(1 / (A + n * D))
            n += 1
    return escalate(run, max(min_bits, 128), max_bits)
