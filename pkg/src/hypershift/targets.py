"""The dense target family v_1, v_2, ... with log-norms alpha_l and cone radii eps_l.

Layout of the enumeration:

* ``v_1 = e_0`` and ``v_2 = e_1`` (two unit vectors, so ``alpha_1 = alpha_2 = 0``).
* Then levels m = 1, 2, ...  Level m lists every nonzero vector of length
  n <= m whose coordinates are complex dyadics ``(a + ib) / 2^m`` with
  integer ``|a|, |b| <= m 2^m``, ordered by length and then by a mixed-radix
  rank.  These are the *raw* vectors.
* Each raw vector u becomes a block of ``2m + 3`` consecutive targets:
  ``u 2^E, u 2^(E-s), ..., u, ..., u, ..., u 2^(E-s), u 2^E`` where
  ``E = round(-log2 ||u||)`` and ``s = sign(E)``.  Neighbouring log-norms
  differ by at most ln 2 inside a block, and every block starts and ends
  within ln(2)/2 of zero, so ``|alpha_{l+1} - alpha_l| <= ln 2 < 1`` holds
  throughout.

Every coordinate is an exact dyadic rational, so norms are exact rationals and
the log-norms are reproducible to any precision.  Ranking is invertible, which
lets :func:`density_witness` jump straight to a nearby target instead of
scanning astronomically long prefixes.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from mpmath import iv

from .errors import ConfigError, SearchBudgetExceeded, ZeroVector
from .numerics import to_iv


@dataclass(frozen=True)
class TargetVector:
    """A target v_l: exact dyadic coordinates, alpha_l = ln ||v_l||, eps_l = min(||v_l||/2, 1/l)."""

    l: int
    coords: tuple
    norm_sq: Fraction

    @property
    def log_norm(self):
        return 0.5 * (math.log(self.norm_sq.numerator) - math.log(self.norm_sq.denominator))

    @property
    def norm(self):
        return math.sqrt(self.norm_sq)

    @property
    def cone_radius(self):
        return min(self.norm / 2, 1.0 / self.l)

    def log_norm_iv(self):
        """alpha_l as an interval at the current precision."""
        return iv.log(to_iv(self.norm_sq)) / 2

    def cone_radius_iv(self):
        if self.norm_sq * self.l * self.l <= 4:
            return iv.sqrt(to_iv(self.norm_sq)) / 2
        return to_iv(Fraction(1, self.l))

    def as_array(self):
        return np.array([complex(float(re), float(im)) for re, im in self.coords], dtype=np.complex128)

    def __len__(self):
        return len(self.coords)


def _norm_sq(coords):
    return sum((re * re + im * im for re, im in coords), Fraction(0))


def _base(m):
    return 2 * m * 2 ** m + 1


def _block_width(m):
    return 2 * m + 3


def _raw_count(m, n):
    return _base(m) ** (2 * n) - 1


@lru_cache(maxsize=None)
def _level_items(m):
    return _block_width(m) * sum(_raw_count(m, n) for n in range(1, m + 1))


def _zigzag(d):
    if d == 0:
        return 0
    return (d + 1) // 2 if d % 2 else -(d // 2)


def _unzigzag(v):
    if v == 0:
        return 0
    return 2 * v - 1 if v > 0 else -2 * v


def _exponent(norm_sq):
    x = math.log2(norm_sq.numerator) - math.log2(norm_sq.denominator)
    return round(-x / 2)


def _raw_vector(m, n, rank):
    b = _base(m)
    den = 2 ** m
    digits = []
    for _ in range(2 * n):
        rank, d = divmod(rank, b)
        digits.append(_zigzag(d))
    return tuple((Fraction(digits[2 * i], den), Fraction(digits[2 * i + 1], den)) for i in range(n))


def _scale(coords, e):
    f = Fraction(2) ** e
    return tuple((re * f, im * f) for re, im in coords)


_HEAD = (((Fraction(1), Fraction(0)),), ((Fraction(0), Fraction(0)), (Fraction(1), Fraction(0))))


@lru_cache(maxsize=65536)
def enumerate_target(l):
    """The l-th target vector (l >= 1)."""
    if l < 1:
        raise ConfigError("target indices start at 1")
    if l <= 2:
        coords = _HEAD[l - 1]
        return TargetVector(l, coords, _norm_sq(coords))
    o = l - 3
    m = 1
    while o >= _level_items(m):
        o -= _level_items(m)
        m += 1
    w = _block_width(m)
    rho, p = divmod(o, w)
    n = 1
    while rho >= _raw_count(m, n):
        rho -= _raw_count(m, n)
        n += 1
    u = _raw_vector(m, n, rho + 1)
    e_top = _exponent(_norm_sq(u))
    s = 1 if e_top > 0 else -1
    a = abs(e_top)
    if 2 * a + 1 > w:
        raise AssertionError("block width too small for the level")
    if p < a:
        e = e_top - p * s
    elif p < w - a:
        e = 0
    else:
        e = s * (p - (w - a) + 1)
    coords = _scale(u, e)
    return TargetVector(l, coords, _norm_sq(coords))


def _rank_raw(m, coords):
    """Index l of the unscaled copy of a level-m raw vector."""
    n = len(coords)
    b = _base(m)
    den = 2 ** m
    rank = 0
    for i in reversed(range(n)):
        re, im = coords[i]
        rank = rank * b + _unzigzag(int(im * den))
        rank = rank * b + _unzigzag(int(re * den))
    rho = sum(_raw_count(m, k) for k in range(1, n)) + rank - 1
    e_top = _exponent(_norm_sq(coords))
    offset = 3 + sum(_level_items(k) for k in range(1, m))
    return offset + _block_width(m) * rho + abs(e_top)


def _as_exact(vec):
    out = []
    for x in vec:
        if isinstance(x, tuple):
            re, im = x
        else:
            c = complex(x)
            re, im = c.real, c.imag
        out.append((Fraction(re), Fraction(im)))
    while out and out[-1] == (0, 0):
        out.pop()
    return out


def _dist_sq(a, b):
    n = max(len(a), len(b))
    zero = (Fraction(0), Fraction(0))
    a = list(a) + [zero] * (n - len(a))
    b = list(b) + [zero] * (n - len(b))
    return sum(((x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2 for x, y in zip(a, b)), Fraction(0))


def density_witness(target, delta, scan_limit=200, max_level=64):
    """Some l with ||v_l - target|| < delta (exact rational comparison).

    A short linear scan returns the smallest such l when it is small; otherwise
    the target is rounded onto the first dyadic level fine enough for delta and
    the rounded vector's index is computed by ranking.
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ConfigError("delta must be positive")
    t = _as_exact(target)
    d2 = delta * delta
    for l in range(1, scan_limit + 1):
        if _dist_sq(enumerate_target(l).coords, t) < d2:
            return l
    n = max(len(t), 1)
    biggest = max((max(abs(re), abs(im)) for re, im in t), default=Fraction(0))
    for m in range(max(1, n), max_level + 1):
        if biggest > m:
            continue
        den = 2 ** m
        u = tuple((Fraction(round(re * den), den), Fraction(round(im * den), den)) for re, im in t)
        if all(c == (0, 0) for c in u):
            u = ((Fraction(1, den), Fraction(0)),) + u[1:]
        if _dist_sq(u, t) < d2:
            l = _rank_raw(m, u)
            assert enumerate_target(l).coords == u
            return l
    raise SearchBudgetExceeded(f"no target within {float(delta)} up to level {max_level}")


def cone_distance(v, t):
    """min over mu > 0 of ||mu v - v_l|| for a finite complex vector v.

    When Re<v_l, v> <= 0 the infimum is approached as mu -> 0 and equals ||v_l||.
    """
    v = np.asarray(v, dtype=np.complex128)
    target = t.as_array() if isinstance(t, TargetVector) else np.asarray(t, dtype=np.complex128)
    n = max(len(v), len(target))
    v = np.pad(v, (0, n - len(v)))
    target = np.pad(target, (0, n - len(target)))
    vv = float(np.vdot(v, v).real)
    if vv == 0.0:
        raise ZeroVector("cone distance of the zero vector")
    c = float(np.vdot(v, target).real)
    if c <= 0.0:
        return float(np.linalg.norm(target))
    return float(np.linalg.norm(c / vv * v - target))


def format_coords(coords):
    """Coordinates as 're+imj' items joined by semicolons, with exact decimal expansions."""
    def dec(x):
        # dyadics have terminating decimal expansions
        if x.denominator == 1:
            return str(x.numerator)
        k = x.denominator.bit_length() - 1
        digits = abs(x.numerator) * 5 ** k
        s = str(digits).rjust(k + 1, "0")
        body = s[:-k] + "." + s[-k:]
        body = body.rstrip("0").rstrip(".")
        return ("-" if x < 0 else "") + body

    parts = []
    for re, im in coords:
        sign = "-" if im < 0 else "+"
        parts.append(f"{dec(re)}{sign}{dec(abs(im))}j")
    return ";".join(parts)


__all__ = ["TargetVector", "enumerate_target", "density_witness", "cone_distance", "format_coords"]
