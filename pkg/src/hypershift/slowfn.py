"""Slowly varying densities and the cycle scheduler j(k).

A density g drives the breakpoints ``bp(n) = floor(n g(n))``.  Index k belongs
to the cycle opened by the largest breakpoint not exceeding k, and
``j(k) = k + 1 - bp(n)`` counts its position inside that cycle.  Every
breakpoint is a *cycle start* (``j = 1``).

All floors are certified: a float fast path is accepted only when its error
bound keeps clear of the nearest integer, otherwise the value is recomputed in
interval arithmetic with precision escalation.
"""

import math
import re
from fractions import Fraction

import numpy as np
from mpmath import iv

from .errors import ConfigError
from .numerics import DEFAULT_MAX_BITS, certified_floor, escalate, to_iv

_BITS0 = 96


class Density:
    """Nondecreasing density g with an interval form (for certification) and a numpy form (for speed).

    ``constant`` is set for the exact-rational constant densities, whose floors
    need no precision at all.
    """

    def __init__(self, name, n_min, iv_fn, np_fn, constant=None, max_bits=DEFAULT_MAX_BITS):
        self.name = name
        self.n_min = int(n_min)
        self._iv_fn = iv_fn
        self._np_fn = np_fn
        self.constant = None if constant is None else Fraction(constant)
        self.max_bits = max_bits
        self._transitions = {}
        if self.constant is not None and self.constant <= 0:
            raise ConfigError("constant density must be positive")

    def __repr__(self):
        return f"Density({self.name!r})"

    @property
    def is_integer_constant(self):
        return self.constant is not None and self.constant.denominator == 1

    def value_iv(self, n):
        """Enclosure of g(n) at the current interval precision."""
        if self.constant is not None:
            return to_iv(self.constant)
        return self._iv_fn(iv.mpf(n))

    def value(self, n):
        """Float value of g(n) (not certified)."""
        if self.constant is not None:
            return float(self.constant)
        return float(self._np_fn(np.array([float(n)]))[0])

    def values_np(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.constant is not None:
            return np.full(n.shape, float(self.constant))
        return self._np_fn(n)

    def floor(self, n):
        """Certified floor(g(n))."""
        if self.constant is not None:
            return self.constant.numerator // self.constant.denominator
        return escalate(lambda: certified_floor(self.value_iv(n)), _BITS0, self.max_bits)

    def floor_product(self, n):
        """Certified floor(n * g(n)), the breakpoint."""
        if self.constant is not None:
            return (n * self.constant.numerator) // self.constant.denominator
        bits = _BITS0 + int(n).bit_length()
        return escalate(lambda: certified_floor(self.value_iv(n) * n), bits, self.max_bits)

    def transition(self, v):
        """Smallest n >= n_min with floor(g(n)) >= v, or None if g never reaches v.

        Densities are nondecreasing, so this is a bisection.  Searches stop at
        n = 2**4096, far beyond any index the schedule can visit.
        """
        if v in self._transitions:
            return self._transitions[v]
        if self.constant is not None:
            res = self.n_min if self.floor(self.n_min) >= v else None
            self._transitions[v] = res
            return res
        lo_n = self.n_min
        if self.floor(lo_n) >= v:
            self._transitions[v] = lo_n
            return lo_n
        hi_n = max(2 * lo_n, 2)
        while self.floor(hi_n) < v:
            lo_n = hi_n
            hi_n *= 2
            if hi_n.bit_length() > 4096:
                self._transitions[v] = None
                return None
        while hi_n - lo_n > 1:
            m = (lo_n + hi_n) // 2
            if self.floor(m) >= v:
                hi_n = m
            else:
                lo_n = m
        self._transitions[v] = hi_n
        return hi_n

    def floor_sum(self, a, b):
        """sum_{i=a}^{b} floor(g(i)) in closed form over the plateaus of floor(g)."""
        if b < a:
            return 0
        v = self.floor(a)
        if self.constant is not None:
            return v * (b - a + 1)
        total = 0
        start = a
        while start <= b:
            t = self.transition(v + 1)
            end = b if t is None or t > b else t - 1
            total += v * (end - start + 1)
            start = end + 1
            v += 1
        return total

    def breakpoints(self, n_lo, n_hi):
        """Certified int64 array of floor(n g(n)) for n in [n_lo, n_hi)."""
        n = np.arange(n_lo, n_hi, dtype=np.int64)
        if self.constant is not None:
            p, q = self.constant.numerator, self.constant.denominator
            if n_hi * p < 2 ** 62:
                return (n * p) // q
            return np.array([self.floor_product(int(x)) for x in n], dtype=np.int64)
        nf = n.astype(np.float64)
        val = nf * self._np_fn(nf)
        out = np.floor(val)
        tol = nf * 1e-13 + 1e-9
        unsure = np.abs(val - np.rint(val)) <= tol
        if unsure.any():
            for idx in np.nonzero(unsure)[0]:
                out[idx] = self.floor_product(int(n[idx]))
        return out.astype(np.int64)


def _lnln_np(n):
    return np.log(np.log(n))


def _lnlnln_np(n):
    return np.log(np.log(np.log(n)))


def lnln():
    """g(n) = ln ln n; the first n with g(n) > 1 is 16."""
    return Density("lnln", 16, lambda n: iv.log(iv.log(n)), _lnln_np)


def lnlnln():
    """g(n) = ln ln ln n, defined and positive from n = 16 on."""
    return Density("lnlnln", 16, lambda n: iv.log(iv.log(iv.log(n))), _lnlnln_np)


def ln():
    return Density("ln", 3, lambda n: iv.log(n), np.log)


def const(c):
    c = Fraction(c)
    return Density(f"const:{c}", 1, None, None, constant=c)


def custom(name, iv_fn, np_fn, n_min):
    """User density.  ``iv_fn`` must map an mpmath interval to an enclosure of g."""
    return Density(name, n_min, iv_fn, np_fn)


_CONST_RE = re.compile(r"^const:(.+)$")


def parse_density(spec):
    """Density from its textual form: lnln, lnlnln, ln or const:C (C an integer or fraction)."""
    if isinstance(spec, Density):
        return spec
    spec = spec.strip()
    if spec == "lnln":
        return lnln()
    if spec == "lnlnln":
        return lnlnln()
    if spec == "ln":
        return ln()
    m = _CONST_RE.match(spec)
    if m:
        try:
            c = Fraction(m.group(1))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad constant in density {spec!r}")
        if c <= 0:
            raise ConfigError("constant density must be positive")
        return const(c)
    raise ConfigError(f"unknown density {spec!r}; expected lnln, lnlnln, ln or const:C")


class CycleMap:
    """The scheduler j(k) induced by a density.

    Breakpoints are memoised; the cache is a pure function of its key, so
    concurrent readers observe the same values a cold computation would give.
    """

    def __init__(self, density, k_start=None):
        self.g = parse_density(density)
        self._bp = {}
        first = self.breakpoint(self.g.n_min)
        if k_start is None:
            k_start = self._first_start_at_least(max(20, first))
        self.k_start = int(k_start)
        if self.k_start < first:
            raise ConfigError(f"k_start={self.k_start} precedes the first breakpoint {first}")
        if self.j(self.k_start) != 1:
            raise ConfigError(f"k_start={self.k_start} is not a cycle start (j = {self.j(self.k_start)})")

    def __repr__(self):
        return f"CycleMap({self.g.name!r}, k_start={self.k_start})"

    def breakpoint(self, n):
        n = int(n)
        if n < self.g.n_min:
            raise ConfigError(f"breakpoint needs n >= {self.g.n_min}")
        v = self._bp.get(n)
        if v is None:
            v = self._bp[n] = self.g.floor_product(n)
        return v

    def cycle_of(self, k):
        """Largest n with breakpoint(n) <= k; the cycle containing k opens at breakpoint(n)."""
        lo_n = self.g.n_min
        if self.breakpoint(lo_n) > k:
            raise ConfigError(f"index {k} precedes the first breakpoint")
        if self.g.constant is not None:
            c = self.g.constant
            # floor(n c) <= k  <=>  n <= (k + 1) / c, excluded at equality
            n = math.ceil(Fraction(k + 1) / c) - 1
            return max(n, lo_n)
        step = 1
        hi_n = lo_n + 1
        while self.breakpoint(hi_n) <= k:
            lo_n = hi_n
            step *= 2
            hi_n = lo_n + step
        while hi_n - lo_n > 1:
            m = (lo_n + hi_n) // 2
            if self.breakpoint(m) <= k:
                lo_n = m
            else:
                hi_n = m
        return lo_n

    def j(self, k):
        k = int(k)
        return k + 1 - self.breakpoint(self.cycle_of(k))

    def next_cycle_start(self, k):
        """Smallest m > k with j(m) = 1, located by search over n."""
        n = self.cycle_of(k) + 1
        b = self.breakpoint(n)
        while b <= k:
            n += 1
            b = self.breakpoint(n)
        return b

    def _first_start_at_least(self, k):
        if self.breakpoint(self.cycle_of(k)) == k:
            return k
        return self.next_cycle_start(k)

    def j_array(self, k_lo, k_hi):
        """numpy array of j(k) for k in [k_lo, k_hi)."""
        n_lo = self.cycle_of(k_lo)
        n_hi = self.cycle_of(k_hi - 1) + 2
        bp = self.g.breakpoints(n_lo, n_hi)
        # duplicates (g < 1) collapse onto the last n with that breakpoint
        ks = np.arange(k_lo, k_hi, dtype=np.int64)
        pos = np.searchsorted(bp, ks, side="right") - 1
        return ks + 1 - bp[pos]


def floor_lnln_array(ks):
    """Certified floor(ln ln k) for an int array, from the certified plateau transitions."""
    g = lnln()
    ks = np.asarray(ks, dtype=np.int64)
    top = int(ks.max())
    edges = []
    v = 1
    while True:
        t = g.transition(v)
        if t is None or t > top:
            break
        edges.append(t)
        v += 1
    # floor(lnln k) = 0 for 16 > k >= 4; callers start at k >= 16 where it is >= 1
    return np.searchsorted(np.array(edges, dtype=np.int64), ks, side="right")


def check_j_bound(cm, k_lo, k_hi, chunk=1 << 20):
    """True iff j(k) < floor(ln ln k) + 3 for every k in [k_lo, k_hi]."""
    if k_lo < 20:
        raise ConfigError("the bound is stated for k >= 20")
    if cm.g.name != "lnln":
        raise ConfigError("check_j_bound applies to the lnln density")
    k = k_lo
    while k <= k_hi:
        end = min(k_hi + 1, k + chunk)
        jj = cm.j_array(k, end)
        fl = floor_lnln_array(np.arange(k, end, dtype=np.int64))
        if np.any(jj >= fl + 3):
            return False
        k = end
    return True


def first_index_with_j(cm, l, k_hi):
    """Smallest k <= k_hi with j(k) = l, or None."""
    k = cm.k_start
    while k <= k_hi:
        end = min(k_hi + 1, k + (1 << 20))
        hits = np.nonzero(cm.j_array(k, end) == l)[0]
        if hits.size:
            return k + int(hits[0])
        k = end
    return None


def plateau_edges(density, lo, hi):
    """Transition points of floor(g) inside (lo, hi]."""
    out = []
    v = density.floor(lo) + 1
    while True:
        t = density.transition(v)
        if t is None or t > hi:
            return out
        out.append(t)
        v += 1


__all__ = [
    "Density", "CycleMap", "lnln", "lnlnln", "ln", "const", "custom", "parse_density",
    "check_j_bound", "floor_lnln_array", "first_index_with_j", "plateau_edges",
]
