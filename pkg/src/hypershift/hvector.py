"""The vector f as a lazy sequence of blocks, with log-domain orbit algebra.

Block k sits on coordinates [M_k, M_{k+1}) and holds
``e^{2 pi i theta_k} (d_k / ||w_k||) w_k`` where w_k is the prefix of v_{j(k)}
that fits in the block and ``d_k = sqrt(r_k^2 - r_{k+1}^2)``.  Because the
blocks are disjoint, ``||B^{M_k} f||^2 = sum_{i>=k} d_i^2 = r_k^2`` exactly.

When w_k = v_l the orbit point splits orthogonally into the block part and
the tail, which gives the closed form

    ||(zB)^{M_k} f - v_l||^2 = a^2 |e^{L + 2 pi i phi} - 1|^2 + |z|^{2 M_k} r_{k+1}^2

with ``a = ||v_l||``, ``L = M_k ln|z| + ln d_k - ln a`` and
``phi = M_k arg(z)/2pi + theta_k``.  Everything is evaluated in interval
arithmetic at a precision that resolves M_k.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from mpmath import iv

from .errors import ConfigError, DegenerateGap, EmptyPattern, FloatRangeExceeded, PatternMismatch
from .multiplier import Multiplier
from .numerics import MIN_BITS, hi, lo, log1mexp, mid, precision, to_iv

_GUARD = 96
# exp() of anything below this underflows a double
_FLOAT_LOG_MIN = -744.0
_FLOAT_LOG_MAX = 709.0


def log_d_from(log_rk, log_rk1):
    """ln sqrt(r_k^2 - r_{k+1}^2) from the two log radii (log_rk1 may be None for r_{k+1} = 0)."""
    if log_rk1 is None:
        return to_iv(log_rk)
    a, b = to_iv(log_rk), to_iv(log_rk1)
    diff = b - a
    if hi(diff) >= 0:
        raise DegenerateGap("log r_{k+1} >= log r_k")
    return a + log1mexp(2 * diff) / 2


@dataclass(frozen=True)
class Block:
    """Block k of f: coordinates [start, start + width) carry e^{log_amp} e^{2 pi i phase} pattern."""

    k: int
    start: int
    width: int
    j: int
    pattern: tuple
    pattern_norm_sq: Fraction
    log_amp: object
    phase: object
    substituted: bool = False

    @property
    def log_amp_float(self):
        return float(mid(self.log_amp))

    @property
    def phase_float(self):
        return 0.0 if self.phase is None else float(mid(to_iv(self.phase)))

    def coefficients(self):
        return np.array([complex(float(re), float(im)) for re, im in self.pattern], dtype=np.complex128)


class HVector:
    """Lazy view of f built on a Schedule."""

    def __init__(self, schedule, strict=False):
        self.schedule = schedule
        self.strict = strict
        self._blocks = {}

    @property
    def k_start(self):
        return self.schedule.k_start

    def _bits(self, *Ms):
        return max(self.schedule.min_bits, max(M.bit_length() for M in Ms) + _GUARD)

    def log_d(self, k):
        e0 = self.schedule.entry(k)
        e1 = self.schedule.entry(k + 1)
        with precision(self._bits(e1.M)):
            return log_d_from(e0.log_r, e1.log_r)

    def tail_log_norm(self, k):
        """ln ||B^{M_k} f|| = ln r_k = -M_k x_k."""
        return self.schedule.entry(k).log_r

    def block(self, k):
        b = self._blocks.get(k)
        if b is not None:
            return b
        sched = self.schedule
        e0 = sched.entry(k)
        e1 = sched.entry(k + 1)
        width = e1.M - e0.M
        v = sched.target(e0.j)
        pattern = tuple(v.coords[: min(width, len(v.coords))])
        substituted = False
        if all(re == 0 and im == 0 for re, im in pattern):
            if self.strict:
                raise EmptyPattern(f"block {k} truncates v_{e0.j} to zero")
            pattern = ((Fraction(1), Fraction(0)),)
            substituted = True
        nsq = sum((re * re + im * im for re, im in pattern), Fraction(0))
        with precision(self._bits(e1.M)):
            log_amp = log_d_from(e0.log_r, e1.log_r) - iv.log(to_iv(nsq)) / 2
        phase = e0.theta if e0.theta is not None else Fraction(0)
        b = Block(k, e0.M, width, e0.j, pattern, nsq, log_amp, phase, substituted)
        self._blocks[k] = b
        return b

    def blocks(self, k_lo, k_hi):
        return [self.block(k) for k in range(k_lo, k_hi + 1)]

    def gap(self, k):
        """ln r_k - ln r_{k+1} = M_{k+1} x_{k+1} - M_k x_k."""
        return self.schedule.gap(k)

    def cone_log_distance(self, k):
        """ln of the cone distance of B^{M_k} f to v_{j(k)}, valid when w_k = v_{j(k)}.

        The orbit point is c v + t with t orthogonal to v and ||t|| = r_{k+1},
        so the distance to the ray is ||v|| r_{k+1} / r_k.
        """
        b = self.block(k)
        v = self.schedule.target(b.j)
        if b.pattern != v.coords:
            raise PatternMismatch(f"block {k} does not carry all of v_{b.j}")
        e1 = self.schedule.entry(k + 1)
        with precision(self._bits(e1.M)):
            return v.log_norm_iv() - self.gap(k)

    def scaled_orbit_log_distance(self, z, k, l=None):
        """Interval for ln ||(zB)^{M_k} f - v_l|| (l defaults to j(k)).

        Requires the pattern of block k to be all of v_l; the upper endpoint is
        the certified bound.
        """
        z = Multiplier.coerce(z)
        sched = self.schedule
        e0 = sched.entry(k)
        l = e0.j if l is None else l
        if l != e0.j:
            raise PatternMismatch(f"j({k}) = {e0.j}, not {l}")
        b = self.block(k)
        v = sched.target(l)
        if b.pattern != v.coords:
            raise PatternMismatch(f"block {k} does not carry all of v_{l}")
        e1 = sched.entry(k + 1)
        with precision(self._bits(e1.M) + 32):
            s = z.log_abs()
            log_a = v.log_norm_iv()
            gap = iv.mpf(e0.log_r) - iv.mpf(e1.log_r)
            if lo(gap) <= 0:
                raise DegenerateGap(f"gap at {k} is not positive")
            # L = M s + ln d_k - ln a, with ln d_k = ln r_k + log1mexp(-2 gap)/2 and ln r_k = -M y + alpha
            L = e0.M * s + e0.log_r + log1mexp(-2 * gap) / 2 - log_a
            phi = to_iv(z.orbit_phase(e0.M)) + to_iv(b.phase)
            near = int(mid(phi))
            phi = phi - near
            eL = iv.exp(L)
            block_sq = iv.expm1(L) ** 2 + 4 * eL * iv.sin(iv.pi * phi) ** 2
            log_tail = e0.M * s + e1.log_r
            # ln(a^2 block_sq + e^{2 log_tail}) / 2
            if hi(block_sq) <= 0:
                return log_tail
            first = 2 * log_a + iv.log(block_sq)
            second = 2 * log_tail
            big, small = (first, second) if mid(first) >= mid(second) else (second, first)
            return (big + iv.log1p(iv.exp(small - big))) / 2

    def materialize(self, prefix_blocks, out_len, log_scale=0.0, k_first=None):
        """Coordinates 0..out_len-1 of the sum of the first prefix_blocks blocks, times e^{-log_scale}."""
        out = np.zeros(out_len, dtype=np.complex128)
        k0 = self.k_start if k_first is None else k_first
        for k in range(k0, k0 + prefix_blocks):
            b = self.block(k)
            if b.start >= out_len:
                break
            amp = b.log_amp_float - log_scale
            if amp < _FLOAT_LOG_MIN or amp > _FLOAT_LOG_MAX:
                raise FloatRangeExceeded(f"block {k} amplitude e^{amp:.1f} is outside double range")
            c = math.exp(amp) * np.exp(2j * math.pi * b.phase_float) * b.coefficients()
            n = min(len(c), out_len - b.start)
            out[b.start: b.start + n] = c[:n]
        return out

    def orbit_segment(self, z, k, n_blocks):
        """Float coordinates of (zB)^{M_k} f over blocks k..k+n_blocks-1 (relative offsets).

        Each coefficient is formed in the log domain before exponentiation,
        so M_k itself may be astronomically large.  ``z = None`` means B alone.
        """
        if z is not None:
            z = Multiplier.coerce(z)
        M0 = self.schedule.entry(k).M
        blocks = [self.block(i) for i in range(k, k + n_blocks)]
        length = blocks[-1].start + blocks[-1].width - M0
        if length > 1 << 26:
            raise FloatRangeExceeded("orbit segment too long to materialize")
        out = np.zeros(int(length), dtype=np.complex128)
        with precision(self._bits(blocks[-1].start + blocks[-1].width) + 32):
            s = z.log_abs() if z is not None else iv.mpf(0)
            zph = z.orbit_phase(M0) if z is not None else Fraction(0)
            for b in blocks:
                amp = float(mid(M0 * s + b.log_amp))
                if amp < _FLOAT_LOG_MIN:
                    break
                if amp > _FLOAT_LOG_MAX:
                    raise FloatRangeExceeded(f"block {b.k} coefficient overflows")
                ph = float(mid(to_iv(zph) + to_iv(b.phase)))
                c = math.exp(amp) * np.exp(2j * math.pi * ph) * b.coefficients()
                off = b.start - M0
                n = min(len(c), b.width)
                out[off: off + n] = c[:n]
        if not np.isfinite(out).all():
            raise FloatRangeExceeded(f"orbit segment at block {k} overflows double range")
        return out

    def materialized_distance(self, z, k, l=None, n_blocks=6):
        """Plain float ||(zB)^{M_k} f - v_l|| from an orbit segment (truncated tail)."""
        l = self.schedule.entry(k).j if l is None else l
        seg = self.orbit_segment(z, k, n_blocks)
        v = self.schedule.target(l).as_array()
        n = max(len(seg), len(v))
        seg = np.pad(seg, (0, n - len(seg)))
        v = np.pad(v, (0, n - len(v)))
        return float(np.linalg.norm(seg - v))


__all__ = ["HVector", "Block", "log_d_from"]
