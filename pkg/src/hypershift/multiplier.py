"""Exact descriptions of the scalar z in zB.

A multiplier is stored either in Cartesian form (rational real and imaginary
parts) or in polar form (modulus ``e`` or a rational, and an angle measured in
full turns).  Polar turns given as rationals make the orbit phase
``M * turns mod 1`` exact for any big integer M.
"""

import re
from dataclasses import dataclass
from fractions import Fraction

from mpmath import iv

from .errors import ConfigError
from .numerics import lo, mid, to_iv


def _rational(text):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a rational number: {text!r}")


@dataclass(frozen=True)
class Multiplier:
    """z = re + i im (cartesian) or z = R e^{2 pi i turns} (polar; R may be the string 'e')."""

    re: Fraction = None
    im: Fraction = None
    modulus: object = None
    turns: Fraction = None

    def __post_init__(self):
        if self.is_polar:
            if self.modulus != "e" and (not isinstance(self.modulus, Fraction) or self.modulus <= 1):
                raise ConfigError("|z| must exceed 1")
            object.__setattr__(self, "turns", Fraction(self.turns or 0) % 1)
        else:
            if self.re * self.re + self.im * self.im <= 1:
                raise ConfigError("|z| must exceed 1")

    @classmethod
    def cartesian(cls, re, im=0):
        return cls(re=Fraction(re), im=Fraction(im))

    @classmethod
    def polar(cls, modulus, turns=0):
        if modulus != "e":
            modulus = Fraction(modulus)
        return cls(modulus=modulus, turns=Fraction(turns))

    @classmethod
    def parse(cls, text):
        """'RE,IM' (rationals or decimals) or 'polar:R,TURNS' with R rational or 'e'."""
        text = text.strip()
        if text.startswith("polar:"):
            parts = text[6:].split(",")
            if len(parts) != 2:
                raise ConfigError("polar multipliers are written polar:R,TURNS")
            r = parts[0].strip()
            return cls.polar("e" if r == "e" else _rational(r), _rational(parts[1]))
        parts = re.split(r",", text)
        if len(parts) == 1:
            return cls.cartesian(_rational(parts[0]))
        if len(parts) != 2:
            raise ConfigError("multipliers are written RE,IM")
        return cls.cartesian(_rational(parts[0]), _rational(parts[1]))

    @classmethod
    def coerce(cls, z):
        """Accept a Multiplier, its text form, or a Python number."""
        if isinstance(z, Multiplier):
            return z
        if isinstance(z, str):
            return cls.parse(z)
        if isinstance(z, complex):
            return cls.cartesian(Fraction(z.real), Fraction(z.imag))
        return cls.cartesian(Fraction(z))

    @property
    def is_polar(self):
        return self.modulus is not None

    @property
    def is_positive_real(self):
        if self.is_polar:
            return self.turns == 0
        return self.im == 0 and self.re > 0

    def log_abs(self):
        """ln|z| as an interval at the current precision."""
        if self.is_polar:
            return iv.mpf(1) if self.modulus == "e" else iv.log(to_iv(self.modulus))
        return iv.log(to_iv(self.re * self.re + self.im * self.im)) / 2

    def turns_iv(self):
        if self.is_polar:
            return to_iv(self.turns)
        if self.im == 0:
            return iv.mpf(0) if self.re > 0 else iv.mpf(0.5)
        t = iv.atan2(to_iv(self.im), to_iv(self.re)) / (2 * iv.pi)
        return t + 1 if lo(t) < 0 else t

    def orbit_phase(self, M):
        """M * arg(z) / 2 pi reduced to the nearest integer: an exact Fraction or a narrow interval."""
        if self.is_polar or self.im == 0:
            t = self.turns if self.is_polar else (Fraction(0) if self.re > 0 else Fraction(1, 2))
            p, q = t.numerator, t.denominator
            r = (M * p) % q
            return Fraction(r, q) if 2 * r <= q else Fraction(r - q, q)
        x = self.turns_iv() * M
        r = x - int(mid(x))
        c = float(mid(r))
        if c > 0.5:
            r -= 1
        elif c < -0.5:
            r += 1
        return r

    def __str__(self):
        if self.is_polar:
            return f"polar:{self.modulus},{self.turns}"
        return f"{self.re},{self.im}"

    def as_complex(self):
        if self.is_polar:
            import cmath
            import math
            r = math.e if self.modulus == "e" else float(self.modulus)
            return cmath.rect(r, 2 * math.pi * float(self.turns))
        return complex(float(self.re), float(self.im))


__all__ = ["Multiplier"]
