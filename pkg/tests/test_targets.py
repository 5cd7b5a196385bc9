import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypershift.errors import ConfigError, ZeroVector
from hypershift.targets import cone_distance, density_witness, enumerate_target, format_coords

ONE, ZERO = Fraction(1), Fraction(0)

# frozen head of the enumeration: (coords as text, eps_l)
HEAD = [
    ("1+0j", 1 / 2), ("0+0j;1+0j", 1 / 2), ("1+0j", 1 / 3), ("0.5+0j", 1 / 4), ("0.5+0j", 1 / 5),
    ("0.5+0j", 1 / 6), ("1+0j", 1 / 7), ("-1+0j", 1 / 8), ("-0.5+0j", 1 / 9), ("-0.5+0j", 1 / 10),
    ("-0.5+0j", 1 / 11), ("-1+0j", 1 / 12), ("1+0j", 1 / 13), ("1+0j", 1 / 14),
]


def test_first_targets_are_unit_vectors():
    assert enumerate_target(1).coords == ((ONE, ZERO),)
    assert enumerate_target(2).coords == ((ZERO, ZERO), (ONE, ZERO))
    assert enumerate_target(1).log_norm == 0.0 == enumerate_target(2).log_norm


def test_frozen_head():
    for l, (text, eps) in enumerate(HEAD, start=1):
        t = enumerate_target(l)
        assert format_coords(t.coords) == text
        assert t.cone_radius == pytest.approx(eps, rel=1e-15)


def test_bad_index():
    with pytest.raises(ConfigError):
        enumerate_target(0)


def test_log_norm_steps_stay_below_ln2():
    prev = enumerate_target(1).log_norm
    worst = 0.0
    for l in range(2, 20001):
        a = enumerate_target(l).log_norm
        worst = max(worst, abs(a - prev))
        prev = a
    assert worst <= math.log(2) + 1e-12


@settings(max_examples=50, deadline=None)
@given(l=st.integers(1, 10 ** 30))
def test_targets_are_exact_nonzero_dyadics(l):
    t = enumerate_target(l)
    assert t.norm_sq > 0
    for re, im in t.coords:
        for x in (re, im):
            d = x.denominator
            assert d & (d - 1) == 0
    assert t.norm_sq == sum(re * re + im * im for re, im in t.coords)
    assert t.cone_radius == pytest.approx(min(t.norm / 2, 1 / l), rel=1e-12)


@pytest.mark.parametrize("target, delta", [
    ([1.0], 0.5), ([(0.3, 0.1), (-0.2, 0.0)], 0.01), ([0, 0, 0, 1.7], 0.05), ([(0.0, -2.25)], 0.001),
])
def test_density_witness_lands_within_delta(target, delta):
    l = density_witness(target, delta)
    v = enumerate_target(l).as_array()
    t = np.array([complex(*c) if isinstance(c, tuple) else complex(c) for c in target])
    n = max(len(v), len(t))
    dist = np.linalg.norm(np.pad(v, (0, n - len(v))) - np.pad(t, (0, n - len(t))))
    assert dist < delta


def test_density_witness_frozen_indices():
    assert density_witness([1], 0.5) == 1
    assert density_witness([0, 0, 0, 1.7], 0.05) == 2737442226067352
    assert density_witness([(0.3, 0.1), (-0.2, 0)], 0.01) == 151007282995929850313340195


def test_cone_distance():
    v1 = enumerate_target(1)
    assert cone_distance([2, 0], v1) == 0.0
    assert cone_distance([-1, 0], v1) == 1.0
    assert cone_distance([1, 1], v1) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ZeroVector):
        cone_distance([0, 0], v1)
