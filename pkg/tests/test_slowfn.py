import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypershift.errors import ConfigError
from hypershift.slowfn import (CycleMap, check_j_bound, const, first_index_with_j, floor_lnln_array, lnln,
                               lnlnln, parse_density, plateau_edges)

from oracles import floor_lnln, j_reference, lnln_breakpoints


def test_lnln_transitions_are_ceilings_of_towers():
    g = lnln()
    for v in (1, 2, 3):
        assert g.transition(v) == math.ceil(math.exp(math.exp(v)))


def test_lnlnln_first_transition():
    assert lnlnln().transition(1) == math.ceil(math.exp(math.exp(math.e)))


def test_floor_sum_matches_loop():
    g = lnln()
    assert g.floor_sum(16, 5000) == sum(floor_lnln(k) for k in range(16, 5001))
    assert const(3).floor_sum(5, 9) == 15
    assert g.floor_sum(10, 9) == 0


def test_breakpoints_agree_with_reference():
    g = lnln()
    bps = g.breakpoints(16, 3000)
    ref = lnln_breakpoints(int(bps[-1]))
    assert sorted(set(bps.tolist())) == ref


def test_parse_density():
    assert parse_density("const:5/2").constant == 2.5
    assert parse_density(" lnln ").name == "lnln"
    for bad in ("const:0", "const:-1", "const:x", "loglog"):
        with pytest.raises(ConfigError):
            parse_density(bad)


@pytest.mark.parametrize("density, k_start, head", [
    ("lnln", 20, [1, 1, 2, 1, 1, 2, 1, 1, 2]),
    ("ln", 23, [1, 2, 3, 1, 2, 3, 1, 2, 3]),
    ("const:10", 20, [1, 2, 3, 4, 5, 6, 7, 8, 9]),
    ("const:5/2", 20, [1, 2, 1, 2, 3, 1, 2, 1, 2]),
])
def test_default_start_and_first_values(density, k_start, head):
    cm = CycleMap(density)
    assert cm.k_start == k_start
    assert [cm.j(k) for k in range(k_start, k_start + len(head))] == head


def test_lnlnln_duplicate_breakpoints_collapse():
    cm = CycleMap("lnlnln")
    # floor(n lnlnln n) repeats while g < 1, so j stays at 1 on [20, 10^4)
    assert cm.k_start == 20
    assert set(cm.j_array(20, 10 ** 4).tolist()) == {1}


def test_k_start_must_be_cycle_start():
    with pytest.raises(ConfigError):
        CycleMap("lnln", k_start=22)
    with pytest.raises(ConfigError):
        CycleMap("lnln", k_start=3)


def test_j_matches_reference_scalar_and_vector():
    cm = CycleMap("lnln")
    bps = lnln_breakpoints(6000)
    ks = list(range(20, 5000))
    ref = [j_reference(k, bps) for k in ks]
    assert [cm.j(k) for k in ks[:400]] == ref[:400]
    assert cm.j_array(20, 5000).tolist() == ref


def test_next_cycle_start():
    cm = CycleMap("lnln")
    assert cm.next_cycle_start(20) == 21
    assert cm.next_cycle_start(21) == 23
    cm10 = CycleMap("const:10")
    assert cm10.next_cycle_start(20) == 30


def test_j_bound_prefix_and_failure_mode():
    cm = CycleMap("lnln")
    assert check_j_bound(cm, 20, 200000)
    with pytest.raises(ConfigError):
        check_j_bound(cm, 5, 100)
    with pytest.raises(ConfigError):
        check_j_bound(CycleMap("const:10"), 20, 100)


def test_floor_lnln_array():
    ks = np.array([16, 17, 1618, 1619, 528491311, 528491312])
    assert floor_lnln_array(ks).tolist() == [1, 1, 1, 2, 2, 3]


def test_first_index_with_j_and_plateaus():
    cm = CycleMap("lnln")
    assert first_index_with_j(cm, 1, 100) == 20
    assert first_index_with_j(cm, 2, 100) == 22
    assert first_index_with_j(cm, 7, 1000) is None
    assert plateau_edges(lnln(), 16, 10 ** 6) == [1619]


@settings(max_examples=60, deadline=None)
@given(k=st.integers(20, 10 ** 12))
def test_j_is_one_at_cycle_start_and_bounded(k):
    cm = CycleMap("lnln")
    n = cm.cycle_of(k)
    c = cm.breakpoint(n)
    assert c <= k < cm.next_cycle_start(k)
    assert cm.j(c) == 1
    assert cm.j(k) == k - c + 1
    assert cm.j(k) < math.floor(math.log(math.log(k))) + 3
